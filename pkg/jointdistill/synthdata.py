# **************************************************************************
# *
# * jointdistill - adaptive multi-teacher distillation laboratory
# *
# * This program is free software; you can redistribute it and/or modify
# * it under the terms of the GNU General Public License as published by
# * the Free Software Foundation; either version 3 of the License, or
# * (at your option) any later version.
# *
# * This program is distributed in the hope that it will be useful,
# * but WITHOUT ANY WARRANTY; without even the implied warranty of
# * MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# * GNU General Public License for more details.
# *
# **************************************************************************
"""
Procedural joint segmentation + depth scenes.

Every scene is a pure function of (seed, H, W, C): 2 to 4 objects
(circle, rectangle, triangle) with a depth that decreases with their size
and their height in the frame, plus a small linear ramp inside each
object. A per-pixel depth test resolves occlusions, so the nearest object
owns both the label and the depth of a pixel.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import Pool

import numpy as np

from .constants import (N_CLASSES, CLASS_CIRCLE, CLASS_RECT,
                        CLASS_TRIANGLE)
from .errors import ConfigError
from .functions import RasterHandler

logger = logging.getLogger(__name__)

BACKGROUND_DEPTH = 1.0
MIN_DEPTH = 0.1
MAX_BASE_DEPTH = 0.85
RAMP_AMPLITUDE = 0.05
NOISE_SIGMA = 0.02

CLASS_COLORS = np.array([[0.35, 0.35, 0.35],
                         [0.90, 0.25, 0.20],
                         [0.20, 0.75, 0.30],
                         [0.25, 0.35, 0.90]])


@dataclass
class Scene:
    image: np.ndarray
    seg: np.ndarray
    depth: np.ndarray
    seed: int


@dataclass
class SplitSpec:
    n_train: int = 512
    n_val: int = 96
    n_test: int = 128

    def __post_init__(self):
        for name in ('n_train', 'n_val', 'n_test'):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "split sizes must be >= 1")

    @property
    def valFraction(self):
        return self.n_val / float(self.n_train + self.n_val)

    @classmethod
    def fromPool(cls, nPool, valFraction=0.15, nTest=128):
        """ Reserve valFraction of a training pool for validation. """
        nVal = max(1, int(round(nPool * valFraction)))
        return cls(nPool - nVal, nVal, nTest)


@dataclass
class SceneSet:
    """ Scenes of one split stacked along the first axis, in seed order. """
    seeds: np.ndarray
    images: np.ndarray
    seg: np.ndarray
    depth: np.ndarray
    name: str = field(default='')

    def __len__(self):
        return len(self.seeds)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return SceneSet(self.seeds[indices], self.images[indices],
                        self.seg[indices], self.depth[indices], self.name)

    def batch(self, indices):
        sub = self.subset(indices)
        return sub.images, sub.seg, sub.depth


def generate_scene(seed, H=32, W=32, C=N_CLASSES):
    if C != N_CLASSES:
        raise ConfigError('n_classes', "scenes have exactly %d classes "
                                       "(background, circle, rectangle, "
                                       "triangle), got %d" % (N_CLASSES, C))
    rh = RasterHandler
    rng = np.random.default_rng(seed)
    seg = np.zeros((H, W), dtype=np.int64)
    depth = np.full((H, W), BACKGROUND_DEPTH)
    side = min(H, W)

    for _ in range(int(rng.integers(2, 5))):
        kind = int(rng.integers(CLASS_CIRCLE, CLASS_TRIANGLE + 1))
        size = rng.uniform(0.5, 1.0)
        cy = rng.uniform(0.1, 0.9) * H
        cx = rng.uniform(0.1, 0.9) * W
        aspect = rng.uniform(0.6, 1.4)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        rampAngle = rng.uniform(0.0, 2.0 * np.pi)
        jitter = rng.uniform(-0.05, 0.05)
        radius = size * 0.35 * side

        if kind == CLASS_CIRCLE:
            mask = rh.circleMask(H, W, cy, cx, radius)
        elif kind == CLASS_RECT:
            mask = rh.rectMask(H, W, cy, cx, 0.9 * radius * np.sqrt(aspect),
                               0.9 * radius / np.sqrt(aspect))
        else:
            mask = rh.triangleMask(H, W, rh.regularTriangle(
                cy, cx, 1.2 * radius, angle))

        # bigger and lower objects are nearer
        base = MAX_BASE_DEPTH - 0.45 * (size - 0.5) / 0.5 \
            - 0.25 * cy / H + jitter
        base = float(np.clip(base, MIN_DEPTH, MAX_BASE_DEPTH))
        objDepth = base + rh.linearRamp(H, W, mask, rampAngle,
                                        RAMP_AMPLITUDE)
        nearer = mask & (objDepth < depth)
        seg[nearer] = kind
        depth[nearer] = objDepth[nearer]

    shading = 1.15 - 0.75 * depth
    image = CLASS_COLORS[seg].transpose(2, 0, 1) * shading[None]
    image = image + rng.normal(0.0, NOISE_SIGMA, size=image.shape)
    return Scene(np.clip(image, 0.0, 1.0), seg, depth, int(seed))


def make_splits(spec, base_seed):
    """ Contiguous, disjoint seed ranges: train, then val, then test. """
    start = int(base_seed)
    train = list(range(start, start + spec.n_train))
    start += spec.n_train
    val = list(range(start, start + spec.n_val))
    start += spec.n_val
    test = list(range(start, start + spec.n_test))
    return train, val, test


def generate_split(seeds, H=32, W=32, C=N_CLASSES, workers=1, name=''):
    """ Generate and stack the scenes of seeds, preserving their order. """
    seeds = [int(s) for s in seeds]
    func = partial(generate_scene, H=H, W=W, C=C)
    if workers > 1 and len(seeds) > 1:
        with Pool(workers) as pool:
            scenes = pool.map(func, seeds)
    else:
        scenes = [func(s) for s in seeds]
    logger.debug("generated %d %s scenes (%dx%d)", len(scenes), name, H, W)
    return SceneSet(np.array(seeds, dtype=np.int64),
                    np.stack([s.image for s in scenes]),
                    np.stack([s.seg for s in scenes]),
                    np.stack([s.depth for s in scenes]), name)


def batch_indices(n, batchSize, seed, iteration, stream=0):
    """ Training batch of one iteration; depends only on (seed, stream,
    iteration) so a resumed run draws the same batches.
    """
    rng = np.random.default_rng([int(seed), int(stream), int(iteration)])
    return rng.choice(n, size=min(batchSize, n), replace=False)
