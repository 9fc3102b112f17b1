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
Knowledge trajectories: 2D attention maps of a feature tensor, their
top-k essential points, bounded per-model buffers of those points over
the last training frames, and the L1 trajectory distillation loss.

Connector points are plain constants. The newest student frame also
carries soft-argmax coordinates so the loss can train the student.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import SOURCE_CONNECTOR, SOURCE_STUDENT
from .errors import TrajectoryError
from .tensor import Tensor, softmax, take, concat, DTYPE

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_WINDOW = 10
DEFAULT_GAMMA = 50.0


@dataclass
class AttentionMap:
    """ Sum-normalized map; tensor keeps the graph for student maps. """
    tensor: Tensor
    source: str = SOURCE_STUDENT

    @property
    def values(self):
        return self.tensor.data

    @property
    def shape(self):
        return self.tensor.shape


@dataclass
class EssentialPoint:
    rank: int
    row: int
    col: int
    y: float
    x: float
    value: float


def attention_map(feature, source=SOURCE_STUDENT):
    """ sum_c f**2 per pixel, averaged over the batch and normalized to 1.

    A feature with no energy gives the uniform map.
    """
    feature = feature if isinstance(feature, Tensor) else Tensor(feature)
    energy = (feature * feature).sum(axis=1).mean(axis=0)
    total = energy.sum()
    if total.item() == 0.0:
        h, w = energy.shape
        return AttentionMap(Tensor(np.full((h, w), 1.0 / (h * w))), source)
    return AttentionMap(energy / total, source)


def _normCoords(h, w):
    rows, cols = np.divmod(np.arange(h * w), w)
    ys = rows / (h - 1) if h > 1 else np.zeros(h * w)
    xs = cols / (w - 1) if w > 1 else np.zeros(h * w)
    return rows, cols, ys.astype(DTYPE), xs.astype(DTYPE)


def extract_essential_points(attn, K=DEFAULT_K):
    """ The K highest-valued pixels, ranked 1..K; ties go to the earlier
    pixel in row-major order.
    """
    values = attn.values if isinstance(attn, AttentionMap) else \
        np.asarray(attn, dtype=DTYPE)
    h, w = values.shape
    if K > h * w or K < 1:
        raise TrajectoryError("cannot take %d points from a %dx%d map"
                              % (K, h, w))
    flat = values.reshape(-1)
    order = np.argsort(-flat, kind='stable')[:K]
    rows, cols, ys, xs = _normCoords(h, w)
    return [EssentialPoint(j + 1, int(rows[i]), int(cols[i]), float(ys[i]),
                           float(xs[i]), float(flat[i]))
            for j, i in enumerate(order)]


def soft_points(attn, K=DEFAULT_K, gamma=DEFAULT_GAMMA):
    """ Differentiable counterpart of extract_essential_points.

    Round j takes the softmax of gamma * map over the pixels not yet
    picked, returns its expected normalized coordinate and removes the
    hard argmax of that round. Returns (coords Tensor[K, 2] as (y, x),
    hard points).
    """
    if gamma <= 0:
        raise TrajectoryError("gamma must be positive, got %r" % gamma)
    tensor = attn.tensor if isinstance(attn, AttentionMap) else attn
    h, w = tensor.shape
    if K > h * w or K < 1:
        raise TrajectoryError("cannot take %d points from a %dx%d map"
                              % (K, h, w))
    rows, cols, ys, xs = _normCoords(h, w)
    values = tensor.data.reshape(-1)
    remaining = np.arange(h * w)
    coords, points = [], []
    for j in range(K):
        p = softmax(take(tensor, remaining) * gamma, axis=0)
        coords.append((p * ys[remaining]).sum().reshape(1))
        coords.append((p * xs[remaining]).sum().reshape(1))
        pos = int(np.argmax(values[remaining]))
        i = remaining[pos]
        points.append(EssentialPoint(j + 1, int(rows[i]), int(cols[i]),
                                     float(ys[i]), float(xs[i]),
                                     float(values[i])))
        remaining = np.delete(remaining, pos)
    return concat(coords, axis=0).reshape(K, 2), points


@dataclass
class TrajectoryFrame:
    points: list
    coords: Optional[Tensor] = None
    iteration: int = 0

    def hardCoords(self):
        return np.array([[p.y, p.x] for p in self.points], dtype=DTYPE)


class TrajectoryBuffer(object):
    """ Last `window` frames of one model's essential points, oldest
    first.
    """

    def __init__(self, window=DEFAULT_WINDOW, K=DEFAULT_K,
                 source=SOURCE_STUDENT):
        if window < 1 or K < 1:
            raise TrajectoryError("window and K must be >= 1")
        self.window = int(window)
        self.K = int(K)
        self.source = source
        self.frames = []

    def __len__(self):
        return len(self.frames)

    def clear(self):
        self.frames = []

    def toDict(self):
        return {'window': self.window, 'K': self.K, 'source': self.source,
                'frames': [{'iteration': f.iteration,
                            'points': [[p.rank, p.row, p.col, p.y, p.x,
                                        p.value] for p in f.points]}
                           for f in self.frames]}

    @classmethod
    def fromDict(cls, d):
        buf = cls(d['window'], d['K'], d['source'])
        for f in d['frames']:
            points = [EssentialPoint(int(r), int(row), int(col), float(y),
                                     float(x), float(v))
                      for r, row, col, y, x, v in f['points']]
            buf.frames.append(TrajectoryFrame(points, None, f['iteration']))
        return buf


def push_frame(buffer, points, coords=None, iteration=0):
    """ Append a frame and evict the oldest ones beyond the window. Soft
    coordinates of earlier frames are dropped, freezing them to their
    stored hard points.
    """
    if len(points) != buffer.K:
        raise TrajectoryError("frame has %d points, buffer expects %d"
                              % (len(points), buffer.K))
    if coords is not None and coords.shape != (buffer.K, 2):
        raise TrajectoryError("soft coordinates of shape %s, expected %s"
                              % (coords.shape, (buffer.K, 2)))
    for frame in buffer.frames:
        frame.coords = None
    buffer.frames.append(TrajectoryFrame(list(points), coords, iteration))
    while len(buffer.frames) > buffer.window:
        buffer.frames.pop(0)
    return buffer


def trajectory_loss(J_F, J_S):
    """ Mean over frames and ranks of |dy| + |dx| between rank-matched
    points. The value always comes from the stored hard points; student
    frames holding soft coordinates pass the gradient straight through to
    them.
    """
    if len(J_F) != len(J_S):
        raise TrajectoryError("trajectory lengths differ: connector %d, "
                              "student %d" % (len(J_F), len(J_S)))
    if J_F.K != J_S.K:
        raise TrajectoryError("K differs: connector %d, student %d"
                              % (J_F.K, J_S.K))
    if len(J_F) == 0:
        return Tensor(0.0)

    constSum = 0.0
    live = None
    for ff, fs in zip(J_F.frames, J_S.frames):
        target = ff.hardCoords()
        if fs.coords is not None:
            coords = (fs.coords - fs.coords.detach()) + fs.hardCoords()
            term = (coords - target).abs().sum()
            live = term if live is None else live + term
        else:
            constSum += float(np.abs(fs.hardCoords() - target).sum())
    count = float(len(J_F) * J_F.K)
    if live is None:
        return Tensor(constSum / count)
    return (live + constSum) / count


def connector_points(feature, K=DEFAULT_K):
    return extract_essential_points(attention_map(feature, SOURCE_CONNECTOR),
                                    K)
