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
import unittest

import numpy as np
import numpy.testing as npt

from jointdistill.constants import N_CLASSES
from jointdistill.errors import ConfigError
from jointdistill.synthdata import (SplitSpec, generate_scene, make_splits,
                                    generate_split, batch_indices,
                                    BACKGROUND_DEPTH, MIN_DEPTH)


class TestScenes(unittest.TestCase):
    def testSameSeedSameScene(self):
        a, b = generate_scene(17), generate_scene(17)
        npt.assert_array_equal(a.image, b.image)
        npt.assert_array_equal(a.seg, b.seg)
        npt.assert_array_equal(a.depth, b.depth)
        self.assertFalse(np.array_equal(a.seg, generate_scene(18).seg))

    def testRanges(self):
        for seed in range(50):
            scene = generate_scene(seed, H=24, W=20)
            self.assertEqual(scene.image.shape, (3, 24, 20))
            self.assertEqual(scene.seg.shape, (24, 20))
            self.assertTrue(np.all((scene.image >= 0) & (scene.image <= 1)))
            self.assertTrue(np.all((scene.seg >= 0)
                                   & (scene.seg < N_CLASSES)))
            self.assertGreaterEqual(scene.depth.min(), MIN_DEPTH)
            self.assertLessEqual(scene.depth.max(), 1.0)

    def testBackgroundDepth(self):
        for seed in range(200):
            scene = generate_scene(seed)
            npt.assert_array_equal(scene.depth == BACKGROUND_DEPTH,
                                   scene.seg == 0)

    def testClassFrequencies(self):
        counts = np.zeros(N_CLASSES)
        for seed in range(1000):
            counts += np.bincount(generate_scene(seed).seg.ravel(),
                                  minlength=N_CLASSES)
        freq = counts / counts.sum()
        self.assertTrue(np.all(freq >= 0.05), freq)

    def testOnlyFourClasses(self):
        with self.assertRaises(ConfigError):
            generate_scene(0, C=5)


class TestSplits(unittest.TestCase):
    def testDefaultSizes(self):
        spec = SplitSpec()
        self.assertEqual((spec.n_train, spec.n_val, spec.n_test),
                         (512, 96, 128))
        self.assertAlmostEqual(spec.valFraction, 0.158, places=3)
        pooled = SplitSpec.fromPool(608)
        self.assertEqual(pooled.n_train + pooled.n_val, 608)
        self.assertAlmostEqual(pooled.valFraction, 0.15, places=2)

    def testDisjointAndDeterministic(self):
        train, val, test = make_splits(SplitSpec(), 1000)
        self.assertEqual((len(train), len(val), len(test)), (512, 96, 128))
        self.assertEqual(len(set(train) | set(val) | set(test)), 736)
        self.assertEqual((train, val, test), make_splits(SplitSpec(), 1000))

    def testInvalidSizes(self):
        with self.assertRaises(ConfigError):
            SplitSpec(n_train=0)

    def testSplitKeepsSeedOrder(self):
        seeds = [9, 3, 5]
        split = generate_split(seeds, H=8, W=8, name='val')
        npt.assert_array_equal(split.seeds, seeds)
        npt.assert_array_equal(split.seg[1], generate_scene(3, 8, 8).seg)
        self.assertEqual(split.images.shape, (3, 3, 8, 8))

        parallel = generate_split(seeds, H=8, W=8, workers=2)
        npt.assert_array_equal(parallel.images, split.images)

        images, seg, depth = split.batch([2, 0])
        npt.assert_array_equal(seg[0], split.seg[2])
        self.assertEqual(depth.shape, (2, 8, 8))


class TestBatchIndices(unittest.TestCase):
    def testDeterministicPerIteration(self):
        a = batch_indices(24, 4, 7, iteration=3, stream=1)
        npt.assert_array_equal(a, batch_indices(24, 4, 7, 3, 1))
        self.assertEqual(len(set(a.tolist())), 4)
        self.assertTrue(np.all((a >= 0) & (a < 24)))

    def testStreamsDiffer(self):
        draws = [tuple(batch_indices(100, 8, 7, 0, stream))
                 for stream in range(4)]
        self.assertEqual(len(set(draws)), 4)

    def testSmallSplit(self):
        self.assertEqual(sorted(batch_indices(3, 8, 0, 0).tolist()),
                         [0, 1, 2])


if __name__ == '__main__':
    unittest.main()
