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

from jointdistill.constants import (TASK_SEG, TASK_DEPTH, N_CLASSES,
                                    TEACHER_WIDTHS, STUDENT_WIDTHS)
from jointdistill.errors import ShapeError, ConfigError
from jointdistill.models import (HeadSpec, BatchNormState, batch_norm,
                                 build_teacher, build_student,
                                 build_connector, build_from_identity)
from jointdistill.tensor import Tensor


class TestBase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(7)
        cls.images = cls.rng.uniform(size=(1, 3, 8, 8))


class TestTeacher(TestBase):
    def testOutputShapes(self):
        seg = build_teacher(HeadSpec(TASK_SEG), 0)
        depth = build_teacher(HeadSpec(TASK_DEPTH), 0)
        feature, logits = seg(self.images)
        self.assertEqual(feature.shape, (1, TEACHER_WIDTHS[-1], 8, 8))
        self.assertEqual(logits[0].shape, (1, N_CLASSES, 8, 8))
        self.assertEqual(depth(self.images)[1][0].shape, (1, 1, 8, 8))

    def testSameSeedSameParameters(self):
        a = build_teacher(HeadSpec(TASK_SEG), 11).stateDict()
        b = build_teacher(HeadSpec(TASK_SEG), 11).stateDict()
        c = build_teacher(HeadSpec(TASK_SEG), 12).stateDict()
        self.assertEqual(list(a), list(b))
        for name in a:
            npt.assert_array_equal(a[name], b[name])
        self.assertFalse(np.array_equal(a['param.backbone.0.conv.weight'],
                                        c['param.backbone.0.conv.weight']))

    def testInitialization(self):
        teacher = build_teacher(HeadSpec(TASK_DEPTH), 3)
        weight = teacher.params['backbone.1.conv.weight'].data
        bound = np.sqrt(6.0 / (TEACHER_WIDTHS[0] * 9))
        self.assertLessEqual(np.abs(weight).max(), bound)
        npt.assert_array_equal(teacher.params['backbone.1.conv.bias'].data, 0)
        npt.assert_array_equal(teacher.params['backbone.1.bn.gamma'].data, 1)
        npt.assert_array_equal(teacher.params['backbone.1.bn.beta'].data, 0)

    def testEvalForwardIsPure(self):
        teacher = build_teacher(HeadSpec(TASK_SEG), 5, widths=[4, 4])
        before = teacher.stateDict()
        first = teacher(self.images)[1][0].data.copy()
        second = teacher(self.images)[1][0].data
        npt.assert_array_equal(first, second)
        for name, value in teacher.stateDict().items():
            npt.assert_array_equal(value, before[name])

    def testWrongInputChannels(self):
        teacher = build_teacher(HeadSpec(TASK_SEG), 0, widths=[4])
        with self.assertRaises(ShapeError):
            teacher(np.zeros((1, 2, 8, 8)))

    def testBadHead(self):
        with self.assertRaises(ConfigError):
            HeadSpec('normals')
        with self.assertRaises(ConfigError):
            HeadSpec(TASK_SEG, n_classes=1)


class TestStudent(TestBase):
    def testOutputShapes(self):
        student = build_student(2, 0)
        feature, logits = student(self.images)
        self.assertEqual(feature.shape, (1, STUDENT_WIDTHS[-1], 8, 8))
        self.assertEqual(logits[0].shape, (1, N_CLASSES, 8, 8))
        self.assertEqual(logits[1].shape, (1, 1, 8, 8))

    def testHeadsShareTheBackboneFeature(self):
        student = build_student(2, 0, widths=[4, 4])
        feature, logits = student(self.images, training=False)
        for p in logits:
            self.assertIs(p.creator.inputs[0], feature)

        images = self.rng.uniform(size=(2, 3, 6, 6))
        before = student.predict(images)
        student.params['backbone.0.conv.weight'].data[0, 0, 1, 1] += 0.5
        after = student.predict(images)
        for b, a in zip(before, after):
            self.assertFalse(np.allclose(b, a))

    def testFewerParametersThanATeacher(self):
        student = build_student(2, 0)
        teacher = build_teacher(HeadSpec(TASK_SEG), 0)
        self.assertLess(student.nParameters(), teacher.nParameters())

    def testNeedsTwoTasks(self):
        with self.assertRaises(ConfigError):
            build_student(1, 0, heads=[HeadSpec(TASK_SEG)])

    def testThreeTasksNeedExplicitHeads(self):
        with self.assertRaisesRegex(ConfigError, "explicit heads"):
            build_student(3, 0)
        heads = [HeadSpec(TASK_SEG), HeadSpec(TASK_DEPTH),
                 HeadSpec(TASK_DEPTH)]
        student = build_student(3, 0, widths=[4], heads=heads)
        _, logits = student(self.images)
        self.assertEqual([g.shape[1] for g in logits], [N_CLASSES, 1, 1])

    def testStateDictRoundTrip(self):
        a = build_student(2, 1, widths=[4, 4])
        b = build_student(2, 2, widths=[4, 4])
        a(self.rng.uniform(size=(2, 3, 5, 5)), training=True)
        b.loadStateDict(a.stateDict())
        for x, y in zip(a.predict(self.images), b.predict(self.images)):
            npt.assert_array_equal(x, y)

    def testLoadRejectsWrongShapes(self):
        a = build_student(2, 1, widths=[4, 4])
        b = build_student(2, 1, widths=[5, 4])
        with self.assertRaises(ShapeError):
            b.loadStateDict(a.stateDict())

    def testBuildFromIdentity(self):
        student = build_student(2, 9, widths=[3, 5])
        clone = build_from_identity(student.identity())
        self.assertEqual(clone.identity(), student.identity())
        for name, value in clone.stateDict().items():
            npt.assert_array_equal(value, student.stateDict()[name])

    def testFreeze(self):
        student = build_student(2, 0, widths=[4]).freeze()
        _, logits = student(self.images, training=True)
        self.assertFalse(logits[0].requires_grad)
        self.assertIsNone(logits[0].creator)


class TestConnector(TestBase):
    def testOutputShapes(self):
        connector = build_connector([32, 32], 2, 0)
        features = [Tensor(self.rng.normal(size=(1, 32, 8, 8)))
                    for _ in range(2)]
        fused, logits = connector(features)
        self.assertEqual(fused.shape, (1, 32, 8, 8))
        self.assertEqual(logits[0].shape, (1, N_CLASSES, 8, 8))
        self.assertEqual(logits[1].shape, (1, 1, 8, 8))

    def testZeroInputGivesHeadBiases(self):
        connector = build_connector([4, 4], 2, 0, widths=[4, 4])
        connector.params['head.0.bias'].data[...] = [1.0, 2.0, 3.0, 4.0]
        connector.params['head.1.bias'].data[...] = [0.5]
        zeros = [np.zeros((1, 4, 3, 3)), np.zeros((1, 4, 3, 3))]
        _, logits = connector(zeros)
        for c, value in enumerate([1.0, 2.0, 3.0, 4.0]):
            npt.assert_array_equal(logits[0].data[0, c], value)
        npt.assert_array_equal(logits[1].data, 0.5)

    def testChannelMismatch(self):
        connector = build_connector([4, 6], 2, 0, widths=[4, 4])
        with self.assertRaises(ShapeError):
            connector([np.zeros((1, 4, 3, 3)), np.zeros((1, 4, 3, 3))])
        with self.assertRaises(ShapeError):
            connector([np.zeros((1, 4, 3, 3))])

    def testExactlyTwoBlocks(self):
        with self.assertRaises(ConfigError):
            build_connector([4, 4], 2, 0, widths=[4, 4, 4])

    def testBuildFromIdentityKeepsTasks(self):
        heads = [HeadSpec(TASK_SEG, 3), HeadSpec(TASK_DEPTH, 3),
                 HeadSpec(TASK_DEPTH, 3)]
        connector = build_connector([4, 4], 3, 5, 3, widths=[4, 4],
                                    heads=heads)
        clone = build_from_identity(connector.identity())
        self.assertEqual(clone.identity(), connector.identity())
        self.assertEqual(len(clone.heads), 3)
        for name, value in clone.stateDict().items():
            npt.assert_array_equal(value, connector.stateDict()[name])


class TestBatchNormState(TestBase):
    def makeState(self, channels):
        return BatchNormState(Tensor(np.ones(channels)),
                              Tensor(np.zeros(channels)),
                              np.zeros(channels), np.ones(channels))

    def testRunningStatistics(self):
        x = self.rng.normal(2.0, 3.0, size=(4, 3, 5, 5))
        state = self.makeState(3)
        out = batch_norm(Tensor(x), state, training=True)
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        expected = (x - mean[None, :, None, None]) / \
            np.sqrt(var[None, :, None, None] + 1e-5)
        npt.assert_allclose(out.data, expected, rtol=0, atol=1e-10)
        npt.assert_allclose(state.running_mean, 0.1 * mean, atol=1e-12)
        npt.assert_allclose(state.running_var,
                            0.9 + 0.1 * x.var(axis=(0, 2, 3), ddof=1),
                            atol=1e-12)

    def testEvalDoesNotTouchStatistics(self):
        state = self.makeState(2)
        state.running_mean[...] = [1.0, -1.0]
        batch_norm(Tensor(self.rng.normal(size=(2, 2, 3, 3))), state,
                   training=False)
        npt.assert_array_equal(state.running_mean, [1.0, -1.0])
        npt.assert_array_equal(state.running_var, [1.0, 1.0])

    def testTooFewValues(self):
        with self.assertRaises(ShapeError):
            batch_norm(Tensor(np.zeros((1, 2, 1, 1))), self.makeState(2),
                       training=True)

    def testStandardizedInputUnchanged(self):
        x = self.rng.normal(size=(8, 2, 6, 6))
        x = (x - x.mean(axis=(0, 2, 3), keepdims=True)) / \
            x.std(axis=(0, 2, 3), keepdims=True)
        out = batch_norm(Tensor(x), self.makeState(2), training=True)
        npt.assert_allclose(out.data, x, rtol=1e-5, atol=0)


if __name__ == '__main__':
    unittest.main()
