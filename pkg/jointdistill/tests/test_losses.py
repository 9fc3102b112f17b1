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
import math
import unittest

import numpy as np
import numpy.testing as npt
from scipy.special import (log_softmax as scipyLogSoftmax,
                           softmax as scipySoftmax)
from scipy.special import rel_entr

from jointdistill.constants import (TASKS, TASK_SEG, TASK_DEPTH,
                                    SOURCE_CONNECTOR)
from jointdistill.errors import (ShapeError, LabelError, LossTermError,
                                 ControllerError)
from jointdistill.losses import (task_loss_segmentation, task_loss_depth,
                                 task_losses, kl_divergence,
                                 logits_distill_loss, connector_loss,
                                 student_total_loss, static_baseline_loss,
                                 static_breakdown)
from jointdistill.tensor import Tensor, backward
from jointdistill.trajectory import (TrajectoryBuffer, push_frame,
                                     trajectory_loss, soft_points,
                                     attention_map, connector_points)


def klOracle(learner, target):
    """ Mean over pixels of sum_c P log(P / Q) along axis 1. """
    p = scipySoftmax(learner, axis=1)
    q = scipySoftmax(target, axis=1)
    return rel_entr(p, q).sum(axis=1).mean()


class TestBase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(2024)

    def param(self, *shape):
        return Tensor(self.rng.normal(size=shape), requires_grad=True)


class TestTaskLosses(TestBase):
    def testUniformLogits(self):
        logits = Tensor(np.zeros((2, 4, 3, 3)))
        labels = self.rng.integers(0, 4, size=(2, 3, 3))
        self.assertAlmostEqual(task_loss_segmentation(logits, labels).item(),
                               math.log(4), places=12)

    def testLargeMargin(self):
        labels = self.rng.integers(0, 4, size=(2, 5, 5))
        logits = 20.0 * np.eye(4)[labels].transpose(0, 3, 1, 2)
        loss = task_loss_segmentation(Tensor(logits), labels).item()
        self.assertLess(loss, 1e-8)

    def testSegmentationOracle(self):
        logits = self.rng.normal(size=(3, 5, 4, 4))
        labels = self.rng.integers(0, 5, size=(3, 4, 4))
        logp = scipyLogSoftmax(logits, axis=1)
        expected = -np.mean(np.take_along_axis(logp, labels[:, None],
                                               axis=1))
        loss = task_loss_segmentation(Tensor(logits), labels).item()
        self.assertAlmostEqual(loss, expected, delta=1e-12)

    def testLabelOutOfRange(self):
        labels = np.zeros((1, 3, 3), dtype=int)
        labels[0, 2, 1] = 4
        with self.assertRaises(LabelError) as ctx:
            task_loss_segmentation(Tensor(np.zeros((1, 4, 3, 3))), labels)
        self.assertEqual(ctx.exception.pixel, (0, 2, 1))
        self.assertEqual(ctx.exception.label, 4)

    def testDepth(self):
        gt = self.rng.uniform(0.1, 1.0, size=(2, 4, 4))
        pred = Tensor(gt[:, None].copy())
        self.assertEqual(task_loss_depth(pred, gt).item(), 0.0)
        shifted = task_loss_depth(Tensor(gt[:, None] + 0.5), gt).item()
        self.assertAlmostEqual(shifted, 0.5, places=12)

        noisy = self.rng.uniform(size=(2, 1, 4, 4))
        self.assertAlmostEqual(task_loss_depth(Tensor(noisy), gt).item(),
                               np.abs(noisy[:, 0] - gt).mean(), delta=1e-12)
        with self.assertRaises(ShapeError):
            task_loss_depth(Tensor(noisy), gt[:, :3])

    def testTaskLossesDispatch(self):
        seg = Tensor(np.zeros((1, 4, 2, 2)))
        depth = Tensor(np.full((1, 1, 2, 2), 0.3))
        losses = task_losses([seg, depth], [np.zeros((1, 2, 2), dtype=int),
                                            np.full((1, 2, 2), 0.5)], TASKS)
        self.assertAlmostEqual(losses[0].item(), math.log(4), places=12)
        self.assertAlmostEqual(losses[1].item(), 0.2, places=12)


class TestDistillationLosses(TestBase):
    def testIdenticalLogits(self):
        seg = self.rng.normal(size=(2, 4, 3, 3))
        depth = self.rng.normal(size=(2, 1, 3, 3))
        loss = logits_distill_loss([Tensor(seg), Tensor(depth)],
                                   [Tensor(seg), Tensor(depth)])
        self.assertEqual(loss.item(), 0.0)

    def testTwoClassExample(self):
        student = Tensor(np.zeros((1, 2, 1, 1)))
        connector = np.array([math.log(3), 0.0]).reshape(1, 2, 1, 1)
        expected = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
        value = kl_divergence(student, connector).item()
        self.assertAlmostEqual(value, expected, places=12)
        self.assertAlmostEqual(value, 0.14384, places=5)

    def testKlOracleAndSign(self):
        for _ in range(1000):
            learner = self.rng.normal(scale=3.0, size=(1, 4, 2, 2))
            target = self.rng.normal(scale=3.0, size=(1, 4, 2, 2))
            value = kl_divergence(Tensor(learner), target).item()
            self.assertGreaterEqual(value, 0.0)
            self.assertAlmostEqual(value, klOracle(learner, target),
                                   delta=1e-12)

    def testConnectorLogitsGetNoGradient(self):
        student = [self.param(2, 4, 3, 3), self.param(2, 1, 3, 3)]
        connector = [self.param(2, 4, 3, 3), self.param(2, 1, 3, 3)]
        backward(logits_distill_loss(student, connector),
                 student + connector)
        for p in connector:
            npt.assert_array_equal(p.grad, 0.0)
        self.assertGreater(np.abs(student[0].grad).sum(), 0.0)

    def testShapeMismatch(self):
        with self.assertRaises(ShapeError):
            kl_divergence(Tensor(np.zeros((1, 4, 2, 2))),
                          np.zeros((1, 3, 2, 2)))
        with self.assertRaises(ShapeError):
            logits_distill_loss([Tensor(np.zeros((1, 4, 2, 2)))],
                                [np.zeros((1, 4, 2, 2))] * 2)


class TestConnectorLoss(TestBase):
    def makeLogits(self):
        return [self.rng.normal(size=(2, 4, 3, 3)),
                self.rng.normal(size=(2, 1, 3, 3))]

    def testMatchingTeachers(self):
        logits = self.makeLogits()
        loss = connector_loss([Tensor(x) for x in logits], logits, [3.0, 0.2])
        self.assertEqual(loss.item(), 0.0)

    def testLinearInOmega(self):
        connector, teachers = self.makeLogits(), self.makeLogits()
        once = connector_loss([Tensor(x) for x in connector], teachers,
                              [0.7, 1.3]).item()
        twice = connector_loss([Tensor(x) for x in connector], teachers,
                               [1.4, 2.6]).item()
        self.assertEqual(twice, 2.0 * once)

    def testOracle(self):
        connector, teachers = self.makeLogits(), self.makeLogits()
        omega = [0.8, 1.9]
        expected = omega[0] * klOracle(connector[0], teachers[0]) + \
            omega[1] * np.abs(connector[1] - teachers[1]).mean()
        loss = connector_loss([Tensor(x) for x in connector], teachers,
                              omega, [TASK_SEG, TASK_DEPTH])
        self.assertAlmostEqual(loss.item(), expected, delta=1e-12)

    def testTeachersGetNoGradient(self):
        connector = [self.param(1, 4, 2, 2), self.param(1, 1, 2, 2)]
        teachers = [self.param(1, 4, 2, 2), self.param(1, 1, 2, 2)]
        backward(connector_loss(connector, teachers, [1.0, 1.0]),
                 connector + teachers)
        for p in teachers:
            npt.assert_array_equal(p.grad, 0.0)

    def testInvalidOmega(self):
        connector, teachers = self.makeLogits(), self.makeLogits()
        wrapped = [Tensor(x) for x in connector]
        with self.assertRaises(ControllerError):
            connector_loss(wrapped, teachers, [1.0, 0.0])
        with self.assertRaises(ControllerError):
            connector_loss(wrapped, teachers, [-1.0, 1.0])
        with self.assertRaises(ShapeError):
            connector_loss(wrapped, teachers, [1.0])


class TestComposites(TestBase):
    def testTotal(self):
        tasks = [Tensor(0.6), Tensor(0.4)]
        breakdown = student_total_loss(tasks, Tensor(0.5), Tensor(0.25), 1.0)
        self.assertAlmostEqual(breakdown.total, 1.75, places=12)
        self.assertAlmostEqual(breakdown.tensor.item(), 1.75, places=12)
        self.assertEqual(breakdown.asRow(7), [7, 0.6, 0.4, 0.5, 0.25,
                                              breakdown.total])

        noTraj = student_total_loss(tasks, Tensor(0.5), Tensor(0.25), 0.0)
        self.assertAlmostEqual(noTraj.total, 1.5, places=12)
        naive = student_total_loss(tasks, None, None, 0.0)
        self.assertAlmostEqual(naive.total, 1.0, places=12)

    def testGradientIsSumOfTermGradients(self):
        p = self.param(2, 4, 3, 3)
        labels = self.rng.integers(0, 4, size=(2, 3, 3))
        target = self.rng.normal(size=(2, 4, 3, 3))

        def terms():
            return (task_loss_segmentation(p, labels),
                    kl_divergence(p, target), (p * p).mean())

        grads = []
        for i in range(3):
            p.grad = None
            backward(terms()[i], [p])
            grads.append(p.grad.copy())
        p.grad = None
        task, logits, traj = terms()
        backward(student_total_loss([task], logits, traj, 1.0,
                                    names=[TASK_SEG]).tensor, [p])
        npt.assert_allclose(p.grad, grads[0] + grads[1] + grads[2], rtol=0,
                            atol=1e-12)

    def testNonFiniteTerm(self):
        with self.assertRaises(LossTermError) as ctx:
            student_total_loss([Tensor(0.1), Tensor(0.2)], Tensor(np.nan),
                               Tensor(0.0), 1.0)
        self.assertEqual(ctx.exception.term, 'logits')
        self.assertIsNotNone(ctx.exception.breakdown)
        self.assertEqual(ctx.exception.breakdown.task, [0.1, 0.2])

        with self.assertRaises(LossTermError) as ctx:
            student_total_loss([Tensor(np.inf), Tensor(0.2)], None, None, 1.0)
        self.assertEqual(ctx.exception.term, 'task_seg')

    def testStaticBaseline(self):
        tasks = [Tensor(0.3), Tensor(0.2)]
        kd = [Tensor(0.7), Tensor(0.1)]
        naive = static_baseline_loss(tasks, kd, [0.0, 0.0]).item()
        self.assertAlmostEqual(naive, 0.5, places=12)
        plain = static_baseline_loss(tasks, kd, [1.0, 1.0]).item()
        self.assertAlmostEqual(plain, 1.3, places=12)
        total = student_total_loss(tasks, kd[0] + kd[1], None, 0.0).total
        self.assertAlmostEqual(plain, total, delta=1e-12)

    def testStaticBreakdown(self):
        breakdown = static_breakdown([Tensor(0.3), Tensor(0.2)],
                                     [Tensor(0.5), Tensor(0.25)], [2.0, 4.0])
        self.assertAlmostEqual(breakdown.logits, 2.0, places=12)
        self.assertEqual(breakdown.traj, 0.0)
        self.assertAlmostEqual(breakdown.total, 2.5, places=12)
        with self.assertRaises(LossTermError):
            static_breakdown([Tensor(0.3), Tensor(np.nan)],
                             [Tensor(0.5), Tensor(0.25)], [1.0, 1.0])

    def testSelfDistillationFixedPoint(self):
        # student outputs copied from the connector
        seg = self.rng.normal(size=(2, 4, 6, 6))
        depth = self.rng.normal(size=(2, 1, 6, 6))
        student = [Tensor(seg.copy(), requires_grad=True),
                   Tensor(depth.copy(), requires_grad=True)]
        self.assertLess(logits_distill_loss(student, [seg, depth]).item(),
                        1e-10)
        self.assertLess(connector_loss(student, [seg, depth],
                                       [1.0, 1.0]).item(), 1e-10)

        # Student frames are pushed with their soft coordinates, as in
        # training.
        feature = Tensor(self.rng.normal(size=(2, 3, 6, 6)),
                         requires_grad=True)
        connector = TrajectoryBuffer(window=2, K=3, source=SOURCE_CONNECTOR)
        studentBuf = TrajectoryBuffer(window=2, K=3)
        for i in range(3):
            push_frame(connector, connector_points(feature.detach(), 3),
                       iteration=i)
            coords, points = soft_points(attention_map(feature), 3)
            push_frame(studentBuf, points, coords, iteration=i)
        loss = trajectory_loss(connector, studentBuf)
        self.assertLess(loss.item(), 1e-10)
        backward(loss, [feature])
        npt.assert_array_equal(feature.grad, 0.0)


if __name__ == '__main__':
    unittest.main()
