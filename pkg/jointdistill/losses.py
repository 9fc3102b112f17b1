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
Loss terms of the distillation recipe.

Task losses: cross-entropy (segmentation) and L1 (depth). Distillation
losses compare the learner's logits with detached targets: a per-pixel
KL(softmax(learner) || softmax(target)) for segmentation and a mean
absolute difference for the depth maps. No temperature is used.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import TASK_SEG, TASKS
from .errors import ShapeError, LabelError, LossTermError, ControllerError
from .tensor import Tensor, log_softmax, softmax, DTYPE

logger = logging.getLogger(__name__)


def _kinds(heads):
    return [h if isinstance(h, str) else h.kind for h in heads]


def _checkSame(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(op, 'shape', a.shape, b.shape)


# ------------------------- task losses ---------------------------------------
def task_loss_segmentation(logits, labels):
    """ Mean per-pixel cross-entropy of NCHW logits against an NHW map. """
    labels = np.asarray(labels)
    n, c, h, w = logits.shape
    if labels.shape != (n, h, w):
        raise ShapeError('task_loss_segmentation', 'labels', (n, h, w),
                         labels.shape)
    bad = (labels < 0) | (labels >= c)
    if bad.any():
        pixel = np.argwhere(bad)[0]
        raise LabelError(pixel, labels[tuple(pixel)], c)
    oneHot = np.eye(c, dtype=DTYPE)[labels.astype(np.int64)]
    oneHot = oneHot.transpose(0, 3, 1, 2)
    return -(log_softmax(logits, axis=1) * oneHot).sum(axis=1).mean()


def task_loss_depth(pred, gt):
    """ Mean absolute error; gt may be NHW or N1HW. """
    gt = np.asarray(gt, dtype=DTYPE)
    if gt.ndim == 3 and pred.ndim == 4 and pred.shape[1] == 1:
        gt = gt[:, None]
    if gt.shape != pred.shape:
        raise ShapeError('task_loss_depth', 'gt', pred.shape, gt.shape)
    return (pred - gt).abs().mean()


def task_losses(logits, targets, heads):
    """ One task loss per head; targets are the label / depth maps. """
    losses = []
    for p, target, kind in zip(logits, targets, _kinds(heads)):
        if kind == TASK_SEG:
            losses.append(task_loss_segmentation(p, target))
        else:
            losses.append(task_loss_depth(p, target))
    return losses


# ------------------------- distillation --------------------------------------
def kl_divergence(learner, target):
    """ Mean over pixels of KL(softmax(learner) || softmax(target)) along
    the channel axis. target is used as a constant.
    """
    _checkSame('kl_divergence', learner, target)
    targetData = target.data if isinstance(target, Tensor) else \
        np.asarray(target, dtype=DTYPE)
    logQ = log_softmax(Tensor(targetData), axis=1).data
    logP = log_softmax(learner, axis=1)
    return (softmax(learner, axis=1) * (logP - logQ)).sum(axis=1).mean()


def l1_distance(learner, target):
    _checkSame('l1_distance', learner, target)
    targetData = target.data if isinstance(target, Tensor) else \
        np.asarray(target, dtype=DTYPE)
    return (learner - targetData).abs().mean()


def distill_term(learner, target, kind):
    if kind == TASK_SEG:
        return kl_divergence(learner, target)
    return l1_distance(learner, target)


def logits_distill_terms(student_logits, connector_logits, heads):
    if len(student_logits) != len(connector_logits):
        raise ShapeError('logits_distill_loss', 'n_tasks',
                         len(connector_logits), len(student_logits))
    return [distill_term(s, f.detach() if isinstance(f, Tensor) else f, kind)
            for s, f, kind in zip(student_logits, connector_logits,
                                  _kinds(heads))]


def logits_distill_loss(student_logits, connector_logits, heads=TASKS):
    """ Sum over tasks of the student-vs-connector distillation terms; the
    connector logits receive no gradient.
    """
    terms = logits_distill_terms(student_logits, connector_logits, heads)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def connector_loss(connector_logits, teacher_logits, omega, heads=TASKS):
    """ sum_i omega_i * D_i(connector_i || teacher_i), teachers detached. """
    omega = np.asarray(omega, dtype=DTYPE)
    if omega.shape != (len(connector_logits),):
        raise ShapeError('connector_loss', 'omega', (len(connector_logits),),
                         omega.shape)
    if np.any(omega <= 0) or not np.all(np.isfinite(omega)):
        raise ControllerError("dynamic weights must be positive, got %s"
                              % omega.tolist())
    terms = [distill_term(f, t.detach() if isinstance(t, Tensor) else t, kind)
             for f, t, kind in zip(connector_logits, teacher_logits,
                                   _kinds(heads))]
    total = terms[0] * float(omega[0])
    for w, term in zip(omega[1:], terms[1:]):
        total = total + term * float(w)
    return total


# ------------------------- composites ----------------------------------------
@dataclass
class LossBreakdown:
    """ Values of the student objective at one iteration. """
    task: list
    logits: float
    traj: float
    total: float
    lam: float
    tensor: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def asRow(self, iteration):
        taskSeg = self.task[0] if len(self.task) > 0 else 0.0
        taskDepth = self.task[1] if len(self.task) > 1 else 0.0
        return [iteration, taskSeg, taskDepth, self.logits, self.traj,
                self.total]

    def __str__(self):
        return "task=%s logits=%r traj=%r lam=%r total=%r" % (
            [float(t) for t in self.task], self.logits, self.traj,
            self.lam, self.total)


def _value(term):
    if term is None:
        return 0.0
    return term.item() if isinstance(term, Tensor) else float(term)


def _checkFinite(breakdown, names):
    """ Raise LossTermError (carrying the breakdown) on the first
    non-finite term.
    """
    values = [('task_%s' % n, v) for n, v in zip(names, breakdown.task)]
    values += [('logits', breakdown.logits), ('traj', breakdown.traj),
               ('lambda', breakdown.lam), ('total', breakdown.total)]
    for name, value in values:
        if not np.isfinite(value):
            err = LossTermError(name, value)
            err.breakdown = breakdown
            raise err


def student_total_loss(task_losses, logits_loss, traj_loss, lam,
                       names=TASKS):
    """ total = sum(task) + logits + lam * traj. Terms may be Tensors or
    plain floats (None counts as 0); the returned breakdown keeps the
    differentiable total in .tensor.
    """
    taskValues = [_value(t) for t in task_losses]
    logitsValue = _value(logits_loss)
    trajValue = _value(traj_loss)
    value = sum(taskValues) + logitsValue + lam * trajValue
    breakdown = LossBreakdown(taskValues, logitsValue, trajValue,
                              float(value), float(lam))
    _checkFinite(breakdown, names)

    total = Tensor(0.0)
    for t in task_losses:
        total = total + t
    if logits_loss is not None:
        total = total + logits_loss
    if traj_loss is not None:
        total = total + lam * traj_loss
    breakdown.tensor = total
    return breakdown


def static_baseline_loss(task_losses, kd_losses, omega):
    """ sum_i task_i + omega_i * kd_i with fixed weights. """
    total = Tensor(0.0)
    for t in task_losses:
        total = total + t
    for w, kd in zip(omega, kd_losses):
        total = total + float(w) * kd
    return total


def static_breakdown(task_losses, kd_losses, omega, names=TASKS):
    """ LossBreakdown of the fixed-weight objective; the weighted KD sum
    is reported in the logits column.
    """
    taskValues = [_value(t) for t in task_losses]
    kdValue = sum(float(w) * _value(kd) for w, kd in zip(omega, kd_losses))
    breakdown = LossBreakdown(taskValues, kdValue, 0.0,
                              sum(taskValues) + kdValue, 0.0)
    _checkFinite(breakdown, names)
    breakdown.tensor = static_baseline_loss(task_losses, kd_losses, omega)
    breakdown.total = breakdown.tensor.item()
    return breakdown
