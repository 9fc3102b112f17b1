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
Feedback controller of the per-task dynamic weights omega.

At every validation tick the student is scored on each task, the score is
turned into a feedback ratio against the teacher's reference score, and
omega takes one SGD-with-momentum step on |omega - target|, where
target = mean(omega) * (a / mean(a)) ** alpha is held constant.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .constants import (HIGHER_BETTER, LOWER_BETTER, TASK_SEG, TASK_DEPTH,
                        MIOU, REL_ERR)
from .errors import ControllerError
from .metrics import SegMetric, DepthMetric
from .tensor import SgdState, sgd_momentum_step, DTYPE

logger = logging.getLogger(__name__)

SCORE_CLAMP = (0.05, 20.0)
OMEGA_CLAMP = (1e-3, 1e3)
DEAD_BAND = 1e-12


@dataclass
class TaskScoreSpec:
    task: str
    criterion: str
    kind: str
    clamp: tuple = SCORE_CLAMP

    def __post_init__(self):
        low, high = self.clamp
        if not 0 < low < high:
            raise ControllerError("invalid clamp bounds %s for task %s"
                                  % (self.clamp, self.task))
        if self.kind not in (HIGHER_BETTER, LOWER_BETTER):
            raise ControllerError("unknown criterion kind %r" % self.kind)

    @property
    def higherBetter(self):
        return self.kind == HIGHER_BETTER


def default_score_specs(clamp=SCORE_CLAMP):
    """ mIoU for segmentation, RelErr for depth. """
    return [TaskScoreSpec(TASK_SEG, MIOU, HIGHER_BETTER, tuple(clamp)),
            TaskScoreSpec(TASK_DEPTH, REL_ERR, LOWER_BETTER, tuple(clamp))]


@dataclass
class FeedbackState:
    omega: np.ndarray
    velocity: np.ndarray
    r_teacher0: np.ndarray
    a_latest: np.ndarray
    alpha: float = 1.5
    beta: float = 0.001
    momentum: float = 0.1
    omega_clamp: tuple = OMEGA_CLAMP

    def __post_init__(self):
        n = len(self.omega)
        for name in ('velocity', 'r_teacher0', 'a_latest'):
            if len(getattr(self, name)) != n:
                raise ControllerError("%s has %d entries, expected %d"
                                      % (name, len(getattr(self, name)), n))
        if np.any(np.asarray(self.omega) <= 0):
            raise ControllerError("omega must stay positive: %s"
                                  % list(self.omega))

    @classmethod
    def initial(cls, r_teacher0, alpha=1.5, beta=0.001, momentum=0.1,
                omega_clamp=OMEGA_CLAMP):
        """ omega starts at 1 for every task. """
        n = len(r_teacher0)
        return cls(np.ones(n, dtype=DTYPE), np.zeros(n, dtype=DTYPE),
                   np.asarray(r_teacher0, dtype=DTYPE),
                   np.ones(n, dtype=DTYPE), alpha, beta, momentum,
                   tuple(omega_clamp))

    def copy(self):
        return FeedbackState(self.omega.copy(), self.velocity.copy(),
                             self.r_teacher0.copy(), self.a_latest.copy(),
                             self.alpha, self.beta, self.momentum,
                             tuple(self.omega_clamp))

    def toDict(self):
        return {'omega': self.omega.tolist(),
                'velocity': self.velocity.tolist(),
                'r_teacher0': self.r_teacher0.tolist(),
                'a_latest': self.a_latest.tolist(),
                'alpha': self.alpha, 'beta': self.beta,
                'momentum': self.momentum,
                'omega_clamp': list(self.omega_clamp)}

    @classmethod
    def fromDict(cls, d):
        return cls(np.asarray(d['omega'], dtype=DTYPE),
                   np.asarray(d['velocity'], dtype=DTYPE),
                   np.asarray(d['r_teacher0'], dtype=DTYPE),
                   np.asarray(d['a_latest'], dtype=DTYPE),
                   d['alpha'], d['beta'], d['momentum'],
                   tuple(d['omega_clamp']))


# ------------------------- scoring -------------------------------------------
def score_predictions(pred, valSet, spec, nClasses):
    """ Criterion value of raw head outputs over the whole split. """
    if spec.task == TASK_SEG:
        metric = SegMetric(nClasses)
        metric.addBatch(pred.argmax(axis=1), valSet.seg)
        return metric.miou() if spec.criterion == MIOU else metric.pixelAcc()
    metric = DepthMetric()
    metric.addBatch(pred[:, 0], valSet.depth)
    absErr, relErr = metric.errors()
    return relErr if spec.criterion == REL_ERR else absErr


def score_model(model, spec, valSet, headIndex=0, batchSize=16):
    if valSet is None or len(valSet) == 0:
        raise ControllerError("validation set is empty")
    outputs = model.predict(valSet.images, batchSize)
    nClasses = model.heads[0].n_classes if hasattr(model, 'heads') \
        else model.head.n_classes
    return score_predictions(outputs[headIndex], valSet, spec, nClasses)


def score_teacher_baseline(teacher, task, val_set, batchSize=16):
    """ Reference score r_T0 of a pretrained teacher, eval mode. """
    r = score_model(teacher, task, val_set, 0, batchSize)
    logger.info("teacher %s baseline %s = %.6f", task.task, task.criterion, r)
    return r


def feedback_score(r_student, r_teacher0, spec):
    """ r_S / r_T0 for higher-is-better criteria, r_T0 / r_S otherwise,
    clamped to spec.clamp.
    """
    if r_teacher0 <= 0:
        raise ControllerError("teacher reference score must be positive, "
                              "got %r" % r_teacher0)
    if spec.higherBetter:
        a = r_student / r_teacher0
    else:
        if r_student <= 0:
            raise ControllerError("student %s must be positive, got %r"
                                  % (spec.criterion, r_student))
        a = r_teacher0 / r_student
    low, high = spec.clamp
    return float(min(max(a, low), high))


def weight_targets(omega, a, alpha):
    return np.mean(omega) * (a / np.mean(a)) ** alpha


def update_weights(state, a):
    """ One controller step; returns a new state. """
    a = np.asarray(a, dtype=DTYPE)
    if a.shape != state.omega.shape:
        raise ControllerError("got %d feedback scores for %d tasks"
                              % (len(a), len(state.omega)))
    new = state.copy()
    target = weight_targets(state.omega, a, state.alpha)
    diff = state.omega - target
    band = DEAD_BAND * np.maximum(1.0, np.abs(state.omega))
    g = np.where(np.abs(diff) <= band, 0.0, np.sign(diff))
    sgd = SgdState(new.velocity, state.beta, state.momentum)
    sgd_momentum_step(new.omega, state.omega * g, sgd)
    new.velocity = sgd.velocity
    low, high = state.omega_clamp
    np.clip(new.omega, low, high, out=new.omega)
    new.a_latest = a.copy()
    return new


@dataclass
class TickResult:
    iteration: int
    r: list
    a: list
    omega: list = field(default_factory=list)

    def asRow(self):
        return [self.iteration] + list(self.r) + list(self.a) + \
            list(self.omega)


def validation_tick(student, tasks, val_set, state, iteration=0,
                    adapt=True, batchSize=16, log=None):
    """ Score the student on every task, derive the feedback scores and
    (if adapt) update omega. log, when given, receives the TickResult.
    """
    if val_set is None or len(val_set) == 0:
        raise ControllerError("validation set is empty")
    outputs = student.predict(val_set.images, batchSize)
    nClasses = student.heads[0].n_classes
    r = [score_predictions(outputs[i], val_set, spec, nClasses)
         for i, spec in enumerate(tasks)]
    a = [feedback_score(ri, r0, spec)
         for ri, r0, spec in zip(r, state.r_teacher0, tasks)]
    if adapt:
        state = update_weights(state, a)
    else:
        state = state.copy()
        state.a_latest = np.asarray(a, dtype=DTYPE)
    result = TickResult(iteration, r, a, state.omega.tolist())
    logger.info("Validation [%d]  r: %s  a: %s  omega: %s", iteration,
                ' '.join('%.6f' % v for v in r),
                ' '.join('%.4f' % v for v in a),
                ' '.join('%.6f' % v for v in state.omega))
    if log is not None:
        log(result)
    return r, a, state
