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
Evaluation criteria (mIoU, pixel accuracy, absolute and relative depth
error) and the multi-task improvement score delta_mtl.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.metrics import confusion_matrix

from .constants import CRITERIA
from .errors import (ShapeError, LabelError, CriterionMismatchError,
                     JointDistillError)

logger = logging.getLogger(__name__)


def _checkLabels(labels, nClasses):
    bad = (labels < 0) | (labels >= nClasses)
    if bad.any():
        pixel = np.argwhere(bad)[0]
        raise LabelError(pixel, labels[tuple(pixel)], nClasses)


def seg_confusion(pred, gt, nClasses):
    """ Confusion matrix, rows = ground truth, columns = prediction. """
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError('seg_confusion', 'pred', gt.shape, pred.shape)
    _checkLabels(gt, nClasses)
    _checkLabels(pred, nClasses)
    return confusion_matrix(gt.ravel(), pred.ravel(),
                            labels=np.arange(nClasses)).astype(np.int64)


def miou_from_confusion(cm):
    inter = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - np.diag(cm)
    present = union > 0
    if not present.any():
        raise JointDistillError("mIoU of an empty label map")
    return float(np.mean(inter[present] / union[present]))


def miou(pred, gt, C):
    """ Mean IoU over the classes present in pred or gt. """
    return miou_from_confusion(seg_confusion(pred, gt, C))


def pixel_acc(pred, gt):
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError('pixel_acc', 'pred', gt.shape, pred.shape)
    if gt.size == 0:
        raise JointDistillError("pixel accuracy of an empty label map")
    return float(np.count_nonzero(pred == gt)) / gt.size


def depth_errors(pred, gt):
    """ (mean |pred - gt|, mean |pred - gt| / gt) """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError('depth_errors', 'pred', gt.shape, pred.shape)
    if np.any(gt <= 0):
        pixel = tuple(int(i) for i in np.argwhere(gt <= 0)[0])
        raise JointDistillError("non-positive ground-truth depth %r at "
                                "pixel %s" % (float(gt[pixel]), pixel))
    diff = np.abs(pred - gt)
    return float(diff.mean()), float((diff / gt).mean())


class SegMetric(object):
    """ Accumulates the confusion matrix of a whole split. """

    def __init__(self, nClasses):
        self.nClasses = nClasses
        self.reset()

    def reset(self):
        self.confusion = np.zeros((self.nClasses, self.nClasses),
                                  dtype=np.int64)

    def addBatch(self, pred, gt):
        self.confusion += seg_confusion(pred, gt, self.nClasses)

    def miou(self):
        return miou_from_confusion(self.confusion)

    def pixelAcc(self):
        return float(np.diag(self.confusion).sum()) / self.confusion.sum()


class DepthMetric(object):
    """ Accumulates absolute and relative depth errors over a split. """

    def __init__(self):
        self.reset()

    def reset(self):
        self.absSum = 0.0
        self.relSum = 0.0
        self.count = 0

    def addBatch(self, pred, gt):
        absErr, relErr = depth_errors(pred, gt)
        n = np.asarray(gt).size
        self.absSum += absErr * n
        self.relSum += relErr * n
        self.count += n

    def errors(self):
        return self.absSum / self.count, self.relSum / self.count


# ------------------------- reports -------------------------------------------
@dataclass
class Criterion:
    name: str
    value: float
    higher_better: bool


@dataclass
class MetricReport:
    criteria: list = field(default_factory=list)
    baseline: Optional[str] = None
    delta_mtl: Optional[float] = None
    name: Optional[str] = None

    def names(self):
        return [c.name for c in self.criteria]

    def value(self, name):
        for c in self.criteria:
            if c.name == name:
                return c.value
        raise KeyError(name)

    def add(self, name, value, higher_better):
        self.criteria.append(Criterion(name, float(value), bool(higher_better)))
        return self

    def withBaseline(self, baseline, baselineName=None):
        """ Copy of this report carrying delta_mtl against baseline. """
        return MetricReport([Criterion(c.name, c.value, c.higher_better)
                             for c in self.criteria],
                            baseline=baselineName or baseline.name,
                            delta_mtl=delta_mtl(self, baseline),
                            name=self.name)

    def toDict(self):
        d = {'criteria': [{'name': c.name, 'value': c.value,
                           'higher_better': c.higher_better}
                          for c in self.criteria],
             'delta_mtl': self.delta_mtl}
        if self.baseline is not None:
            d['baseline'] = self.baseline
        if self.name is not None:
            d['name'] = self.name
        return d

    @classmethod
    def fromDict(cls, d):
        return cls([Criterion(c['name'], float(c['value']),
                              bool(c['higher_better']))
                    for c in d['criteria']],
                   baseline=d.get('baseline'),
                   delta_mtl=d.get('delta_mtl'),
                   name=d.get('name'))

    @classmethod
    def fromValues(cls, values, name=None):
        """ Report from the four standard criteria, in CRITERIA order. """
        report = cls(name=name)
        for (crit, higher), v in zip(CRITERIA, values):
            report.add(crit, v, higher)
        return report


def delta_mtl(report, baseline):
    """ Average signed relative improvement, in percent.

    Each criterion contributes (report - baseline) / baseline, with the
    sign flipped for lower-is-better criteria; the mean runs over
    criteria, not tasks.
    """
    if report.names() != baseline.names():
        raise CriterionMismatchError(baseline.names(), report.names())
    total = 0.0
    for c, b in zip(report.criteria, baseline.criteria):
        if b.value == 0:
            raise JointDistillError("baseline criterion '%s' is zero"
                                    % b.name)
        sign = 1.0 if b.higher_better else -1.0
        total += sign * (c.value - b.value) / b.value
    return total / len(report.criteria) * 100.0


def full_report(segPred, segGt, depthPred, depthGt, nClasses, name=None):
    """ All four criteria for a split, in CRITERIA order. """
    cm = seg_confusion(segPred, segGt, nClasses)
    absErr, relErr = depth_errors(depthPred, depthGt)
    return MetricReport.fromValues(
        [miou_from_confusion(cm),
         float(np.diag(cm).sum()) / cm.sum(), absErr, relErr], name=name)
