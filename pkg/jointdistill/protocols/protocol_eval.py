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
import logging
import os

from jointdistill.config import ExperimentConfig
from jointdistill.constants import (TASK_SEG, MIOU, PIX_ACC, ABS_ERR,
                                    REL_ERR, SPLITS, REPORT_CSV)
from jointdistill.convert import loadModel, ReportWriter
from jointdistill.errors import ConfigError
from jointdistill.metrics import MetricReport, SegMetric, DepthMetric

from .protocol_base import ProtocolBase

logger = logging.getLogger(__name__)


def model_report(model, sceneSet, nClasses, name=None, batchSize=16):
    """ Eval-mode report over a whole split: mIoU and PixAcc for a
    segmentation head, AbsErr and RelErr for a depth head, in head order.
    """
    heads = getattr(model, 'heads', None) or [model.head]
    outputs = model.predict(sceneSet.images, batchSize)
    report = MetricReport(name=name)
    for head, pred in zip(heads, outputs):
        if head.kind == TASK_SEG:
            metric = SegMetric(nClasses)
            metric.addBatch(pred.argmax(axis=1), sceneSet.seg)
            report.add(MIOU, metric.miou(), True)
            report.add(PIX_ACC, metric.pixelAcc(), True)
        else:
            metric = DepthMetric()
            metric.addBatch(pred[:, 0], sceneSet.depth)
            absErr, relErr = metric.errors()
            report.add(ABS_ERR, absErr, False)
            report.add(REL_ERR, relErr, False)
    return report


class ProtEvaluate(ProtocolBase):
    """ Evaluate a teacher or student checkpoint on one split. The scenes
    are regenerated from the configuration stored in the checkpoint,
    unless another configuration is given.
    """
    _label = 'eval'

    def __init__(self, checkpoint, split, out=None, config=None, **kwargs):
        workingDir = os.path.dirname(os.path.abspath(out)) if out else \
            os.getcwd()
        ProtocolBase.__init__(self, config, workingDir, **kwargs)
        self.checkpoint = checkpoint
        self.split = split
        self.out = out

    def _createFilenameTemplates(self):
        self._updateFilenamesDict({'report_csv': REPORT_CSV})

    def _insertAllSteps(self):
        self._insertFunctionStep('convertInputStep')
        self._insertFunctionStep('evaluateStep')
        if self.out:
            self._insertFunctionStep('createOutputStep')

    # -------------------------- STEPS functions ------------------------------
    def convertInputStep(self):
        self.model, extra = loadModel(self.checkpoint)
        if self.config is None:
            if 'config' not in extra:
                raise ConfigError('config', "%s stores no configuration, "
                                  "give one explicitly" % self.checkpoint)
            self.config = ExperimentConfig.fromDict(extra['config'])
        self.name = extra.get('mode') or \
            os.path.splitext(os.path.basename(self.checkpoint))[0]

    def evaluateStep(self):
        self.report = model_report(self.model, self._getSplit(self.split),
                                   self.config.n_classes, self.name)
        self._defineOutputs(report=self.report)

    def createOutputStep(self):
        writer = ReportWriter()
        writer.writeJson(self.out, self.report)
        writer.writeCsv(self._getFileName('report_csv'), self.report)

    # -------------------------- INFO functions -------------------------------
    def _validate(self):
        errors = []
        if self.split not in SPLITS:
            errors.append("unknown split %r (one of %s)"
                          % (self.split, ', '.join(SPLITS)))
        return errors

    def _summary(self):
        return ["%s on %s: %s" % (self.name, self.split, ', '.join(
            '%s=%.6f' % (c.name, c.value) for c in self.report.criteria))]


def run_eval(checkpoint, split, out=None, config=None):
    """ Returns the MetricReport of checkpoint on split; written as JSON
    to out when given.
    """
    return ProtEvaluate(checkpoint, split, out, config).run()['report']
