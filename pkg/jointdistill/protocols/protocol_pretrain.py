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

import numpy as np

from jointdistill.constants import (TASKS, TASK_SEG, TASK_DEPTH, SPLIT_TRAIN,
                                    SPLIT_VAL, TEACHER_PREFIX, MANIFEST_EXT)
from jointdistill.convert import CsvLogWriter, saveModel, TEACHER_HEADER
from jointdistill.errors import NumericalAbort
from jointdistill.feedback import (default_score_specs, score_model,
                                   score_predictions, score_teacher_baseline)
from jointdistill.losses import task_losses
from jointdistill.models import HeadSpec, build_teacher
from jointdistill.synthdata import batch_indices
from jointdistill.tensor import SGD, backward

from .protocol_base import ProtocolBase, STREAM_TEACHER

logger = logging.getLogger(__name__)

# Constant depth used as the trivial reference predictor.
CONSTANT_DEPTH = 0.5


def teacherPath(teachersDir, task):
    return os.path.join(teachersDir, TEACHER_PREFIX % task + MANIFEST_EXT)


class ProtPretrainTeacher(ProtocolBase):
    """ Train the single-task teacher of one task: cross-entropy for
    segmentation, L1 for depth. The final validation score is stored in
    the checkpoint as the teacher's reference score.
    """
    _label = 'pretrain-teacher'

    def __init__(self, config, workingDir, task, plot=False, **kwargs):
        ProtocolBase.__init__(self, config, workingDir, **kwargs)
        self.task = task
        self.plot = plot

    def _createFilenameTemplates(self):
        ProtocolBase._createFilenameTemplates(self)
        prefix = TEACHER_PREFIX % self.task
        self._updateFilenamesDict({
            'teacher': prefix + MANIFEST_EXT,
            'loss': prefix + '_loss.csv',
            'timing': prefix + '_timing.json',
            'plot': prefix + '_loss.png'})

    def _insertAllSteps(self):
        self._insertFunctionStep('convertInputStep')
        self._insertFunctionStep('trainTeacherStep')
        self._insertFunctionStep('scoreTeacherStep')
        self._insertFunctionStep('createOutputStep')

    # -------------------------- STEPS functions ------------------------------
    def convertInputStep(self):
        cfg = self.config
        self._echoConfig()
        self.head = HeadSpec(self.task, cfg.n_classes)
        self.scoreSpec = default_score_specs(cfg.score_clamp)[
            TASKS.index(self.task)]
        self.teacher = build_teacher(
            self.head, cfg.teacher_seed + TASKS.index(self.task),
            cfg.teacher_widths)
        val = self._getSplit(SPLIT_VAL)
        self.rUntrained = score_model(self.teacher, self.scoreSpec, val)
        self.rConstant = None
        if self.task == TASK_DEPTH:
            constant = np.full((len(val), 1) + val.depth.shape[1:],
                               CONSTANT_DEPTH)
            self.rConstant = score_predictions(constant, val, self.scoreSpec,
                                               cfg.n_classes)

    def trainTeacherStep(self):
        cfg = self.config
        train = self._getSplit(SPLIT_TRAIN)
        optimizer = SGD(self.teacher.params, cfg.lr, cfg.net_momentum)
        total = cfg.teacher_steps
        self.lossList = []

        with CsvLogWriter(self._getFileName('loss'), TEACHER_HEADER) as log:
            for it in range(1, total + 1):
                idx = batch_indices(len(train), cfg.batch_size, cfg.base_seed,
                                    it, STREAM_TEACHER[self.task])
                images, seg, depth = train.batch(idx)
                target = seg if self.task == TASK_SEG else depth

                optimizer.zeroGrad()
                _, logits = self.teacher.forward(images, training=True)
                loss = task_losses(logits, [target], [self.head])[0]
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericalAbort(it, 'task_%s=%r' % (self.task, value),
                                         phase='pretrain %s' % self.task)
                backward(loss, self.teacher.parameters())
                optimizer.step()

                if self._isLogIter(it, total):
                    log([it, value])
                    self.lossList.append((it, value))
                    self._logProgress(it, total, value)

    def scoreTeacherStep(self):
        self.rTeacher0 = score_teacher_baseline(
            self.teacher, self.scoreSpec, self._getSplit(SPLIT_VAL))

    def createOutputStep(self):
        cfg = self.config
        extra = {'task': self.task,
                 'criterion': self.scoreSpec.criterion,
                 'r_teacher0': self.rTeacher0,
                 'r_untrained': self.rUntrained,
                 'steps': cfg.teacher_steps,
                 'config': cfg.toDict()}
        if self.rConstant is not None:
            extra['r_constant'] = self.rConstant
        path = saveModel(self._getFileName('teacher'), self.teacher, extra)
        self._defineOutputs(teacher=path, r_teacher0=self.rTeacher0)
        if self.plot:
            from jointdistill.viewers import JointDistillPlotter
            JointDistillPlotter().plotLossScreening(
                self._getFileName('loss'), self._getFileName('plot'))

    # -------------------------- INFO functions -------------------------------
    def _validate(self):
        errors = []
        if self.task not in TASKS:
            errors.append("unknown task %r (one of %s)"
                          % (self.task, ', '.join(TASKS)))
        return errors

    def _summary(self):
        summary = ["teacher %s: %s %.6f (untrained %.6f)"
                   % (self.task, self.scoreSpec.criterion, self.rTeacher0,
                      self.rUntrained)]
        if self.rConstant is not None:
            summary.append("constant %.2f predictor: %s %.6f"
                           % (CONSTANT_DEPTH, self.scoreSpec.criterion,
                              self.rConstant))
        return summary


def run_pretrain_teacher(config, outDir, task, plot=False):
    return ProtPretrainTeacher(config, outDir, task, plot=plot).run()


def run_pretrain_teachers(config, outDir, plot=False):
    """ Train both teachers into outDir; returns {task: checkpoint path}. """
    return {task: run_pretrain_teacher(config, outDir, task, plot)['teacher']
            for task in TASKS}
