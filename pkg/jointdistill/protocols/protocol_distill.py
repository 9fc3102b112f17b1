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
Joint distillation of the multi-task student.

Each iteration runs the frozen teachers, steps the connector towards the
teachers with the current dynamic weights, records the essential points of
both the connector and the student, and steps the student. Every val_every
iterations the controller scores the student on the validation split and
updates the weights. The ablation modes switch parts of this off.
"""
import logging
import os
from collections import OrderedDict

import numpy as np

from jointdistill.config import ExperimentConfig
from jointdistill.constants import (TASKS, SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST,
                                    MODE_NAIVE, MODE_STATIC, MODE_NO_TRAJ,
                                    MODE_NO_ADAPT, SOURCE_CONNECTOR,
                                    SOURCE_STUDENT, SUMMARY_FILE, TIMING_FILE,
                                    LOSS_CSV, CONTROLLER_CSV, TRAJECTORY_CSV,
                                    REPORT_FILE, CHECKPOINT_DIR,
                                    LAST_CHECKPOINT, STUDENT_NAME,
                                    MANIFEST_EXT, TEACHER_PREFIX)
from jointdistill.convert import (CsvLogWriter, WriterBase, writeCheckpoint,
                                  readCheckpoint, saveModel, loadModel,
                                  prefixed, unprefixed, truncateCsv,
                                  writeReport, LOSS_HEADER, CONTROLLER_HEADER,
                                  TRAJECTORY_HEADER)
from jointdistill.errors import (JointDistillError, ConfigError,
                                 ManifestError, ShapeError, LossTermError,
                                 NumericalAbort, TrajectoryError)
from jointdistill.feedback import (FeedbackState, default_score_specs,
                                   score_teacher_baseline, validation_tick)
from jointdistill.losses import (task_losses, distill_term, connector_loss,
                                 logits_distill_loss, student_total_loss,
                                 static_breakdown)
from jointdistill.models import (Teacher, default_heads, build_student,
                                 build_connector)
from jointdistill.synthdata import batch_indices
from jointdistill.tensor import SGD, backward, no_grad
from jointdistill.trajectory import (TrajectoryBuffer, attention_map,
                                     extract_essential_points,
                                     soft_points, push_frame,
                                     trajectory_loss, connector_points)

from .protocol_base import ProtocolBase, STREAM_DISTILL
from .protocol_eval import model_report
from .protocol_pretrain import teacherPath

logger = logging.getLogger(__name__)

# Settings that may change between a run and its resumption.
RESUMABLE_KEYS = ('distill_steps', 'log_every', 'checkpoint_every',
                  'data_workers', 'dump_trajectory')


class ProtDistill(ProtocolBase):
    """ Distil the pretrained teachers into the multi-task student.

    Modes:
        naive_mtl: task losses only.
        static_kd: every head distilled from its own teacher with the fixed
            weights static_omega; no connector.
        jointdistill: connector, trajectory loss and adaptive weights.
        jointdistill_no_traj: as jointdistill with lambda = 0.
        jointdistill_no_adapt: as jointdistill with the weights frozen at 1.
    """
    _label = 'distill'

    def __init__(self, config, workingDir, teachersDir, resume=False,
                 plot=False, **kwargs):
        ProtocolBase.__init__(self, config, workingDir, **kwargs)
        self.teachersDir = teachersDir
        self.resume = resume
        self.plot = plot
        self.mode = config.mode

    def _createFilenameTemplates(self):
        ProtocolBase._createFilenameTemplates(self)
        self._updateFilenamesDict({
            'summary': SUMMARY_FILE,
            'timing': TIMING_FILE,
            'loss': LOSS_CSV,
            'controller': CONTROLLER_CSV,
            'trajectory': TRAJECTORY_CSV,
            'report': REPORT_FILE,
            'student': STUDENT_NAME + MANIFEST_EXT,
            'checkpoint': os.path.join(CHECKPOINT_DIR,
                                       LAST_CHECKPOINT + MANIFEST_EXT),
            'loss_plot': 'loss.png',
            'omega_plot': 'omega.png',
            'attention_plot': 'attention.png'})

    def _insertAllSteps(self):
        self._insertFunctionStep('convertInputStep')
        self._insertFunctionStep('distillStep')
        self._insertFunctionStep('evaluateStep')
        self._insertFunctionStep('createOutputStep')

    # -------------------------- mode switches --------------------------------
    def _usesConnector(self):
        return self.mode not in (MODE_NAIVE, MODE_STATIC)

    def _usesTrajectory(self):
        return self._usesConnector() and self.mode != MODE_NO_TRAJ

    def _adapts(self):
        return self.mode != MODE_NO_ADAPT

    # -------------------------- STEPS functions ------------------------------
    def convertInputStep(self):
        cfg = self.config
        self._echoConfig()
        self.train = self._getSplit(SPLIT_TRAIN)
        self.val = self._getSplit(SPLIT_VAL)
        self.heads = default_heads(len(TASKS), cfg.n_classes)
        self.scoreSpecs = default_score_specs(cfg.score_clamp)

        self.teachers = [self._loadTeacher(task) for task in TASKS]
        self._teacherState = [t.stateDict() for t in self.teachers]
        r0 = [score_teacher_baseline(t, spec, self.val)
              for t, spec in zip(self.teachers, self.scoreSpecs)]

        self.student = build_student(len(TASKS), cfg.student_seed,
                                     cfg.n_classes, cfg.student_widths,
                                     self.heads)
        self.studentOpt = SGD(self.student.params, cfg.lr, cfg.net_momentum)
        self.connector = None
        if self._usesConnector():
            self.connector = build_connector(
                [t.featureWidth for t in self.teachers], len(TASKS),
                cfg.connector_seed, cfg.n_classes, cfg.connector_widths,
                self.heads)
            self.connectorOpt = SGD(self.connector.params, cfg.connector_lr,
                                    cfg.net_momentum)

        self.feedback = FeedbackState.initial(
            r0, cfg.alpha, cfg.controller_lr, cfg.controller_momentum,
            cfg.omega_clamp)
        self.J_F = TrajectoryBuffer(cfg.window, cfg.top_k, SOURCE_CONNECTOR)
        self.J_S = TrajectoryBuffer(cfg.window, cfg.top_k, SOURCE_STUDENT)
        self.firstIter = 1
        self.lastBreakdown = None

        if self.resume and os.path.exists(self._getFileName('checkpoint')):
            self._restoreCheckpoint(self._getFileName('checkpoint'))

    def distillStep(self):
        cfg = self.config
        total = cfg.distill_steps
        append = self.firstIter > 1
        self._lossLog = CsvLogWriter(self._getFileName('loss'), LOSS_HEADER,
                                     append=append)
        self._controllerLog = None
        self._trajectoryLog = None
        if self._usesConnector():
            self._controllerLog = CsvLogWriter(
                self._getFileName('controller'), CONTROLLER_HEADER,
                append=append)
        if cfg.dump_trajectory and self._usesTrajectory():
            self._trajectoryLog = CsvLogWriter(
                self._getFileName('trajectory'), TRAJECTORY_HEADER,
                append=append)

        try:
            if self._controllerLog is not None and not append:
                # Scores of the untrained student; omega starts at 1.
                self._validationTick(0, adapt=False)
            for it in range(self.firstIter, total + 1):
                breakdown = self._distillIteration(it)
                self.lastBreakdown = breakdown
                if self._isLogIter(it, total):
                    self._lossLog(breakdown.asRow(it))
                    self._logProgress(it, total, breakdown.total)
                    self._logTrajectories(it)
                if self._controllerLog is not None and \
                        it % cfg.val_every == 0:
                    self._validationTick(it, adapt=self._adapts())
                if it % cfg.checkpoint_every == 0 or it == total:
                    self._saveCheckpoint(it)
        finally:
            for log in (self._lossLog, self._controllerLog,
                        self._trajectoryLog):
                if log is not None:
                    log.close()

    def evaluateStep(self):
        cfg = self.config
        for task, teacher, state in zip(TASKS, self.teachers,
                                        self._teacherState):
            current = teacher.stateDict()
            for name, value in state.items():
                if not np.array_equal(value, current[name]):
                    raise JointDistillError("teacher %s changed during "
                                            "distillation (%s)" % (task, name))
        test = self._getSplit(SPLIT_TEST)
        self.report = model_report(self.student, test, cfg.n_classes,
                                   self.mode)
        self.teacherReports = OrderedDict(
            (task, model_report(t, test, cfg.n_classes, TEACHER_PREFIX % task))
            for task, t in zip(TASKS, self.teachers))

    def createOutputStep(self):
        cfg = self.config
        extra = {'mode': self.mode, 'iterations': cfg.distill_steps,
                 'config': cfg.toDict()}
        student = saveModel(self._getFileName('student'), self.student, extra)
        writeReport(self._getFileName('report'), self.report)

        summary = {'mode': self.mode,
                   'iterations': cfg.distill_steps,
                   'config': cfg.toDict(),
                   'test': self.report.toDict(),
                   'teachers': {task: r.toDict()
                                for task, r in self.teacherReports.items()},
                   'r_teacher0': self.feedback.r_teacher0.tolist(),
                   'omega': self.feedback.omega.tolist()
                   if self._usesConnector() else None,
                   'n_parameters': {
                       'student': self.student.nParameters(),
                       'connector': self.connector.nParameters()
                       if self.connector is not None else 0}}
        WriterBase()._writeJson(self._getFileName('summary'), summary)
        self._defineOutputs(student=student, report=self.report,
                            summary=self._getFileName('summary'))

        if self.plot:
            from jointdistill.viewers import JointDistillPlotter
            plotter = JointDistillPlotter()
            plotter.plotLossScreening(self._getFileName('loss'),
                                      self._getFileName('loss_plot'))
            if self._usesConnector():
                plotter.plotOmegaTrace(self._getFileName('controller'),
                                       self._getFileName('omega_plot'))
            if self._usesTrajectory():
                images = self._getSplit(SPLIT_TEST).images[:cfg.batch_size]
                with no_grad():
                    feature, _ = self.student.forward(images)
                attn = attention_map(feature, SOURCE_STUDENT)
                plotter.plotAttention(
                    attn, extract_essential_points(attn, cfg.top_k),
                    self._getFileName('attention_plot'))

    # -------------------------- INFO functions -------------------------------
    def _validate(self):
        errors = []
        for task in TASKS:
            if not os.path.exists(teacherPath(self.teachersDir, task)):
                errors.append("missing teacher checkpoint %s"
                              % teacherPath(self.teachersDir, task))
        return errors

    def _summary(self):
        summary = ["%s: %d iterations, test %s" % (
            self.mode, self.config.distill_steps, ', '.join(
                '%s=%.6f' % (c.name, c.value) for c in self.report.criteria))]
        if self._usesConnector():
            summary.append("final omega: %s" % ' '.join(
                '%.6f' % w for w in self.feedback.omega))
        return summary

    # -------------------------- UTILS functions ------------------------------
    def _loadTeacher(self, task):
        path = teacherPath(self.teachersDir, task)
        teacher, extra = loadModel(path)
        if not isinstance(teacher, Teacher) or teacher.head.kind != task:
            raise ManifestError(path, "not a %s teacher" % task)
        if teacher.head.n_classes != self.config.n_classes:
            raise ManifestError(path, "teacher predicts %d classes, config "
                                "has %d" % (teacher.head.n_classes,
                                            self.config.n_classes))
        return teacher.freeze()

    def _distillIteration(self, it):
        cfg = self.config
        idx = batch_indices(len(self.train), cfg.batch_size, cfg.base_seed,
                            it, STREAM_DISTILL)
        images, seg, depth = self.train.batch(idx)

        teacherFeatures = teacherLogits = None
        if self.mode != MODE_NAIVE:
            with no_grad():
                outputs = [t.forward(images, training=False)
                           for t in self.teachers]
            teacherFeatures = [f for f, _ in outputs]
            teacherLogits = [p[0] for _, p in outputs]

        connectorLogits = None
        if self.connector is not None:
            connectorLogits = self._connectorStep(it, teacherFeatures,
                                                  teacherLogits)

        self.studentOpt.zeroGrad()
        feature, logits = self.student.forward(images, training=True)
        tasks = task_losses(logits, [seg, depth], self.heads)
        try:
            if self.mode == MODE_NAIVE:
                breakdown = student_total_loss(tasks, None, None, 0.0)
            elif self.mode == MODE_STATIC:
                kds = [distill_term(s, t, h.kind) for s, t, h
                       in zip(logits, teacherLogits, self.heads)]
                breakdown = static_breakdown(tasks, kds, cfg.static_omega)
            else:
                logitsLoss = logits_distill_loss(logits, connectorLogits,
                                                 self.heads)
                trajLoss = None
                lam = 0.0
                if self._usesTrajectory():
                    trajLoss = self._studentTrajectoryLoss(it, feature)
                    lam = cfg.lam
                breakdown = student_total_loss(tasks, logitsLoss, trajLoss,
                                               lam)
        except LossTermError as ex:
            raise NumericalAbort(it, ex.breakdown, phase='student')

        backward(breakdown.tensor, self.student.parameters())
        self.studentOpt.step()
        return breakdown

    def _connectorStep(self, it, teacherFeatures, teacherLogits):
        """ One connector update; returns its (detached) logits from before
        the update, the targets of the student.
        """
        self.connectorOpt.zeroGrad()
        fused, logits = self.connector.forward(teacherFeatures, training=True)
        loss = connector_loss(logits, teacherLogits, self.feedback.omega,
                              self.heads)
        value = loss.item()
        if not np.isfinite(value):
            raise NumericalAbort(it, 'connector=%r omega=%s'
                                 % (value, self.feedback.omega.tolist()),
                                 phase='connector')
        if self._usesTrajectory():
            push_frame(self.J_F, connector_points(fused.detach(),
                                                  self.config.top_k),
                       iteration=it)
        targets = [p.detach() for p in logits]
        backward(loss, self.connector.parameters())
        self.connectorOpt.step()
        return targets

    def _studentTrajectoryLoss(self, it, feature):
        cfg = self.config
        coords, points = soft_points(attention_map(feature, SOURCE_STUDENT),
                                     cfg.top_k, cfg.gamma)
        push_frame(self.J_S, points, coords, iteration=it)
        return trajectory_loss(self.J_F, self.J_S)

    def _validationTick(self, it, adapt):
        def log(result):
            self._controllerLog(result.asRow())
        _, _, self.feedback = validation_tick(
            self.student, self.scoreSpecs, self.val, self.feedback, it,
            adapt=adapt, log=log)

    def _logTrajectories(self, it):
        if not self._usesTrajectory():
            return
        for buf in (self.J_F, self.J_S):
            if len(buf) > buf.window:
                raise TrajectoryError("%s trajectory holds %d frames, window "
                                      "is %d" % (buf.source, len(buf),
                                                 buf.window))
        logger.debug("trajectory frames: connector %d, student %d "
                     "(window %d)", len(self.J_F), len(self.J_S),
                     self.J_F.window)
        if self._trajectoryLog is not None:
            for buf in (self.J_F, self.J_S):
                for p in buf.frames[-1].points:
                    self._trajectoryLog([it, buf.source, p.rank, p.row,
                                         p.col, p.value])

    # -------------------------- checkpoints ----------------------------------
    def _saveCheckpoint(self, it):
        """ Everything needed to continue the run: networks, BN buffers,
        optimizer velocities, controller state and both trajectories.
        """
        arrays = OrderedDict()
        arrays.update(prefixed('student', self.student.stateDict()))
        arrays.update(prefixed('student_velocity',
                               self.studentOpt.stateDict()))
        identity = {'student': self.student.identity()}
        if self.connector is not None:
            arrays.update(prefixed('connector', self.connector.stateDict()))
            arrays.update(prefixed('connector_velocity',
                                   self.connectorOpt.stateDict()))
            identity['connector'] = self.connector.identity()
        extra = {'iteration': it, 'mode': self.mode,
                 'config': self.config.toDict(),
                 'feedback': self.feedback.toDict(),
                 'J_F': self.J_F.toDict(), 'J_S': self.J_S.toDict()}
        path = writeCheckpoint(self._getFileName('checkpoint'), arrays,
                               identity, extra)
        logger.debug("checkpoint at iteration %d: %s", it, path)
        return path

    def _restoreCheckpoint(self, path):
        arrays, _, extra = readCheckpoint(path)
        try:
            saved = ExperimentConfig.fromDict(extra['config'])
            iteration = int(extra['iteration'])
        except (KeyError, TypeError, ValueError, ConfigError) as ex:
            raise ManifestError(path, "not a distillation checkpoint (%s)"
                                % ex)
        if self._resumeKey(saved) != self._resumeKey(self.config):
            raise ConfigError('resume', "%s was written with a different "
                              "configuration" % path)
        try:
            self.student.loadStateDict(unprefixed('student', arrays))
            self.studentOpt.loadStateDict(unprefixed('student_velocity',
                                                     arrays))
            if self.connector is not None:
                self.connector.loadStateDict(unprefixed('connector', arrays))
                self.connectorOpt.loadStateDict(
                    unprefixed('connector_velocity', arrays))
            self.feedback = FeedbackState.fromDict(extra['feedback'])
            self.J_F = TrajectoryBuffer.fromDict(extra['J_F'])
            self.J_S = TrajectoryBuffer.fromDict(extra['J_S'])
        except KeyError as ex:
            raise ManifestError(path, "missing entry %s" % ex)
        except ShapeError as ex:
            raise ManifestError(path, str(ex))

        self.firstIter = iteration + 1
        for key in ('loss', 'controller', 'trajectory'):
            truncateCsv(self._getFileName(key), iteration)
        logger.info("resuming %s from iteration %d", self.mode, iteration)

    def _resumeKey(self, config):
        d = config.toDict()
        for key in RESUMABLE_KEYS:
            d.pop(key)
        return d


def run_distill(config, teachersDir, outDir, resume=False, plot=False):
    """ Returns the outputs of the run: student checkpoint, test report
    and summary path.
    """
    return ProtDistill(config, outDir, teachersDir, resume, plot).run()
