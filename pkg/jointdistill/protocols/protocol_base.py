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
import time
from collections import OrderedDict
from datetime import datetime

from jointdistill import Plugin
from jointdistill.constants import (CONFIG_FILE, SPLIT_TRAIN, SPLIT_VAL,
                                    SPLIT_TEST, SPLITS)
from jointdistill.convert import WriterBase
from jointdistill.errors import ConfigError
import jointdistill.synthdata as synth

logger = logging.getLogger(__name__)

# Independent batch streams, so every training loop draws its own batches.
STREAM_TEACHER = {'seg': 1, 'depth': 2}
STREAM_DISTILL = 3


class ProtocolBase(object):
    """ This class contains the common functions of the jointdistill
    protocols. A protocol runs an ordered list of steps inside its working
    directory and exposes what it produced through self.outputs.
    """
    _label = None

    def __init__(self, config, workingDir, **kwargs):
        self.config = config
        self.workingDir = workingDir
        self.outputs = OrderedDict()
        self._steps = []
        self._fnDict = {}
        self._timing = OrderedDict()
        self._splits = {}

    def _initialize(self):
        """ This function is mean to be called after the working dir for
        the protocol have been created.
        """
        self._createFilenameTemplates()
        self._createTemplates()

    def _createFilenameTemplates(self):
        """ Centralize how files are called. """
        self._updateFilenamesDict({'config': CONFIG_FILE})

    def _createTemplates(self):
        pass

    def _updateFilenamesDict(self, fnDict):
        self._fnDict.update(fnDict)

    def _getFileName(self, key, **kwargs):
        return self._getPath(self._fnDict[key] % kwargs)

    def _getPath(self, *paths):
        return os.path.join(self.workingDir, *paths)

    # -------------------------- INSERT steps functions -----------------------
    def _insertAllSteps(self):
        raise NotImplementedError

    def _insertFunctionStep(self, funcName, *args):
        self._steps.append((funcName, args))

    def run(self):
        errors = self._validate()
        if errors:
            raise ConfigError(self._label, '; '.join(errors))
        os.makedirs(self.workingDir, exist_ok=True)
        self._initialize()
        self._steps = []
        self._insertAllSteps()

        started = datetime.now()
        for funcName, args in self._steps:
            logger.debug("%s: %s%s", self._label, funcName, args)
            t0 = time.perf_counter()
            getattr(self, funcName)(*args)
            elapsed = time.perf_counter() - t0
            self._timing[funcName] = self._timing.get(funcName, 0.0) + elapsed
        if 'timing' in self._fnDict:
            self._writeTiming(started)
        for line in self._summary():
            logger.info(line)
        return self.outputs

    def _defineOutputs(self, **kwargs):
        self.outputs.update(kwargs)

    # -------------------------- INFO functions -------------------------------
    def _validate(self):
        return []

    def _summary(self):
        return []

    # -------------------------- UTILS functions ------------------------------
    def _echoConfig(self):
        return self.config.save(self._getFileName('config'))

    def _writeTiming(self, started):
        """ Wall-clock seconds per step; kept out of the summary so that
        the summary is byte-identical between reruns.
        """
        timing = {'label': self._label,
                  'started': started.isoformat(),
                  'finished': datetime.now().isoformat(),
                  'steps': dict(self._timing),
                  'total_seconds': sum(self._timing.values())}
        return WriterBase()._writeJson(self._getFileName('timing'), timing)

    def _getSplit(self, name):
        """ Scenes of one split, generated once from the configuration. """
        if name not in self._splits:
            if name not in SPLITS:
                raise ConfigError('split', "unknown split %r (one of %s)"
                                  % (name, ', '.join(SPLITS)))
            cfg = self.config
            seeds = dict(zip([SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST],
                             synth.make_splits(cfg.splitSpec, cfg.base_seed)))
            self._splits[name] = synth.generate_split(
                seeds[name], cfg.height, cfg.width, cfg.n_classes,
                workers=Plugin.getWorkers(cfg.data_workers), name=name)
        return self._splits[name]

    def _logProgress(self, iteration, total, loss):
        logger.info('Train: [{}/{} ({:.0f}%)]    \tLoss: {:.6f}'.format(
            iteration, total, 100. * iteration / total, loss))

    def _isLogIter(self, iteration, total):
        return iteration % self.config.log_every == 0 or iteration == total
