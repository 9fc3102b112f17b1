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

from jointdistill.constants import SPLITS
from jointdistill.convert import DatasetWriter

from .protocol_base import ProtocolBase

logger = logging.getLogger(__name__)


class ProtGenerateData(ProtocolBase):
    """ Generate the synthetic scenes of every split and export them, one
    directory per split.
    """
    _label = 'gen-data'

    def _insertAllSteps(self):
        self._insertFunctionStep('convertInputStep')
        for split in SPLITS:
            self._insertFunctionStep('exportSplitStep', split)

    # -------------------------- STEPS functions ------------------------------
    def convertInputStep(self):
        self._echoConfig()

    def exportSplitStep(self, split):
        sceneSet = self._getSplit(split)
        writer = DatasetWriter(outputDir=self.workingDir)
        self._defineOutputs(**{split: writer.writeSplit(
            sceneSet, split, self.config.n_classes)})

    def _summary(self):
        return ["%s: %d scenes" % (split, len(self._splits[split]))
                for split in SPLITS if split in self._splits]


def run_gen_data(config, outDir):
    """ Export train/val/test under outDir; returns {split: directory}. """
    return ProtGenerateData(config, outDir).run()
