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
from .convert_base import WriterBase, ReaderBase
from .convert import (CheckpointWriter, CheckpointReader, writeCheckpoint,
                      readCheckpoint, saveModel, loadModel, prefixed,
                      unprefixed, blobPath)
from .convert_utils import (CsvLogWriter, ReportWriter, DatasetWriter,
                            DatasetReader, readCsv, truncateCsv, writeReport,
                            readReport, formatValue, LOSS_HEADER,
                            CONTROLLER_HEADER, TRAJECTORY_HEADER,
                            TEACHER_HEADER)


def createWriter(kind='checkpoint', **kwargs):
    """ Create a new Writer instance for the given artifact kind. """
    writers = {'checkpoint': CheckpointWriter,
               'report': ReportWriter,
               'dataset': DatasetWriter}
    return writers[kind](**kwargs)


def createReader(kind='checkpoint', **kwargs):
    readers = {'checkpoint': CheckpointReader,
               'dataset': DatasetReader}
    return readers[kind](**kwargs)
