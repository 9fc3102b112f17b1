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
CSV logs, metric reports and dataset export.
"""
import csv
import logging
import os

import numpy as np

from jointdistill.constants import INDEX_FILE
from jointdistill.errors import ManifestError
from .convert_base import WriterBase, ReaderBase

logger = logging.getLogger(__name__)

LOSS_HEADER = ['iter', 'task_seg', 'task_depth', 'logits', 'traj', 'total']
CONTROLLER_HEADER = ['iter', 'r_seg', 'r_depth', 'a_seg', 'a_depth',
                     'omega_seg', 'omega_depth']
TRAJECTORY_HEADER = ['iter', 'source', 'rank', 'row', 'col', 'value']
TEACHER_HEADER = ['iter', 'loss']


def formatValue(value):
    """ Shortest text that reads back to the same float. """
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class CsvLogWriter(WriterBase):
    """ Append-only CSV log, flushed after every row. """

    def __init__(self, path, header, append=False, **kwargs):
        WriterBase.__init__(self, **kwargs)
        self.path = self._path(path)
        self.header = list(header)
        self._makeParent(self.path)
        resume = append and os.path.exists(self.path)
        self._file = open(self.path, 'a' if resume else 'w', newline='')
        self._writer = csv.writer(self._file, lineterminator='\n')
        if not resume:
            self._writer.writerow(self.header)
            self._file.flush()

    def writeRow(self, values):
        if len(values) != len(self.header):
            raise ValueError("row of %d values for %d columns"
                             % (len(values), len(self.header)))
        self._writer.writerow([formatValue(v) for v in values])
        self._file.flush()

    def __call__(self, values):
        self.writeRow(values)

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()


def readCsv(path):
    """ Returns (header, rows) with the cells as strings. """
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def truncateCsv(path, lastIter):
    """ Drop the rows logged after iteration lastIter (first column). """
    if not os.path.exists(path):
        return
    header, rows = readCsv(path)
    kept = [r for r in rows if int(r[0]) <= lastIter]
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(kept)


# ------------------------- metric reports ------------------------------------
class ReportWriter(WriterBase):

    def writeJson(self, path, report):
        return self._writeJson(path, report.toDict())

    def writeCsv(self, path, report, append=True):
        path = self._path(path)
        header = ['name', 'baseline'] + report.names() + ['delta_mtl']
        with CsvLogWriter(path, header, append=append) as writer:
            writer.writeRow([report.name or '', report.baseline or '']
                            + [c.value for c in report.criteria]
                            + ['' if report.delta_mtl is None
                               else report.delta_mtl])
        return path


def writeReport(path, report):
    return ReportWriter().writeJson(path, report)


def readReport(path):
    from jointdistill.metrics import MetricReport
    try:
        return MetricReport.fromDict(ReaderBase()._readJson(path))
    except (OSError, ValueError, KeyError, TypeError) as ex:
        raise ManifestError(path, "invalid metric report (%s)" % ex)


# ------------------------- dataset export ------------------------------------
class DatasetWriter(WriterBase):
    """ One directory per split: per-scene little-endian f64 image and depth
    files, a uint8 label map and an index listing seeds and shapes.
    """

    def writeSplit(self, sceneSet, splitDir, nClasses):
        splitDir = self._path(splitDir)
        os.makedirs(splitDir, exist_ok=True)
        files = []
        for i, seed in enumerate(sceneSet.seeds):
            names = {'image': 'image_%06d.f64' % seed,
                     'depth': 'depth_%06d.f64' % seed,
                     'seg': 'seg_%06d.u8' % seed}
            self._writeBytes(os.path.join(splitDir, names['image']),
                             sceneSet.images[i].astype('<f8').tobytes())
            self._writeBytes(os.path.join(splitDir, names['depth']),
                             sceneSet.depth[i].astype('<f8').tobytes())
            self._writeBytes(os.path.join(splitDir, names['seg']),
                             sceneSet.seg[i].astype(np.uint8).tobytes())
            files.append(names)
        index = {'split': sceneSet.name,
                 'seeds': [int(s) for s in sceneSet.seeds],
                 'image_shape': list(sceneSet.images.shape[1:]),
                 'map_shape': list(sceneSet.seg.shape[1:]),
                 'n_classes': int(nClasses),
                 'files': files}
        self._writeJson(os.path.join(splitDir, INDEX_FILE), index)
        logger.info("exported %d scenes to %s", len(files), splitDir)
        return splitDir


class DatasetReader(ReaderBase):

    def readSplit(self, splitDir):
        from jointdistill.synthdata import SceneSet
        indexPath = os.path.join(self._path(splitDir), INDEX_FILE)
        try:
            index = self._readJson(indexPath)
        except (OSError, ValueError) as ex:
            raise ManifestError(indexPath, "unreadable index (%s)" % ex)
        imgShape = tuple(index['image_shape'])
        mapShape = tuple(index['map_shape'])
        images, seg, depth = [], [], []
        for names in index['files']:
            images.append(self._load(splitDir, names['image'], '<f8',
                                     imgShape, indexPath))
            depth.append(self._load(splitDir, names['depth'], '<f8',
                                    mapShape, indexPath))
            seg.append(self._load(splitDir, names['seg'], np.uint8,
                                  mapShape, indexPath).astype(np.int64))
        return SceneSet(np.array(index['seeds'], dtype=np.int64),
                        np.stack(images).astype(np.float64), np.stack(seg),
                        np.stack(depth).astype(np.float64), index['split'])

    def _load(self, splitDir, fn, dtype, shape, indexPath):
        path = os.path.join(self._path(splitDir), fn)
        data = np.fromfile(path, dtype=dtype)
        if data.size != int(np.prod(shape)):
            raise ManifestError(indexPath, "%s holds %d values, expected %s"
                                % (fn, data.size, list(shape)))
        return data.reshape(shape)
