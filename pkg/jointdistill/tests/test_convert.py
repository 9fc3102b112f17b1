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
import json
import os
import shutil
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from jointdistill.constants import TASK_DEPTH
from jointdistill.convert import (writeCheckpoint, readCheckpoint, saveModel,
                                  loadModel, blobPath, prefixed, unprefixed,
                                  CsvLogWriter, readCsv, truncateCsv,
                                  writeReport, readReport, ReportWriter,
                                  createWriter, createReader, formatValue,
                                  LOSS_HEADER)
from jointdistill.errors import ManifestError
from jointdistill.metrics import MetricReport
from jointdistill.models import HeadSpec, build_teacher, build_student
from jointdistill.synthdata import generate_split


class TestBase(unittest.TestCase):
    def setUp(self):
        self.tmpDir = tempfile.mkdtemp(prefix='jointdistill-')

    def tearDown(self):
        shutil.rmtree(self.tmpDir)

    def path(self, *names):
        return os.path.join(self.tmpDir, *names)


class TestCheckpoint(TestBase):
    def testRoundTripIsBitExact(self):
        rng = np.random.default_rng(0)
        arrays = {'b': rng.normal(size=(3, 4)), 'a': np.array(np.pi),
                  'tiny': np.array([5e-324, -0.0, 1e308])}
        manifest = writeCheckpoint(self.path('ck.json'), arrays,
                                   identity={'kind': 'x'}, extra={'it': 3})
        self.assertTrue(os.path.exists(blobPath(manifest)))
        read, identity, extra = readCheckpoint(manifest)
        self.assertEqual(list(read), ['b', 'a', 'tiny'])
        for name, value in arrays.items():
            self.assertEqual(read[name].tobytes(), value.tobytes())
        self.assertEqual(identity, {'kind': 'x'})
        self.assertEqual(extra, {'it': 3})

    def testManifestLayout(self):
        manifest = writeCheckpoint(self.path('ck.json'),
                                   {'w': np.ones((2, 3)), 'v': np.zeros(4)})
        with open(manifest) as f:
            entries = json.load(f)['entries']
        self.assertEqual(entries[0], {'name': 'w', 'shape': [2, 3],
                                      'dtype': 'f64', 'byte_offset': 0,
                                      'byte_length': 48})
        self.assertEqual(entries[1]['byte_offset'], 48)
        self.assertEqual(os.path.getsize(blobPath(manifest)), 80)

    def testModelRoundTrip(self):
        teacher = build_teacher(HeadSpec(TASK_DEPTH), 4, widths=[3, 5])
        teacher(np.random.default_rng(1).uniform(size=(2, 3, 4, 4)),
                training=True)
        saveModel(self.path('teacher.json'), teacher, extra={'r': 0.2})
        clone, extra = loadModel(self.path('teacher.json'))
        self.assertEqual(clone.identity(), teacher.identity())
        self.assertEqual(extra, {'r': 0.2})
        for name, value in teacher.stateDict().items():
            npt.assert_array_equal(clone.stateDict()[name], value)

    def testCorruptManifests(self):
        manifest = saveModel(self.path('student.json'),
                             build_student(2, 0, widths=[2]))
        with open(manifest) as f:
            good = json.load(f)

        cases = []
        bad = json.loads(json.dumps(good))
        bad['entries'][0]['dtype'] = 'f32'
        cases.append(bad)
        bad = json.loads(json.dumps(good))
        bad['entries'][0]['byte_length'] += 8
        cases.append(bad)
        bad = json.loads(json.dumps(good))
        bad['entries'][-1]['byte_offset'] = good['blob_length']
        cases.append(bad)
        bad = json.loads(json.dumps(good))
        del bad['entries']
        cases.append(bad)
        bad = json.loads(json.dumps(good))
        bad['identity'] = {}
        cases.append(bad)
        bad = json.loads(json.dumps(good))
        bad['entries'] = bad['entries'][1:]
        cases.append(bad)

        for i, manifestDict in enumerate(cases):
            with self.subTest(case=i):
                with open(manifest, 'w') as f:
                    json.dump(manifestDict, f)
                with self.assertRaises(ManifestError):
                    loadModel(manifest)

        with open(manifest, 'w') as f:
            f.write('{not json')
        with self.assertRaises(ManifestError):
            loadModel(manifest)
        with self.assertRaises(ManifestError):
            loadModel(self.path('missing.json'))

    def testTruncatedBlob(self):
        manifest = writeCheckpoint(self.path('ck.json'), {'w': np.ones(4)})
        with open(blobPath(manifest), 'r+b') as f:
            f.truncate(16)
        with self.assertRaises(ManifestError):
            readCheckpoint(manifest)

    def testPrefixes(self):
        arrays = prefixed('student', {'a': 1, 'b': 2})
        arrays.update(prefixed('connector', {'a': 3}))
        self.assertEqual(list(arrays), ['student/a', 'student/b',
                                        'connector/a'])
        self.assertEqual(dict(unprefixed('connector', arrays)), {'a': 3})


class TestCsvLogs(TestBase):
    def testWriteAndTruncate(self):
        path = self.path('logs', 'loss.csv')
        with CsvLogWriter(path, LOSS_HEADER) as log:
            for it in range(1, 7):
                log([it, 0.1, 0.2, 0.3, 0.4, 1.0 / 3.0])
            with self.assertRaises(ValueError):
                log([1, 2])
        header, rows = readCsv(path)
        self.assertEqual(header, LOSS_HEADER)
        self.assertEqual(float(rows[0][5]), 1.0 / 3.0)

        truncateCsv(path, 4)
        with CsvLogWriter(path, LOSS_HEADER, append=True) as log:
            log([5, 0, 0, 0, 0, 0])
        _, rows = readCsv(path)
        self.assertEqual([r[0] for r in rows], ['1', '2', '3', '4', '5'])

    def testFormatValue(self):
        self.assertEqual(formatValue(np.float64(0.1)), '0.1')
        self.assertEqual(formatValue(np.int64(3)), '3')
        self.assertEqual(formatValue(True), 'True')
        self.assertEqual(formatValue('seg'), 'seg')


class TestReports(TestBase):
    def testJsonRoundTrip(self):
        report = MetricReport.fromValues([0.5, 0.8, 0.05, 0.1],
                                         name='student')
        report = report.withBaseline(MetricReport.fromValues(
            [0.4, 0.7, 0.06, 0.12], name='naive_mtl'))
        path = writeReport(self.path('report.json'), report)
        self.assertEqual(readReport(path), report)

        ReportWriter().writeCsv(self.path('report.csv'), report)
        ReportWriter().writeCsv(self.path('report.csv'), report)
        header, rows = readCsv(self.path('report.csv'))
        self.assertEqual(header[0], 'name')
        self.assertEqual(len(rows), 2)

    def testInvalidReport(self):
        with open(self.path('bad.json'), 'w') as f:
            json.dump({'criteria': [{'name': 'mIoU'}]}, f)
        with self.assertRaises(ManifestError):
            readReport(self.path('bad.json'))


class TestDatasetExport(TestBase):
    def testExportAndRead(self):
        split = generate_split([4, 2, 8], H=6, W=5, name='test')
        createWriter('dataset').writeSplit(split, self.path('test'), 4)
        with open(self.path('test', 'index.json')) as f:
            index = json.load(f)
        self.assertEqual(index['seeds'], [4, 2, 8])
        self.assertEqual(index['image_shape'], [3, 6, 5])
        self.assertEqual(os.path.getsize(
            self.path('test', index['files'][0]['image'])), 3 * 6 * 5 * 8)

        read = createReader('dataset').readSplit(self.path('test'))
        self.assertEqual(read.name, 'test')
        npt.assert_array_equal(read.seeds, split.seeds)
        npt.assert_array_equal(read.images, split.images)
        npt.assert_array_equal(read.seg, split.seg)
        npt.assert_array_equal(read.depth, split.depth)

    def testShortFile(self):
        split = generate_split([1], H=4, W=4, name='val')
        createWriter('dataset').writeSplit(split, self.path('val'), 4)
        with open(self.path('val', 'depth_000001.f64'), 'wb') as f:
            f.write(b'\0' * 8)
        with self.assertRaises(ManifestError):
            createReader('dataset').readSplit(self.path('val'))


if __name__ == '__main__':
    unittest.main()
