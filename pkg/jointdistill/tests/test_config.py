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
from unittest import mock

from jointdistill import Plugin
from jointdistill.config import ExperimentConfig, smoke_config
from jointdistill.constants import (MODE_JOINT, MODE_STATIC,
                                    JOINTDISTILL_HOME, JOINTDISTILL_WORKERS)
from jointdistill.errors import ConfigError


class TestExperimentConfig(unittest.TestCase):
    def setUp(self):
        self.tmpDir = tempfile.mkdtemp(prefix='jointdistill-')

    def tearDown(self):
        shutil.rmtree(self.tmpDir)

    def testDefaults(self):
        config = ExperimentConfig()
        self.assertEqual((config.alpha, config.lam, config.top_k,
                          config.window, config.gamma),
                         (1.5, 1.0, 10, 10, 50.0))
        self.assertEqual((config.controller_lr, config.controller_momentum),
                         (0.001, 0.1))
        self.assertEqual(config.val_every, 50)
        self.assertEqual(config.mode, MODE_JOINT)
        spec = config.splitSpec
        self.assertEqual((spec.n_train, spec.n_val, spec.n_test),
                         (512, 96, 128))

    def testUnknownKey(self):
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig.fromDict({'lr': 0.1, 'learning_rate': 0.1})
        self.assertEqual(ctx.exception.key, 'learning_rate')

    def testTypeErrors(self):
        for key, value in [('height', 3.5), ('height', True), ('lr', 'fast'),
                           ('mode', 3), ('dump_trajectory', 1),
                           ('student_widths', []),
                           ('student_widths', [4, 0])]:
            with self.subTest(key=key, value=value):
                with self.assertRaises(ConfigError) as ctx:
                    ExperimentConfig.fromDict({key: value})
                self.assertEqual(ctx.exception.key, key)
        self.assertEqual(ExperimentConfig.fromDict({'lr': 1}).lr, 1.0)

    def testRangeErrors(self):
        for changes in [{'distill_steps': 0}, {'mode': 'mystery'},
                        {'connector_widths': [8]}, {'gamma': 0.0},
                        {'net_momentum': 1.0}, {'top_k': 2000},
                        {'static_omega': [1.0]},
                        {'omega_clamp': [2.0, 1.0]}, {'teacher_seed': -1}]:
            with self.subTest(changes=changes):
                with self.assertRaises(ConfigError):
                    ExperimentConfig.fromDict(changes)

    def testSaveAndLoad(self):
        config = smoke_config(mode=MODE_STATIC, static_omega=[0.5, 2.0])
        path = config.save(os.path.join(self.tmpDir, 'config.json'))
        self.assertEqual(ExperimentConfig.load(path), config)
        with open(path) as f:
            self.assertEqual(set(json.load(f)), set(config.toDict()))

    def testLoadErrors(self):
        path = os.path.join(self.tmpDir, 'bad.json')
        with open(path, 'w') as f:
            f.write('[1, 2]')
        with self.assertRaises(ConfigError):
            ExperimentConfig.load(path)
        with open(path, 'w') as f:
            f.write('{')
        with self.assertRaises(ConfigError):
            ExperimentConfig.load(path)
        with self.assertRaises(ConfigError):
            ExperimentConfig.load(os.path.join(self.tmpDir, 'missing.json'))

    def testReplace(self):
        config = smoke_config()
        longer = config.replace(distill_steps=40)
        self.assertEqual(longer.distill_steps, 40)
        self.assertEqual(config.distill_steps, 20)
        with self.assertRaises(ConfigError):
            config.replace(unknown=1)


class TestPlugin(unittest.TestCase):
    def testHome(self):
        with mock.patch.dict(os.environ, {JOINTDISTILL_HOME: '/tmp/jd'}):
            self.assertEqual(Plugin.getHome('teachers'),
                             os.path.join('/tmp/jd', 'teachers'))
        with mock.patch.dict(os.environ, {JOINTDISTILL_HOME: ''}):
            self.assertEqual(Plugin.getHome(), 'jointdistill-runs')

    def testWorkers(self):
        for value, expected in [('', 3), ('4', 4), ('0', 1), ('many', 3)]:
            with mock.patch.dict(os.environ, {JOINTDISTILL_WORKERS: value}):
                self.assertEqual(Plugin.getWorkers(3), expected)


if __name__ == '__main__':
    unittest.main()
