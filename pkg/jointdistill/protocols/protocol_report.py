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

from jointdistill.constants import (CRITERIA, MODES, MODE_NAIVE, TASKS,
                                    SUMMARY_FILE)
from jointdistill.convert import ReaderBase, WriterBase, CsvLogWriter
from jointdistill.errors import ConfigError, ManifestError
from jointdistill.metrics import MetricReport

from .protocol_base import ProtocolBase

logger = logging.getLogger(__name__)


def compare_runs(report, baseline_report):
    """ Copy of report carrying its delta_mtl against baseline_report. """
    return report.withBaseline(baseline_report)


def ablation_table(reports, baseline, teachers=()):
    """ Rows of the ablation table: the teachers' own single-task rows
    (no delta) followed by one row per report with its delta against
    baseline.
    """
    rows = [MetricReport(list(t.criteria), name=t.name) for t in teachers]
    rows += [compare_runs(r, baseline) for r in reports]
    return rows


def format_table(rows, columns=None):
    """ Plain-text table, one line per row; blank cells for the criteria
    a row does not have.
    """
    columns = columns or [name for name, _ in CRITERIA]
    width = max([len(r.name or '') for r in rows] + [12])
    header = '%-*s' % (width, 'method') + ''.join(
        '%12s' % c for c in columns) + '%12s' % 'delta_mtl'
    lines = [header, '-' * len(header)]
    for r in rows:
        names = r.names()
        cells = ['%12.4f' % r.value(c) if c in names else '%12s' % ''
                 for c in columns]
        delta = '%+11.2f%%' % r.delta_mtl if r.delta_mtl is not None \
            else '%12s' % ''
        lines.append('%-*s' % (width, r.name or '') + ''.join(cells) + delta)
    return '\n'.join(lines)


class ProtReport(ProtocolBase):
    """ Collect the test reports of several distillation runs into the
    ablation table, with the delta against the naive_mtl run.
    """
    _label = 'report'

    def __init__(self, runDirs, out, baselineMode=MODE_NAIVE, **kwargs):
        ProtocolBase.__init__(self, None, os.path.dirname(
            os.path.abspath(out)), **kwargs)
        self.runDirs = list(runDirs)
        self.out = out
        self.baselineMode = baselineMode

    def _createFilenameTemplates(self):
        root = os.path.splitext(os.path.basename(self.out))[0]
        self._updateFilenamesDict({'table_csv': root + '.csv',
                                   'table_txt': root + '.txt'})

    def _insertAllSteps(self):
        self._insertFunctionStep('convertInputStep')
        self._insertFunctionStep('compareStep')
        self._insertFunctionStep('createOutputStep')

    # -------------------------- STEPS functions ------------------------------
    def convertInputStep(self):
        self.summaries = [self._readSummary(d) for d in self.runDirs]
        # Known modes first, in their canonical order.
        order = {m: i for i, m in enumerate(MODES)}
        self.summaries.sort(key=lambda s: (order.get(s['mode'], len(MODES)),
                                           s['mode']))

    def compareStep(self):
        reports = [MetricReport.fromDict(s['test']) for s in self.summaries]
        for s, r in zip(self.summaries, reports):
            r.name = s['mode']
        baselines = [r for r in reports if r.name == self.baselineMode]
        if not baselines:
            raise ConfigError('runs', "no %s run to compare against"
                              % self.baselineMode)
        saved = self.summaries[0].get('teachers') or {}
        teachers = [MetricReport.fromDict(saved[task]) for task in TASKS
                    if task in saved]
        self.rows = ablation_table(reports, baselines[0], teachers)
        self._defineOutputs(rows=self.rows)

    def createOutputStep(self):
        table = format_table(self.rows)
        writer = WriterBase()
        writer._writeJson(self.out, {'baseline': self.baselineMode,
                                     'rows': [r.toDict() for r in self.rows]})
        writer._writeBytes(self._getFileName('table_txt'),
                           (table + '\n').encode('utf-8'))
        columns = [name for name, _ in CRITERIA]
        with CsvLogWriter(self._getFileName('table_csv'),
                          ['name'] + columns + ['delta_mtl']) as log:
            for r in self.rows:
                names = r.names()
                log([r.name] + [r.value(c) if c in names else ''
                                for c in columns]
                    + ['' if r.delta_mtl is None else r.delta_mtl])
        self._defineOutputs(table=table)

    # -------------------------- INFO functions -------------------------------
    def _validate(self):
        if not self.runDirs:
            return ["no run directories given"]
        return []

    def _summary(self):
        return self.outputs['table'].split('\n')

    # -------------------------- UTILS functions ------------------------------
    def _readSummary(self, runDir):
        path = os.path.join(runDir, SUMMARY_FILE)
        try:
            summary = ReaderBase()._readJson(path)
        except (OSError, ValueError) as ex:
            raise ManifestError(path, "unreadable run summary (%s)" % ex)
        for key in ('mode', 'test'):
            if key not in summary:
                raise ManifestError(path, "run summary has no '%s'" % key)
        return summary


def run_report(runDirs, out, baselineMode=MODE_NAIVE):
    """ Write the ablation table of runDirs to out (JSON, plus .txt and
    .csv next to it); returns its rows.
    """
    return ProtReport(runDirs, out, baselineMode).run()['rows']
