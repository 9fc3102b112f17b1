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
Command line of the distillation lab:

    jointdistill gen-data --config cfg.json --out data/
    jointdistill pretrain-teacher --task seg --config cfg.json --out teachers/
    jointdistill distill --mode jointdistill --config cfg.json \
        --teachers teachers/ --out runs/jointdistill
    jointdistill eval --checkpoint runs/jointdistill/student.json \
        --split test --out report.json
    jointdistill delta-mtl --report a.json --baseline b.json
    jointdistill report --runs runs/* --out ablation.json
"""
import argparse
import logging
import sys

from . import Plugin, __version__
from .config import ExperimentConfig
from .constants import (TASKS, MODES, SPLITS, SPLIT_TEST, EXIT_OK,
                        EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERICAL)
from .convert import readReport
from .errors import JointDistillError, ConfigError, NumericalAbort
from . import protocols


LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _loadConfig(args, **changes):
    config = ExperimentConfig.load(args.config) if args.config \
        else ExperimentConfig()
    return config.replace(**changes) if changes else config


def cmdGenData(args):
    outDir = args.out or Plugin.getHome('data')
    for split, path in protocols.run_gen_data(_loadConfig(args),
                                              outDir).items():
        print('%s: %s' % (split, path))


def cmdPretrainTeacher(args):
    outDir = args.out or Plugin.getHome('teachers')
    outputs = protocols.run_pretrain_teacher(_loadConfig(args), outDir,
                                             args.task, plot=args.plot)
    print('%s (r_teacher0 = %r)' % (outputs['teacher'],
                                    outputs['r_teacher0']))


def cmdDistill(args):
    config = _loadConfig(args, mode=args.mode) if args.mode \
        else _loadConfig(args)
    outDir = args.out or Plugin.getHome(config.mode)
    teachersDir = args.teachers or Plugin.getHome('teachers')
    outputs = protocols.run_distill(config, teachersDir, outDir,
                                    resume=args.resume, plot=args.plot)
    print(outputs['summary'])


def cmdEval(args):
    config = ExperimentConfig.load(args.config) if args.config else None
    report = protocols.run_eval(args.checkpoint, args.split, args.out, config)
    for c in report.criteria:
        print('%-8s %r' % (c.name, c.value))


def cmdDeltaMtl(args):
    result = protocols.compare_runs(readReport(args.report),
                                    readReport(args.baseline))
    print('%+.2f' % result.delta_mtl)


def cmdReport(args):
    rows = protocols.run_report(args.runs, args.out, args.baseline)
    print(protocols.format_table(rows))


def getParser():
    parser = argparse.ArgumentParser(
        prog='jointdistill',
        description="Adaptive multi-teacher distillation lab.")
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="More logging (-v info, -vv debug).")
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('gen-data', help="Generate and export the scenes.")
    p.add_argument('--config', help="JSON configuration file.")
    p.add_argument('--out', help="Output directory.")
    p.set_defaults(func=cmdGenData)

    p = sub.add_parser('pretrain-teacher', help="Train one teacher.")
    p.add_argument('--task', required=True, choices=TASKS)
    p.add_argument('--config', help="JSON configuration file.")
    p.add_argument('--out', help="Teachers directory.")
    p.add_argument('--plot', action='store_true',
                   help="Also plot the loss curve.")
    p.set_defaults(func=cmdPretrainTeacher)

    p = sub.add_parser('distill', help="Distil the teachers into the "
                                       "multi-task student.")
    p.add_argument('--mode', choices=MODES,
                   help="Overrides the mode of the configuration.")
    p.add_argument('--config', help="JSON configuration file.")
    p.add_argument('--teachers', help="Directory with both teachers.")
    p.add_argument('--out', help="Run directory.")
    p.add_argument('--resume', action='store_true',
                   help="Continue from the last checkpoint of the run.")
    p.add_argument('--plot', action='store_true',
                   help="Also plot losses, weights and attention.")
    p.set_defaults(func=cmdDistill)

    p = sub.add_parser('eval', help="Evaluate a checkpoint on one split.")
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--split', choices=SPLITS, default=SPLIT_TEST)
    p.add_argument('--out', help="Report JSON to write.")
    p.add_argument('--config', help="Configuration to use instead of the "
                                    "one stored in the checkpoint.")
    p.set_defaults(func=cmdEval)

    p = sub.add_parser('delta-mtl', help="Delta of a report against a "
                                         "baseline report, in percent.")
    p.add_argument('--report', required=True)
    p.add_argument('--baseline', required=True)
    p.set_defaults(func=cmdDeltaMtl)

    p = sub.add_parser('report', help="Ablation table of several runs.")
    p.add_argument('--runs', required=True, nargs='+')
    p.add_argument('--out', required=True, help="Table JSON to write.")
    p.add_argument('--baseline', default=MODES[0],
                   help="Mode of the baseline run (default %(default)s).")
    p.set_defaults(func=cmdReport)
    return parser


def main(argv=None):
    args = getParser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][
        min(args.verbose, 2)]
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        args.func(args)
    except ConfigError as ex:
        print('error: %s' % ex, file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as ex:
        print('error: %s' % ex, file=sys.stderr)
        return EXIT_NUMERICAL
    except JointDistillError as ex:
        print('error: %s' % ex, file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK
