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

#------------------ Constants values --------------------------------------

# Architecture identity written into every checkpoint manifest
ARCH = 'jd-tiny-v1'
IN_CHANNELS = 3
DTYPE_NAME = 'f64'

# Task kinds
TASK_SEG = 'seg'
TASK_DEPTH = 'depth'
TASKS = [TASK_SEG, TASK_DEPTH]

# Criterion directions
HIGHER_BETTER = 'higher_better'
LOWER_BETTER = 'lower_better'

# Evaluation criteria
MIOU = 'mIoU'
PIX_ACC = 'PixAcc'
ABS_ERR = 'AbsErr'
REL_ERR = 'RelErr'
CRITERIA = [(MIOU, True), (PIX_ACC, True), (ABS_ERR, False),
            (REL_ERR, False)]

# Scene classes (0 is the background)
CLASS_BACKGROUND = 0
CLASS_CIRCLE = 1
CLASS_RECT = 2
CLASS_TRIANGLE = 3
N_CLASSES = 4

# Distillation modes
MODE_NAIVE = 'naive_mtl'
MODE_STATIC = 'static_kd'
MODE_JOINT = 'jointdistill'
MODE_NO_TRAJ = 'jointdistill_no_traj'
MODE_NO_ADAPT = 'jointdistill_no_adapt'
MODES = [MODE_NAIVE, MODE_STATIC, MODE_JOINT, MODE_NO_TRAJ, MODE_NO_ADAPT]

# Trajectory sources
SOURCE_CONNECTOR = 'connector'
SOURCE_STUDENT = 'student'

# Default widths
TEACHER_WIDTHS = [32, 32, 32]
STUDENT_WIDTHS = [16, 16, 16]
CONNECTOR_WIDTHS = [32, 32]

# Splits
SPLIT_TRAIN = 'train'
SPLIT_VAL = 'val'
SPLIT_TEST = 'test'
SPLITS = [SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST]

# Packages constants
JOINTDISTILL_HOME = 'JOINTDISTILL_HOME'
JOINTDISTILL_WORKERS = 'JOINTDISTILL_WORKERS'

# Run artifacts
CONFIG_FILE = 'config.json'
SUMMARY_FILE = 'summary.json'
TIMING_FILE = 'timing.json'
LOSS_CSV = 'loss.csv'
CONTROLLER_CSV = 'controller.csv'
TRAJECTORY_CSV = 'trajectory.csv'
REPORT_FILE = 'report.json'
REPORT_CSV = 'report.csv'
CHECKPOINT_DIR = 'checkpoints'
LAST_CHECKPOINT = 'last'
TEACHER_PREFIX = 'teacher_%s'
STUDENT_NAME = 'student'
MANIFEST_EXT = '.json'
BLOB_EXT = '.bin'
INDEX_FILE = 'index.json'

# Exit codes of the command line
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
