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

from .protocol_base import ProtocolBase
from .protocol_data import ProtGenerateData, run_gen_data
from .protocol_pretrain import (ProtPretrainTeacher, run_pretrain_teacher,
                                run_pretrain_teachers, teacherPath)
from .protocol_distill import ProtDistill, run_distill
from .protocol_eval import ProtEvaluate, run_eval, model_report
from .protocol_report import (ProtReport, run_report, compare_runs,
                              ablation_table, format_table)
