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
jointdistill: adaptive multi-teacher distillation of a multi-task student
(semantic segmentation + depth) on procedurally generated scenes.
"""
import os

from .constants import JOINTDISTILL_HOME, JOINTDISTILL_WORKERS

__version__ = '1.0.0'


class Plugin:
    _homeVar = JOINTDISTILL_HOME
    _defaults = {JOINTDISTILL_HOME: 'jointdistill-runs',
                 JOINTDISTILL_WORKERS: '1'}

    @classmethod
    def getVar(cls, varName, default=None):
        """ Value of an environment variable, else the package default. """
        value = os.environ.get(varName)
        if value:
            return value
        return cls._defaults.get(varName, default)

    @classmethod
    def getHome(cls, *paths):
        """ Return a path from the "home" of the package, the default root
        of the run directories. """
        return os.path.join(cls.getVar(cls._homeVar), *paths)

    @classmethod
    def getWorkers(cls, configured=1):
        """ Scene generation workers; the environment variable overrides
        the configured value. """
        value = os.environ.get(JOINTDISTILL_WORKERS)
        if not value:
            return configured
        try:
            return max(1, int(value))
        except ValueError:
            return configured
