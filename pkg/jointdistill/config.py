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
Experiment configuration: a flat JSON object with exactly the fields of
ExperimentConfig. Unknown keys, wrong types and out-of-range values are
reported as ConfigError.
"""
import json
import logging
from dataclasses import dataclass, field, fields, asdict

from .constants import (MODES, MODE_JOINT, TEACHER_WIDTHS, STUDENT_WIDTHS,
                        CONNECTOR_WIDTHS, N_CLASSES)
from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    # dataset
    height: int = 32
    width: int = 32
    n_classes: int = N_CLASSES
    n_train: int = 512
    n_val: int = 96
    n_test: int = 128
    base_seed: int = 0
    # model seeds and widths
    teacher_seed: int = 1
    student_seed: int = 2
    connector_seed: int = 3
    teacher_widths: list = field(default_factory=lambda: list(TEACHER_WIDTHS))
    student_widths: list = field(default_factory=lambda: list(STUDENT_WIDTHS))
    connector_widths: list = field(
        default_factory=lambda: list(CONNECTOR_WIDTHS))
    # optimization
    lr: float = 0.01
    connector_lr: float = 0.001
    net_momentum: float = 0.9
    controller_lr: float = 0.001
    controller_momentum: float = 0.1
    alpha: float = 1.5
    lam: float = 1.0
    # trajectories
    top_k: int = 10
    window: int = 10
    gamma: float = 50.0
    # schedule
    val_every: int = 50
    teacher_steps: int = 2000
    distill_steps: int = 2000
    batch_size: int = 8
    mode: str = MODE_JOINT
    static_omega: list = field(default_factory=lambda: [1.0, 1.0])
    score_clamp: list = field(default_factory=lambda: [0.05, 20.0])
    omega_clamp: list = field(default_factory=lambda: [1e-3, 1e3])
    # bookkeeping
    log_every: int = 20
    checkpoint_every: int = 500
    data_workers: int = 1
    dump_trajectory: bool = False

    def __post_init__(self):
        self.validate()

    # ------------------------- validation ------------------------------------
    def validate(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f.name, "expected an integer, got %r"
                                      % (value,))
            elif f.type is float:
                if isinstance(value, bool) or \
                        not isinstance(value, (int, float)):
                    raise ConfigError(f.name, "expected a number, got %r"
                                      % (value,))
                setattr(self, f.name, float(value))
            elif f.type is bool:
                if not isinstance(value, bool):
                    raise ConfigError(f.name, "expected true/false, got %r"
                                      % (value,))
            elif f.type is str:
                if not isinstance(value, str):
                    raise ConfigError(f.name, "expected a string, got %r"
                                      % (value,))
            elif f.type is list:
                if not isinstance(value, list) or not value:
                    raise ConfigError(f.name, "expected a non-empty list, "
                                              "got %r" % (value,))

        for name in ('height', 'width', 'n_train', 'n_val', 'n_test',
                     'top_k', 'window', 'val_every', 'teacher_steps',
                     'distill_steps', 'batch_size', 'log_every',
                     'checkpoint_every', 'data_workers'):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.n_classes < 2:
            raise ConfigError('n_classes', "must be >= 2")
        for name in ('base_seed', 'teacher_seed', 'student_seed',
                     'connector_seed'):
            if getattr(self, name) < 0:
                raise ConfigError(name, "seeds must be >= 0")
        for name in ('teacher_widths', 'student_widths', 'connector_widths'):
            value = getattr(self, name)
            if any(isinstance(w, bool) or not isinstance(w, int) or w < 1
                   for w in value):
                raise ConfigError(name, "widths must be integers >= 1")
        if len(self.connector_widths) != 2:
            raise ConfigError('connector_widths', "exactly 2 blocks")
        for name in ('lr', 'connector_lr', 'controller_lr', 'gamma'):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be > 0")
        for name in ('net_momentum', 'controller_momentum'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(name, "must be in [0, 1)")
        if self.alpha < 0 or self.lam < 0:
            raise ConfigError('alpha' if self.alpha < 0 else 'lam',
                              "must be >= 0")
        if self.mode not in MODES:
            raise ConfigError('mode', "unknown mode %r (one of %s)"
                              % (self.mode, ', '.join(MODES)))
        if self.top_k > self.height * self.width:
            raise ConfigError('top_k', "larger than the number of pixels")
        if len(self.static_omega) != 2 or \
                any(not isinstance(w, (int, float)) or w < 0
                    for w in self.static_omega):
            raise ConfigError('static_omega', "two non-negative weights")
        for name in ('score_clamp', 'omega_clamp'):
            low_high = getattr(self, name)
            if len(low_high) != 2 or \
                    any(not isinstance(v, (int, float)) for v in low_high) \
                    or not 0 < low_high[0] < low_high[1]:
                raise ConfigError(name, "expected [low, high] with "
                                        "0 < low < high")
        return self

    # ------------------------- io --------------------------------------------
    @classmethod
    def fromDict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError('<root>', "the config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in sorted(d):
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        try:
            return cls(**d)
        except TypeError as ex:
            raise ConfigError('<root>', str(ex))

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding='utf-8') as f:
                d = json.load(f)
        except OSError as ex:
            raise ConfigError('<file>', "cannot read %s (%s)" % (path, ex))
        except ValueError as ex:
            raise ConfigError('<file>', "invalid JSON in %s (%s)" % (path, ex))
        return cls.fromDict(d)

    def toDict(self):
        return asdict(self)

    def replace(self, **changes):
        d = self.toDict()
        d.update(changes)
        return ExperimentConfig.fromDict(d)

    def dumps(self):
        return json.dumps(self.toDict(), sort_keys=True, indent=1)

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.dumps() + '\n')
        return path

    # ------------------------- derived values --------------------------------
    @property
    def splitSpec(self):
        from .synthdata import SplitSpec
        return SplitSpec(self.n_train, self.n_val, self.n_test)


def smoke_config(**changes):
    """ Tiny configuration used by the protocol tests. """
    d = dict(height=16, width=16, n_train=24, n_val=8, n_test=8,
             teacher_widths=[8, 8], student_widths=[4, 4],
             connector_widths=[8, 8], teacher_steps=30, distill_steps=20,
             batch_size=4, val_every=5, log_every=5, checkpoint_every=10,
             top_k=4, window=3, lr=0.05, connector_lr=0.005)
    d.update(changes)
    return ExperimentConfig.fromDict(d)
