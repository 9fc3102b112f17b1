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
Finite-difference verification of the gradients computed by backward().
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .tensor import backward, no_grad

logger = logging.getLogger(__name__)

REL_ERROR_FLOOR = 1e-4


@dataclass
class GradCheckEntry:
    group: str
    maxRelError: float
    nChecked: int
    passed: bool


@dataclass
class GradCheckReport:
    tolerance: float
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    @property
    def maxRelError(self):
        return max([e.maxRelError for e in self.entries] or [0.0])

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def __str__(self):
        lines = ['grad check (tol %g): %s'
                 % (self.tolerance, 'PASS' if self.passed else 'FAIL')]
        for e in self.entries:
            lines.append('  %-32s max rel err %.3e over %d coords%s'
                         % (e.group, e.maxRelError, e.nChecked,
                            '' if e.passed else '  <--'))
        return '\n'.join(lines)


def relative_error(analytic, numeric, floor=REL_ERROR_FLOOR):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(closure, params, tolerance=1e-5, h=1e-6, maxPerGroup=None,
               seed=0, analyticGrads=None):
    """ Compare backward() against central differences.

    Params:
        closure: callable returning the scalar loss Tensor; it must be a
            deterministic function of the values stored in params.
        params: dict name -> Tensor, one group per entry.
        maxPerGroup: if given, only this many random coordinates of each
            group are perturbed (chosen with a generator seeded by seed).
        analyticGrads: optional dict name -> array overriding the gradients
            obtained from backward().
    """
    if analyticGrads is None:
        for p in params.values():
            p.grad = None
        loss = closure()
        backward(loss, list(params.values()))
        analyticGrads = {name: p.grad.copy() for name, p in params.items()}

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance=tolerance)

    for name, p in params.items():
        size = p.data.size
        if maxPerGroup is not None and maxPerGroup < size:
            coords = np.sort(rng.choice(size, maxPerGroup, replace=False))
        else:
            coords = np.arange(size)

        grad = np.asarray(analyticGrads[name]).reshape(-1)
        worst = 0.0
        for i in coords:
            orig = p.data.flat[i]
            with no_grad():
                p.data.flat[i] = orig + h
                fPlus = closure().item()
                p.data.flat[i] = orig - h
                fMinus = closure().item()
            p.data.flat[i] = orig
            numeric = (fPlus - fMinus) / (2.0 * h)
            worst = max(worst, relative_error(grad[i], numeric))

        entry = GradCheckEntry(name, worst, len(coords), worst <= tolerance)
        report.entries.append(entry)
        if not entry.passed:
            logger.debug("grad check failed on %s: %.3e", name, worst)

    return report
