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

import numpy as np
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from .convert import readCsv

logger = logging.getLogger(__name__)


def _columns(path):
    """ Read a numeric CSV log as {column: array}; blank cells are NaN. """
    header, rows = readCsv(path)
    values = np.array([[float(v) if v != '' else np.nan for v in row]
                       for row in rows], dtype=np.float64).reshape(
        len(rows), len(header))
    return {name: values[:, i] for i, name in enumerate(header)}


class JointDistillPlotter(object):
    """ Class to create the plots of a run. Every method writes one PNG. """

    def __init__(self, figsize=(9, 7), dpi=100):
        self.figsize = figsize
        self.dpi = dpi

    def _save(self, fig, out):
        fig.tight_layout()
        fig.savefig(out, dpi=self.dpi)
        plt.close(fig)
        logger.debug("plot written to %s", out)
        return out

    def plotLossScreening(self, lossCsv, out):
        """ Every loss column of a training log against the iteration. """
        cols = _columns(lossCsv)
        fig = plt.figure(figsize=self.figsize)
        ax = fig.add_subplot(111)
        for name, values in cols.items():
            if name == 'iter' or np.all(values == 0):
                continue
            ax.plot(cols['iter'], values, label=name)
        ax.set_title('Loss function')
        ax.set_ylabel('Loss function')
        ax.set_xlabel('Iteration')
        ax.set_ylim(bottom=0)
        ax.legend()
        return self._save(fig, out)

    def plotOmegaTrace(self, controllerCsv, out):
        """ Dynamic weights (top) and feedback scores (bottom) at every
        validation tick.
        """
        cols = _columns(controllerCsv)
        fig, (axOmega, axScore) = plt.subplots(2, 1, sharex=True,
                                               figsize=self.figsize)
        for name in cols:
            if name.startswith('omega_'):
                axOmega.plot(cols['iter'], cols[name], marker='o',
                             label=name[len('omega_'):])
            elif name.startswith('a_'):
                axScore.plot(cols['iter'], cols[name], marker='o',
                             label=name[len('a_'):])
        axOmega.set_ylabel('omega')
        axOmega.legend()
        axScore.axhline(1.0, color='k', linewidth=0.8, linestyle='--')
        axScore.set_ylabel('feedback score')
        axScore.set_xlabel('Iteration')
        axScore.legend()
        return self._save(fig, out)

    def plotAttention(self, attn, points, out, cmap='hot'):
        """ Attention map with its essential points, labelled by rank. """
        values = np.asarray(getattr(attn, 'values', attn))
        fig = plt.figure(figsize=self.figsize)
        ax = fig.add_subplot(111)
        img = ax.imshow(values, cmap=cmap, interpolation='nearest')
        fig.colorbar(img, ax=ax)
        for p in points:
            ax.plot(p.col, p.row, 'c+', markersize=10)
            ax.annotate(str(p.rank), (p.col, p.row), color='c',
                        xytext=(3, 3), textcoords='offset points')
        ax.set_title('Attention')
        return self._save(fig, out)
