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
import numpy as np


class RasterHandler(object):
    """ Class to provide the numpy raster utilities used to draw the
    synthetic scenes. Masks are boolean HxW arrays.
    """

    def __init__(self):
        pass

    @classmethod
    def grid(cls, h, w):
        """ Pixel-centre row and column coordinates. """
        return np.meshgrid(np.arange(h) + 0.5, np.arange(w) + 0.5,
                           indexing='ij')

    @classmethod
    def circleMask(cls, h, w, cy, cx, radius):
        y, x = cls.grid(h, w)
        return (y - cy)**2 + (x - cx)**2 <= radius**2

    @classmethod
    def rectMask(cls, h, w, cy, cx, halfH, halfW):
        y, x = cls.grid(h, w)
        return (np.abs(y - cy) <= halfH) & (np.abs(x - cx) <= halfW)

    @classmethod
    def triangleMask(cls, h, w, vertices):
        """ Pixels inside the triangle given by three (row, col) vertices,
        either orientation.
        """
        y, x = cls.grid(h, w)
        (y0, x0), (y1, x1), (y2, x2) = vertices

        def edge(ya, xa, yb, xb):
            return (xb - xa) * (y - ya) - (yb - ya) * (x - xa)

        e0 = edge(y0, x0, y1, x1)
        e1 = edge(y1, x1, y2, x2)
        e2 = edge(y2, x2, y0, x0)
        return ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | \
               ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))

    @classmethod
    def regularTriangle(cls, cy, cx, radius, angle):
        """ Vertices of an equilateral triangle inscribed in a circle. """
        thetas = angle + np.array([0.0, 2.0, 4.0]) * np.pi / 3.0
        return [(cy + radius * np.sin(t), cx + radius * np.cos(t))
                for t in thetas]

    @classmethod
    def linearRamp(cls, h, w, mask, angle, amplitude):
        """ Ramp rising from 0 to amplitude across the masked pixels along
        direction angle; zero outside the mask.
        """
        ramp = np.zeros((h, w))
        if not mask.any():
            return ramp
        y, x = cls.grid(h, w)
        proj = y * np.sin(angle) + x * np.cos(angle)
        inside = proj[mask]
        span = inside.max() - inside.min()
        if span > 0:
            ramp[mask] = amplitude * (inside - inside.min()) / span
        return ramp

