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
Exceptions raised by jointdistill. Every error carries the fields needed
to locate the problem (axis, pixel, term, iteration...) besides the message.
"""


class JointDistillError(Exception):
    """ Base class of all the errors raised by this package. """
    pass


class ShapeError(JointDistillError):
    def __init__(self, op, axis, expected, got):
        self.op = op
        self.axis = axis
        self.expected = expected
        self.got = got
        JointDistillError.__init__(
            self, "%s: shape mismatch on axis %s (expected %s, got %s)"
                  % (op, axis, expected, got))


class LabelError(JointDistillError):
    def __init__(self, pixel, label, nClasses):
        self.pixel = tuple(int(p) for p in pixel)
        self.label = int(label)
        self.nClasses = nClasses
        JointDistillError.__init__(
            self, "label %d at pixel %s is outside [0, %d)"
                  % (self.label, self.pixel, nClasses))


class LossTermError(JointDistillError):
    def __init__(self, term, value):
        self.term = term
        self.value = value
        self.breakdown = None
        JointDistillError.__init__(
            self, "loss term '%s' is not finite: %r" % (term, value))


class NumericalAbort(JointDistillError):
    """ Training stopped because a loss became non-finite. """
    def __init__(self, iteration, breakdown=None, phase='train'):
        self.iteration = iteration
        self.breakdown = breakdown
        self.phase = phase
        msg = "%s: non-finite loss at iteration %d" % (phase, iteration)
        if breakdown is not None:
            msg += " (%s)" % breakdown
        JointDistillError.__init__(self, msg)


class ConfigError(JointDistillError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        JointDistillError.__init__(self, "config '%s': %s" % (key, reason))


class ManifestError(JointDistillError):
    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        JointDistillError.__init__(self, "manifest %s: %s" % (path, reason))


class CriterionMismatchError(JointDistillError):
    def __init__(self, expected, got):
        self.expected = list(expected)
        self.got = list(got)
        JointDistillError.__init__(
            self, "criteria differ: baseline %s, report %s"
                  % (self.expected, self.got))


class TrajectoryError(JointDistillError):
    pass


class ControllerError(JointDistillError):
    pass
