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
Small full-resolution convolutional networks: single-task teachers, the
multi-task student (shared backbone plus one head per task) and the
connector that fuses the teachers' features into per-task soft targets.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .constants import (ARCH, IN_CHANNELS, TASK_SEG, TASK_DEPTH,
                        TEACHER_WIDTHS, STUDENT_WIDTHS, CONNECTOR_WIDTHS,
                        N_CLASSES)
from .errors import ShapeError, ConfigError
from .tensor import (Tensor, conv2d, batch_norm_op, relu, concat, no_grad,
                     DTYPE)

logger = logging.getLogger(__name__)

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


@dataclass
class HeadSpec:
    """ Task head: 1x1 convolution to n_classes (seg) or 1 (depth) maps. """
    kind: str
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.kind not in (TASK_SEG, TASK_DEPTH):
            raise ConfigError('head.kind', "unknown task kind %r" % self.kind)
        if self.kind == TASK_SEG and self.n_classes < 2:
            raise ConfigError('head.n_classes',
                              "segmentation needs at least 2 classes")

    @property
    def outChannels(self):
        return self.n_classes if self.kind == TASK_SEG else 1


@dataclass
class BackboneSpec:
    widths: list = field(default_factory=lambda: list(STUDENT_WIDTHS))
    in_channels: int = IN_CHANNELS

    def __post_init__(self):
        if not self.widths or any(int(w) < 1 for w in self.widths):
            raise ConfigError('widths', "widths must be non-empty and >= 1, "
                                        "got %s" % self.widths)
        self.widths = [int(w) for w in self.widths]


@dataclass
class ConnectorSpec:
    teacher_widths: list
    heads: list
    widths: list = field(default_factory=lambda: list(CONNECTOR_WIDTHS))

    def __post_init__(self):
        if len(self.widths) != 2:
            raise ConfigError('connector_widths',
                              "the connector has exactly 2 blocks, got %d"
                              % len(self.widths))

    @property
    def in_channels(self):
        return int(sum(self.teacher_widths))


def default_heads(n_tasks=2, n_classes=N_CLASSES):
    if n_tasks != 2:
        raise ConfigError('n_tasks', "pass explicit heads for n_tasks > 2, "
                                     "default heads cover seg+depth only; "
                                     "got %d" % n_tasks)
    return [HeadSpec(TASK_SEG, n_classes), HeadSpec(TASK_DEPTH, n_classes)]


@dataclass
class BatchNormState:
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS


def batch_norm(x, state, training):
    """ Per-channel batch normalization of an NCHW tensor.

    Training mode normalizes with the batch statistics and updates the
    running statistics in place (unbiased variance); eval mode only reads
    them.
    """
    n, c, h, w = x.shape
    if c != state.gamma.shape[0]:
        raise ShapeError('batch_norm', 1, state.gamma.shape[0], c)
    if not training:
        return batch_norm_op(x, state.gamma, state.beta,
                             mean=state.running_mean.copy(),
                             var=state.running_var.copy(),
                             eps=state.eps, training=False)
    m = n * h * w
    if m < 2:
        raise ShapeError('batch_norm', 'N*H*W', '>= 2 in training mode', m)
    out = batch_norm_op(x, state.gamma, state.beta, eps=state.eps,
                        training=True)
    mean = x.data.mean(axis=(0, 2, 3))
    var = x.data.var(axis=(0, 2, 3), ddof=1)
    mom = state.momentum
    state.running_mean[...] = (1.0 - mom) * state.running_mean + mom * mean
    state.running_var[...] = (1.0 - mom) * state.running_var + mom * var
    return out


class ModelGraph(object):
    """ Named parameters and buffers plus a forward definition.

    Parameter names are dotted paths ('backbone.0.conv.weight'); the
    insertion order of params and buffers fixes the checkpoint layout.
    """
    KIND = None

    def __init__(self, seed):
        self.seed = int(seed)
        self.params = OrderedDict()
        self.buffers = OrderedDict()
        self._bn = {}
        self._rng = np.random.default_rng(self.seed)

    # ------------------------- construction ----------------------------------
    def _addConv(self, prefix, cin, cout, k):
        fanIn = cin * k * k
        bound = np.sqrt(6.0 / fanIn)
        weight = self._rng.uniform(-bound, bound, size=(cout, cin, k, k))
        self.params[prefix + '.weight'] = Tensor(weight, requires_grad=True,
                                                 name=prefix + '.weight')
        self.params[prefix + '.bias'] = Tensor(np.zeros(cout), requires_grad=True,
                                               name=prefix + '.bias')

    def _addBatchNorm(self, prefix, channels):
        gamma = Tensor(np.ones(channels), requires_grad=True,
                       name=prefix + '.gamma')
        beta = Tensor(np.zeros(channels), requires_grad=True,
                      name=prefix + '.beta')
        self.params[prefix + '.gamma'] = gamma
        self.params[prefix + '.beta'] = beta
        self.buffers[prefix + '.running_mean'] = np.zeros(channels, dtype=DTYPE)
        self.buffers[prefix + '.running_var'] = np.ones(channels, dtype=DTYPE)
        self._bn[prefix] = BatchNormState(
            gamma, beta, self.buffers[prefix + '.running_mean'],
            self.buffers[prefix + '.running_var'])

    def _addBlock(self, prefix, cin, cout):
        self._addConv(prefix + '.conv', cin, cout, 3)
        self._addBatchNorm(prefix + '.bn', cout)

    def _addBackbone(self, prefix, inChannels, widths):
        cin = inChannels
        for i, width in enumerate(widths):
            self._addBlock('%s.%d' % (prefix, i), cin, width)
            cin = width
        return cin

    # ------------------------- forward helpers -------------------------------
    def _conv(self, prefix, x):
        return conv2d(x, self.params[prefix + '.weight'],
                      self.params[prefix + '.bias'])

    def _block(self, prefix, x, training):
        x = self._conv(prefix + '.conv', x)
        x = batch_norm(x, self._bn[prefix + '.bn'], training)
        return relu(x)

    def _backbone(self, prefix, x, nStages, training):
        for i in range(nStages):
            x = self._block('%s.%d' % (prefix, i), x, training)
        return x

    def _checkInput(self, x, channels):
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 4:
            raise ShapeError('%s.forward' % self.KIND, 'ndim', 4, x.ndim)
        if x.shape[1] != channels:
            raise ShapeError('%s.forward' % self.KIND, 1, channels, x.shape[1])
        return x

    def forward(self, x, training=False):
        raise NotImplementedError

    def __call__(self, x, training=False):
        return self.forward(x, training)

    def predict(self, images, batchSize=16):
        """ Eval-mode outputs (one numpy array per head) over a stack of
        images, assembled in input order.
        """
        outputs = None
        with no_grad():
            for start in range(0, len(images), batchSize):
                _, logits = self.forward(images[start:start + batchSize],
                                         training=False)
                if outputs is None:
                    outputs = [[] for _ in logits]
                for out, p in zip(outputs, logits):
                    out.append(p.data)
        return [np.concatenate(out, axis=0) for out in outputs]

    # ------------------------- state -----------------------------------------
    def parameters(self):
        return list(self.params.values())

    def nParameters(self):
        return int(sum(p.size for p in self.params.values()))

    def zeroGrad(self):
        for p in self.params.values():
            p.zeroGrad()

    def freeze(self):
        for p in self.params.values():
            p.requires_grad = False
        return self

    def stateDict(self):
        """ Copies of every parameter and buffer, in checkpoint order. """
        state = OrderedDict()
        for name, p in self.params.items():
            state['param.' + name] = p.data.copy()
        for name, b in self.buffers.items():
            state['buffer.' + name] = b.copy()
        return state

    def loadStateDict(self, state):
        for name, p in self.params.items():
            value = np.asarray(state['param.' + name], dtype=DTYPE)
            if value.shape != p.shape:
                raise ShapeError('loadStateDict', name, p.shape, value.shape)
            p.data[...] = value
        for name, b in self.buffers.items():
            value = np.asarray(state['buffer.' + name], dtype=DTYPE)
            if value.shape != b.shape:
                raise ShapeError('loadStateDict', name, b.shape, value.shape)
            b[...] = value

    def identity(self):
        raise NotImplementedError


class Teacher(ModelGraph):
    """ Single-task network: backbone + one head. forward returns
    (feature, [logits]).
    """
    KIND = 'teacher'

    def __init__(self, head, seed, widths=None):
        ModelGraph.__init__(self, seed)
        self.head = head
        self.spec = BackboneSpec(list(widths or TEACHER_WIDTHS))
        width = self._addBackbone('backbone', IN_CHANNELS, self.spec.widths)
        self._addConv('head', width, head.outChannels, 1)

    @property
    def featureWidth(self):
        return self.spec.widths[-1]

    def forward(self, x, training=False):
        x = self._checkInput(x, IN_CHANNELS)
        feature = self._backbone('backbone', x, len(self.spec.widths),
                                 training)
        return feature, [self._conv('head', feature)]

    def identity(self):
        return {'arch': ARCH, 'kind': self.KIND, 'task': self.head.kind,
                'widths': list(self.spec.widths),
                'n_classes': self.head.n_classes, 'seed': self.seed}


class Student(ModelGraph):
    """ Shared backbone feeding one head per task. """
    KIND = 'student'

    def __init__(self, heads, seed, widths=None):
        ModelGraph.__init__(self, seed)
        if len(heads) < 2:
            raise ConfigError('n_tasks', "the student needs at least 2 tasks")
        self.heads = list(heads)
        self.spec = BackboneSpec(list(widths or STUDENT_WIDTHS))
        width = self._addBackbone('backbone', IN_CHANNELS, self.spec.widths)
        for i, head in enumerate(self.heads):
            self._addConv('head.%d' % i, width, head.outChannels, 1)

    def forward(self, x, training=False):
        x = self._checkInput(x, IN_CHANNELS)
        feature = self._backbone('backbone', x, len(self.spec.widths),
                                 training)
        logits = [self._conv('head.%d' % i, feature)
                  for i in range(len(self.heads))]
        return feature, logits

    def identity(self):
        return {'arch': ARCH, 'kind': self.KIND,
                'tasks': [h.kind for h in self.heads],
                'widths': list(self.spec.widths),
                'n_classes': self.heads[0].n_classes, 'seed': self.seed}


class Connector(ModelGraph):
    """ Channel concatenation of the teachers' features followed by two
    Conv-BN-ReLU blocks and one head per task. The dynamic weights are
    not applied to the logits; they only weight the connector loss.
    """
    KIND = 'connector'

    def __init__(self, spec, seed):
        ModelGraph.__init__(self, seed)
        self.spec = spec
        self.heads = list(spec.heads)
        width = self._addBackbone('block', spec.in_channels, spec.widths)
        for i, head in enumerate(self.heads):
            self._addConv('head.%d' % i, width, head.outChannels, 1)

    def forward(self, features, training=False):
        if isinstance(features, (list, tuple)):
            if len(features) != len(self.spec.teacher_widths):
                raise ShapeError('connector.forward', 'n_teachers',
                                 len(self.spec.teacher_widths), len(features))
            for i, (f, w) in enumerate(zip(features,
                                           self.spec.teacher_widths)):
                if f.shape[1] != w:
                    raise ShapeError('connector.forward',
                                     'teacher %d channels' % i, w, f.shape[1])
            x = concat(features, axis=1)
        else:
            x = features
        x = self._checkInput(x, self.spec.in_channels)
        fused = self._backbone('block', x, len(self.spec.widths), training)
        logits = [self._conv('head.%d' % i, fused)
                  for i in range(len(self.heads))]
        return fused, logits

    def identity(self):
        return {'arch': ARCH, 'kind': self.KIND,
                'teacher_widths': list(self.spec.teacher_widths),
                'tasks': [h.kind for h in self.heads],
                'widths': list(self.spec.widths),
                'n_classes': self.heads[0].n_classes, 'seed': self.seed}


def build_teacher(task, seed, widths=None):
    """ Deterministic teacher: He-uniform convolutions, zero biases,
    BatchNorm gamma=1 beta=0.
    """
    model = Teacher(task, seed, widths)
    logger.debug("teacher %s: %d parameters", task.kind, model.nParameters())
    return model


def build_student(n_tasks, seed, n_classes=N_CLASSES, widths=None,
                  heads=None):
    """ Student with one head per task. Two tasks get the seg+depth heads;
    any other count needs explicit heads.
    """
    heads = heads or default_heads(n_tasks, n_classes)
    if len(heads) != n_tasks:
        raise ConfigError('n_tasks', "%d heads given for %d tasks"
                                     % (len(heads), n_tasks))
    model = Student(heads, seed, widths)
    logger.debug("student: %d parameters", model.nParameters())
    return model


def build_connector(teacher_widths, n_tasks, seed, n_classes=N_CLASSES,
                    widths=None, heads=None):
    heads = heads or default_heads(n_tasks, n_classes)
    spec = ConnectorSpec(list(teacher_widths), heads,
                         list(widths or CONNECTOR_WIDTHS))
    return Connector(spec, seed)


def build_from_identity(identity):
    """ Rebuild an (untrained) model from the identity of a manifest. """
    kind = identity.get('kind')
    nClasses = identity['n_classes']
    if kind == Teacher.KIND:
        return Teacher(HeadSpec(identity['task'], nClasses),
                       identity['seed'], identity['widths'])
    if kind == Student.KIND:
        heads = [HeadSpec(t, nClasses) for t in identity['tasks']]
        return Student(heads, identity['seed'], identity['widths'])
    if kind == Connector.KIND:
        heads = [HeadSpec(t, nClasses) for t in identity['tasks']]
        return build_connector(identity['teacher_widths'], len(heads),
                               identity['seed'], nClasses,
                               identity['widths'], heads)
    raise ConfigError('identity.kind', "unknown model kind %r" % kind)
