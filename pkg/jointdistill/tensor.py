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
Minimal dense tensor engine with reverse-mode automatic differentiation.

Only the operations needed by the small convolutional networks of this
package are implemented: 3x3 and 1x1 convolutions (stride 1, same padding),
batch normalization, ReLU, sigmoid, elementwise add/sub/mul/div/abs/pow,
sum/mean reductions, softmax/log_softmax, channel concatenation and a flat
gather. All arithmetic is float64.
"""
import itertools
import logging
import weakref
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, LossTermError

logger = logging.getLogger(__name__)

DTYPE = np.float64

_gradEnabled = True
_sequence = itertools.count()


@contextmanager
def no_grad():
    """ Run the enclosed forward passes without recording the graph. """
    global _gradEnabled
    previous = _gradEnabled
    _gradEnabled = False
    try:
        yield
    finally:
        _gradEnabled = previous


def _unbroadcast(grad, shape):
    """ Sum out the broadcast dimensions so that grad matches shape. """
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _normAxis(op, axis, ndim):
    if not -ndim <= axis < ndim:
        raise ShapeError(op, axis, "axis in [-%d, %d)" % (ndim, ndim),
                         "ndim %d" % ndim)
    return axis % ndim


class Function(object):
    """ Base class of the differentiable operations.

    forward() receives the numpy arrays of the input tensors and returns the
    output array; backward() receives dL/d(output) and returns one gradient
    array (or None) per input.
    """

    def __init__(self, *tensors):
        self.inputs = tensors
        self.seq = next(_sequence)
        self.output = None

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError("forward not implemented for %s"
                                  % type(self).__name__)

    def backward(self, grad):
        raise NotImplementedError("backward not implemented for %s"
                                  % type(self).__name__)

    @classmethod
    def apply(cls, *tensors, **kwargs):
        tensors = tuple(_asTensor(t) for t in tensors)
        func = cls(*tensors)
        outData = func.forward(*(t.data for t in tensors), **kwargs)
        requiresGrad = _gradEnabled and any(t.requires_grad for t in tensors)
        out = Tensor(outData, requires_grad=requiresGrad,
                     creator=func if requiresGrad else None)
        if requiresGrad:
            func.output = weakref.ref(out)
        return out


class Tensor(object):
    """ A float64 array plus the bookkeeping needed for backpropagation. """
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, creator=None, name=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.creator = creator
        self.name = name

    # ------------------------- properties ------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 \
            else float(self.data)

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zeroGrad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s%s)" % (
            self.shape, self.requires_grad,
            ", name=%s" % self.name if self.name else "")

    def __len__(self):
        return self.shape[0]

    # ------------------------- arithmetic ------------------------------------
    def __add__(self, other):
        return Add.apply(self, other)

    def __radd__(self, other):
        return Add.apply(other, self)

    def __sub__(self, other):
        return Sub.apply(self, other)

    def __rsub__(self, other):
        return Sub.apply(other, self)

    def __mul__(self, other):
        return Mul.apply(self, other)

    def __rmul__(self, other):
        return Mul.apply(other, self)

    def __truediv__(self, other):
        return Div.apply(self, other)

    def __rtruediv__(self, other):
        return Div.apply(other, self)

    def __neg__(self):
        return Neg.apply(self)

    def __pow__(self, exponent):
        return Pow.apply(self, exponent=float(exponent))

    def abs(self):
        return Abs.apply(self)

    def sum(self, axis=None, keepdims=False):
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def relu(self):
        return Relu.apply(self)

    def sigmoid(self):
        return Sigmoid.apply(self)

    def backward(self, inputs=None):
        backward(self, inputs)


def _asTensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


# ------------------------- elementwise ---------------------------------------
class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return (_unbroadcast(grad, self.shapes[0]),
                _unbroadcast(grad, self.shapes[1]))


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return (_unbroadcast(grad, self.shapes[0]),
                _unbroadcast(-grad, self.shapes[1]))


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (_unbroadcast(grad * self.b, self.a.shape),
                _unbroadcast(grad * self.a, self.b.shape))


class Div(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        return (_unbroadcast(grad / self.b, self.a.shape),
                _unbroadcast(-grad * self.a / (self.b * self.b),
                             self.b.shape))


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Pow(Function):
    def forward(self, a, exponent):
        self.a = a
        self.exponent = exponent
        return a ** exponent

    def backward(self, grad):
        p = self.exponent
        return (grad * p * self.a ** (p - 1.0),)


class Abs(Function):
    def forward(self, a):
        self.sign = np.sign(a)
        return np.abs(a)

    def backward(self, grad):
        return (grad * self.sign,)


class Relu(Function):
    def forward(self, a):
        # subgradient at 0 is 0
        self.mask = a > 0
        return np.where(self.mask, a, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, a):
        self.out = 0.5 * (1.0 + np.tanh(0.5 * a))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


# ------------------------- shape / reductions --------------------------------
class Reshape(Function):
    def forward(self, a, shape):
        self.inShape = a.shape
        return a.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.inShape),)


class Sum(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.inShape = a.shape
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.inShape),)


class Mean(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.inShape = a.shape
        self.axis = axis
        self.keepdims = keepdims
        self.count = a.size / max(np.asarray(a.sum(axis=axis)).size, 1) \
            if a.size else 1
        return np.asarray(a.mean(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.inShape),)


class Concat(Function):
    def forward(self, *arrays, axis=1):
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class Take(Function):
    """ Gather entries of the flattened input. """
    def forward(self, a, indices):
        self.inShape = a.shape
        self.indices = np.asarray(indices, dtype=np.int64)
        return a.reshape(-1)[self.indices]

    def backward(self, grad):
        out = np.zeros(int(np.prod(self.inShape)), dtype=DTYPE)
        np.add.at(out, self.indices, grad)
        return (out.reshape(self.inShape),)


# ------------------------- softmax family ------------------------------------
class Softmax(Function):
    def forward(self, a, axis=-1):
        self.axis = axis
        shifted = a - a.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.out = e / e.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        s = self.out
        return (s * (grad - (grad * s).sum(axis=self.axis, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, a, axis=-1):
        self.axis = axis
        shifted = a - a.max(axis=axis, keepdims=True)
        logSum = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out = shifted - logSum
        self.softmax = np.exp(out)
        return out

    def backward(self, grad):
        return (grad - self.softmax * grad.sum(axis=self.axis, keepdims=True),)


# ------------------------- convolution / normalization -----------------------
class Conv2d(Function):
    """ Cross-correlation, stride 1, zero padding k//2 (k in {1, 3}). """

    def forward(self, x, weight, bias):
        n, cin, h, w = x.shape
        cout, _, k, _ = weight.shape
        pad = k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        cols = np.empty((n, cin, k, k, h, w), dtype=DTYPE)
        for i in range(k):
            for j in range(k):
                cols[:, :, i, j] = xp[:, :, i:i + h, j:j + w]
        self.cols = cols.reshape(n, cin * k * k, h * w)
        self.w2 = weight.reshape(cout, cin * k * k)
        self.dims = (n, cin, h, w, cout, k)
        out = np.matmul(self.w2, self.cols).reshape(n, cout, h, w)
        return out + bias.reshape(1, cout, 1, 1)

    def backward(self, grad):
        n, cin, h, w, cout, k = self.dims
        pad = k // 2
        g2 = np.ascontiguousarray(grad).reshape(n, cout, h * w)
        dBias = grad.sum(axis=(0, 2, 3))
        dWeight = np.matmul(g2, self.cols.transpose(0, 2, 1)).sum(axis=0)
        dCols = np.matmul(self.w2.T, g2).reshape(n, cin, k, k, h, w)
        dxp = np.zeros((n, cin, h + 2 * pad, w + 2 * pad), dtype=DTYPE)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + h, j:j + w] += dCols[:, :, i, j]
        dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
        return dx, dWeight.reshape(cout, cin, k, k), dBias


class BatchNorm2d(Function):
    """ Per-channel normalization followed by the affine gamma, beta.

    In training mode the statistics come from the batch and take part in the
    gradient; in eval mode the given running statistics are constants.
    """

    def forward(self, x, gamma, beta, mean=None, var=None, eps=1e-5,
                training=True):
        axes = (0, 2, 3)
        self.training = training
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
        self.batchMean, self.batchVar = mean, var
        self.invStd = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mean.reshape(1, -1, 1, 1)) * \
            self.invStd.reshape(1, -1, 1, 1)
        self.gamma = gamma
        return self.xhat * gamma.reshape(1, -1, 1, 1) + \
            beta.reshape(1, -1, 1, 1)

    def backward(self, grad):
        axes = (0, 2, 3)
        dGamma = (grad * self.xhat).sum(axis=axes)
        dBeta = grad.sum(axis=axes)
        dxhat = grad * self.gamma.reshape(1, -1, 1, 1)
        invStd = self.invStd.reshape(1, -1, 1, 1)
        if self.training:
            m = grad.size / grad.shape[1]
            dx = invStd / m * (m * dxhat
                               - dxhat.sum(axis=axes, keepdims=True)
                               - self.xhat * (dxhat * self.xhat).sum(
                                   axis=axes, keepdims=True))
        else:
            dx = dxhat * invStd
        return dx, dGamma, dBeta


# ------------------------- functional API ------------------------------------
def conv2d(x, weight, bias):
    """ 3x3 (or 1x1) cross-correlation with stride 1 and same padding. """
    x, weight, bias = _asTensor(x), _asTensor(weight), _asTensor(bias)
    if x.ndim != 4:
        raise ShapeError('conv2d', 'input.ndim', 4, x.ndim)
    if weight.ndim != 4:
        raise ShapeError('conv2d', 'kernel.ndim', 4, weight.ndim)
    k = weight.shape[2]
    if k not in (1, 3) or weight.shape[3] != k:
        raise ShapeError('conv2d', 'kernel spatial', '3x3 or 1x1',
                         weight.shape[2:])
    if weight.shape[1] != x.shape[1]:
        raise ShapeError('conv2d', 1, weight.shape[1], x.shape[1])
    if bias.shape != (weight.shape[0],):
        raise ShapeError('conv2d', 'bias', (weight.shape[0],), bias.shape)
    return Conv2d.apply(x, weight, bias)


def batch_norm_op(x, gamma, beta, mean=None, var=None, eps=1e-5,
                  training=True):
    return BatchNorm2d.apply(x, gamma, beta, mean=mean, var=var, eps=eps,
                             training=training)


def relu(x):
    return Relu.apply(x)


def sigmoid(x):
    return Sigmoid.apply(x)


def softmax(x, axis=-1):
    x = _asTensor(x)
    axis = _normAxis('softmax', axis, x.ndim)
    if x.shape[axis] == 0:
        raise ShapeError('softmax', axis, '>= 1 element', 0)
    return Softmax.apply(x, axis=axis)


def log_softmax(x, axis=-1):
    """ Numerically stable log-softmax (max subtraction) along axis. """
    x = _asTensor(x)
    axis = _normAxis('log_softmax', axis, x.ndim)
    if x.shape[axis] == 0:
        raise ShapeError('log_softmax', axis, '>= 1 element', 0)
    return LogSoftmax.apply(x, axis=axis)


def concat(tensors, axis=1):
    tensors = [_asTensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        for ax, (a, b) in enumerate(zip(ref, t.shape)):
            if ax != axis and a != b:
                raise ShapeError('concat', ax, a, b)
    return Concat.apply(*tensors, axis=axis)


def take(x, indices):
    return Take.apply(x, indices=indices)


# ------------------------- backpropagation -----------------------------------
class Graph(object):
    """ Record of the operations reachable from an output, in execution
    order. Backward walks it in reverse, visiting each node once.
    """

    def __init__(self, functions):
        self.functions = functions

    @classmethod
    def fromOutput(cls, output):
        seen = set()
        functions = []
        stack = [output.creator] if output.creator is not None else []
        while stack:
            func = stack.pop()
            if id(func) in seen:
                continue
            seen.add(id(func))
            functions.append(func)
            for t in func.inputs:
                if t.creator is not None and id(t.creator) not in seen:
                    stack.append(t.creator)
        functions.sort(key=lambda f: f.seq)
        return cls(functions)

    def __len__(self):
        return len(self.functions)


def backward(loss, inputs=None):
    """ Accumulate d(loss)/d(t) into t.grad for every leaf t that requires
    gradient. Tensors listed in inputs that do not take part in the graph
    receive a zero gradient.
    """
    if loss.size != 1:
        raise ShapeError('backward', 'size', 1, loss.size)
    value = float(loss.data.reshape(-1)[0])
    if not np.isfinite(value):
        raise LossTermError('loss', value)

    grads = {id(loss): np.ones_like(loss.data)}
    if loss.creator is None and loss.requires_grad:
        loss.grad = grads[id(loss)].copy() if loss.grad is None \
            else loss.grad + grads[id(loss)]

    for func in reversed(Graph.fromOutput(loss).functions):
        out = func.output() if func.output is not None else None
        if out is None:
            continue
        grad = grads.pop(id(out), None)
        if grad is None:
            continue
        for t, g in zip(func.inputs, func.backward(grad)):
            if g is None or not t.requires_grad:
                continue
            if t.creator is None:
                t.grad = np.array(g, dtype=DTYPE) if t.grad is None \
                    else t.grad + g
            else:
                key = id(t)
                grads[key] = g if key not in grads else grads[key] + g

    for t in inputs or []:
        if t.grad is None:
            t.zeroGrad()


# ------------------------- optimization --------------------------------------
@dataclass
class SgdState:
    """ Velocity buffer of one parameter plus its SGD settings. """
    velocity: np.ndarray
    learning_rate: float
    momentum: float


def sgd_momentum_step(param, grad, state):
    """ v <- momentum * v + grad ; param <- param - lr * v (in place). """
    data = param.data if isinstance(param, Tensor) else param
    grad = np.asarray(grad, dtype=DTYPE)
    if grad.shape != data.shape:
        raise ShapeError('sgd_momentum_step', 'grad', data.shape, grad.shape)
    if state.velocity.shape != data.shape:
        raise ShapeError('sgd_momentum_step', 'velocity', data.shape,
                         state.velocity.shape)
    state.velocity = state.momentum * state.velocity + grad
    data -= state.learning_rate * state.velocity
    return param


class SGD(object):
    """ SGD with momentum over a named collection of parameters. """

    def __init__(self, params, lr, momentum):
        self.params = params
        self.states = {name: SgdState(np.zeros_like(p.data), lr, momentum)
                       for name, p in params.items()}

    def zeroGrad(self):
        for p in self.params.values():
            p.zeroGrad()

    def step(self):
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            sgd_momentum_step(p, grad, self.states[name])

    def stateDict(self):
        return {name: s.velocity for name, s in self.states.items()}

    def loadStateDict(self, velocities):
        for name, v in velocities.items():
            self.states[name].velocity = np.array(v, dtype=DTYPE)
