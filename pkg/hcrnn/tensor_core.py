"""
Dense tensor engine with reverse-mode automatic differentiation.

Values are numpy arrays wrapped in `Tensor`. Operations are `Function` subclasses:
each computes its forward pass on raw arrays, checks the result is finite and, when a
`Tape` is active and any input requires gradients, records itself so that `backward`
can replay the tape in reverse.

Precision is global: float32 by default, float64 for gradient checks
(`set_default_precision` / `default_precision`).

Only bias-over-batch broadcasting exists; any other shape mismatch is a DimensionError.
"""

import logging
import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, DimensionError, NonFiniteError, UsageError

logger = logging.getLogger(__name__)

PRECISIONS = {"float32": np.float32, "float64": np.float64}

_default_dtype = np.float32
_local = threading.local()


# --- Precision ---

def set_default_precision(precision):
    """Switch the dtype used for newly created tensors ('float32' or 'float64')"""
    global _default_dtype
    if precision not in PRECISIONS:
        raise ConfigurationError(f"unknown precision '{precision}', expected one of {sorted(PRECISIONS)}")
    _default_dtype = PRECISIONS[precision]


def get_default_precision():
    return np.dtype(_default_dtype).name


@contextmanager
def default_precision(precision):
    """Temporarily switch the global precision"""
    previous = get_default_precision()
    set_default_precision(precision)
    try:
        yield
    finally:
        set_default_precision(previous)


# --- Tensor ---

class Tensor:
    """
    An n-dimensional array that can take part in a gradient tape.

    Leaves created with ``requires_grad=True`` own a same-shape gradient accumulator
    (``.grad``). Tensors produced by operations outside an active tape never require
    gradients.
    """

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        array = np.array(data, dtype=dtype or _default_dtype)
        if any(extent <= 0 for extent in array.shape):
            raise DimensionError(f"tensor extents must be positive, got shape {array.shape}")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._grad = None
        self._record = None
        self._tape = None

    @classmethod
    def _wrap(cls, array, requires_grad=False):
        out = cls.__new__(cls)
        out.data = array
        out.requires_grad = requires_grad
        out.name = None
        out._grad = None
        out._record = None
        out._tape = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def grad(self):
        """Gradient accumulator, present only when the tensor requires gradients"""
        if not self.requires_grad:
            return None
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @property
    def label(self):
        return self.name or f"tensor{list(self.shape)}"

    def accumulate_grad(self, gradient):
        if gradient.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {gradient.shape} does not match {self.label} shape {self.data.shape}"
            )
        if self._grad is None:
            self._grad = np.array(gradient, dtype=self.data.dtype)
        else:
            self._grad += gradient

    def zero_grad(self):
        if self.requires_grad:
            self._grad = None

    def assign_(self, values):
        """In-place parameter update; callers serialize access"""
        values = np.asarray(values, dtype=self.data.dtype)
        if values.shape != self.data.shape:
            raise DimensionError(f"cannot assign shape {values.shape} to {self.label} shape {self.data.shape}")
        self.data[...] = values

    def numpy(self):
        return self.data.copy()

    def item(self):
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        grad_flag = ", requires_grad=True" if self.requires_grad else ""
        name = f", name='{self.name}'" if self.name else ""
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype.name}{grad_flag}{name})"

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(scale(self, -1.0), other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


# --- Tape ---

class TapeRecord:
    __slots__ = ("op", "inputs", "output")

    def __init__(self, op, inputs, output):
        self.op = op
        self.inputs = inputs
        self.output = output


class Tape:
    """
    Ordered record of the operations of one forward pass.

    Used as a context manager; operations record only while a tape is active.
    A tape is confined to the thread that opened it and is consumed by `backward`.
    """

    def __init__(self):
        self.records = []
        self.consumed = False
        self._previous = None

    def __enter__(self):
        self._previous = getattr(_local, "tape", None)
        _local.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _local.tape = self._previous
        self._previous = None
        return False

    def __len__(self):
        return len(self.records)

    def record(self, op, inputs, output):
        if self.consumed:
            raise UsageError("cannot record on a tape that was already consumed by backward")
        record = TapeRecord(op, inputs, output)
        self.records.append(record)
        output._record = record
        output._tape = self


def active_tape():
    return getattr(_local, "tape", None)


@contextmanager
def no_grad():
    """Suspend recording inside an active tape"""
    previous = getattr(_local, "tape", None)
    _local.tape = None
    try:
        yield
    finally:
        _local.tape = previous


def backward(seed):
    """
    Reverse-mode pass from a scalar seed.

    Every requires_grad leaf reachable from the seed gets its gradient accumulated
    exactly once; the tape is consumed afterwards.
    """
    if not isinstance(seed, Tensor):
        raise UsageError(f"backward expects a Tensor seed, got {type(seed).__name__}")
    if seed.data.size != 1:
        raise UsageError(f"backward seed must be a scalar, got shape {list(seed.shape)}")
    if seed._record is None:
        raise UsageError("backward seed is detached: it was not produced under an active tape")
    tape = seed._tape
    if tape.consumed:
        raise UsageError("the tape of this seed was already consumed by a previous backward pass")

    pending = {id(seed): np.ones_like(seed.data)}
    for record in reversed(tape.records):
        gradient = pending.pop(id(record.output), None)
        if gradient is None:
            continue
        input_grads = record.op.backward(gradient)
        for tensor, input_grad in zip(record.inputs, input_grads):
            if input_grad is None or not tensor.requires_grad:
                continue
            if tensor._record is None or tensor._tape is not tape:
                tensor.accumulate_grad(input_grad)
                continue
            key = id(tensor)
            if key in pending:
                pending[key] = pending[key] + input_grad
            else:
                pending[key] = input_grad

    tape.records.clear()
    tape.consumed = True


# --- Function base ---

class Function:
    """Base class of differentiable operations"""

    name = "op"

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError(f"forward not implemented for {self.name}")

    def backward(self, grad):
        raise NotImplementedError(f"backward not implemented for {self.name}")

    @classmethod
    def apply(cls, *tensors, **kwargs):
        op = cls()
        out_data = op.forward(*(t.data for t in tensors), **kwargs)
        if not np.all(np.isfinite(out_data)):
            raise NonFiniteError(op.name, "inputs: " + ", ".join(t.label for t in tensors))
        tape = active_tape()
        requires_grad = tape is not None and any(t.requires_grad for t in tensors)
        out = Tensor._wrap(out_data, requires_grad=requires_grad)
        if requires_grad:
            tape.record(op, tensors, out)
        return out


def _require_same_shape(op_name, a, b):
    if a.shape != b.shape:
        raise DimensionError(f"{op_name}: shapes {list(a.shape)} and {list(b.shape)} differ")


# --- Linear algebra ---

class Matmul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim != 2 or b.ndim != 2:
            raise DimensionError(f"matmul expects 2-D operands, got {list(a.shape)} and {list(b.shape)}")
        if a.shape[1] != b.shape[0]:
            raise DimensionError(f"matmul inner extents differ: {list(a.shape)} x {list(b.shape)}")
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class Transpose(Function):
    name = "transpose"

    def forward(self, a):
        if a.ndim != 2:
            raise DimensionError(f"transpose expects a 2-D tensor, got {list(a.shape)}")
        return np.ascontiguousarray(a.T)

    def backward(self, grad):
        return (np.ascontiguousarray(grad.T),)


class FullyConnected(Function):
    name = "fully_connected"

    def forward(self, x, weight, bias=None):
        if weight.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != weight.shape[1]:
            raise DimensionError(
                f"fully_connected: input {list(x.shape)} does not fit weight {list(weight.shape)}"
            )
        if bias is not None and bias.shape != (weight.shape[0],):
            raise DimensionError(f"fully_connected: bias {list(bias.shape)} for weight {list(weight.shape)}")
        self.x, self.weight = x, weight
        self.has_bias = bias is not None
        out = x @ weight.T
        if bias is not None:
            out = out + bias
        return out

    def backward(self, grad):
        grad_x = grad @ self.weight
        if self.x.ndim == 1:
            grad_w = np.outer(grad, self.x)
            grad_b = grad
        else:
            grad_w = grad.T @ self.x
            grad_b = grad.sum(axis=0)
        if self.has_bias:
            return grad_x, grad_w, grad_b
        return grad_x, grad_w


# --- Convolution and pooling ---

class Conv2d(Function):
    """Cross-correlation with bias; input C×H×W or N×C×H×W"""

    name = "conv2d"

    def forward(self, x, kernel, bias, stride=1, padding=0):
        self.batched = x.ndim == 4
        if x.ndim not in (3, 4):
            raise DimensionError(f"conv2d expects C×H×W or N×C×H×W input, got {list(x.shape)}")
        if kernel.ndim != 4:
            raise DimensionError(f"conv2d kernel must be C_out×C_in×kh×kw, got {list(kernel.shape)}")
        if not self.batched:
            x = x[None]
        n, channels, height, width = x.shape
        out_channels, in_channels, kh, kw = kernel.shape
        if in_channels != channels:
            raise DimensionError(f"conv2d: input has {channels} channels, kernel expects {in_channels}")
        if bias.shape != (out_channels,):
            raise DimensionError(f"conv2d: bias {list(bias.shape)} for {out_channels} output channels")
        if stride < 1 or padding < 0:
            raise DimensionError(f"conv2d: invalid stride {stride} / padding {padding}")

        span_h = height + 2 * padding - kh
        span_w = width + 2 * padding - kw
        if span_h < 0 or span_w < 0 or span_h % stride or span_w % stride:
            raise DimensionError(
                f"conv2d: output extent not integral for input {height}×{width}, "
                f"kernel {kh}×{kw}, stride {stride}, padding {padding}"
            )
        out_h = span_h // stride + 1
        out_w = span_w // stride + 1

        padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.tensordot(windows, kernel, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]

        self.windows = windows
        self.kernel = kernel
        self.padded_shape = padded.shape
        self.input_hw = (height, width)
        self.out_hw = (out_h, out_w)
        self.stride = stride
        self.padding = padding
        out = np.ascontiguousarray(out)
        return out if self.batched else out[0]

    def backward(self, grad):
        if not self.batched:
            grad = grad[None]
        stride, padding = self.stride, self.padding
        out_h, out_w = self.out_hw
        height, width = self.input_hw
        _, _, kh, kw = self.kernel.shape

        grad_bias = grad.sum(axis=(0, 2, 3))
        grad_kernel = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))

        grad_padded = np.zeros(self.padded_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                contribution = np.tensordot(grad, self.kernel[:, :, i, j], axes=([1], [0]))
                grad_padded[
                    :, :,
                    i:i + stride * (out_h - 1) + 1:stride,
                    j:j + stride * (out_w - 1) + 1:stride,
                ] += contribution.transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, padding:padding + height, padding:padding + width]
        grad_x = np.ascontiguousarray(grad_x)
        if not self.batched:
            grad_x = grad_x[0]
        return grad_x, grad_kernel, grad_bias


class AvgPool2d(Function):
    name = "avg_pool2d"

    def forward(self, x, window=2):
        if x.ndim not in (3, 4):
            raise DimensionError(f"avg_pool2d expects C×H×W or N×C×H×W, got {list(x.shape)}")
        height, width = x.shape[-2:]
        if height % window or width % window:
            raise DimensionError(f"avg_pool2d: extents {height}×{width} not divisible by window {window}")
        self.window = window
        lead = x.shape[:-2]
        blocks = x.reshape(*lead, height // window, window, width // window, window)
        return blocks.mean(axis=(-3, -1))

    def backward(self, grad):
        w = self.window
        spread = np.repeat(np.repeat(grad, w, axis=-2), w, axis=-1)
        return (spread / (w * w),)


class GlobalAvgPool(Function):
    name = "global_avg_pool"

    def forward(self, x):
        if x.ndim not in (3, 4):
            raise DimensionError(f"global_avg_pool expects C×H×W or N×C×H×W, got {list(x.shape)}")
        self.input_shape = x.shape
        return x.mean(axis=(-2, -1))

    def backward(self, grad):
        height, width = self.input_shape[-2:]
        spread = np.broadcast_to(grad[..., None, None] / (height * width), self.input_shape)
        return (np.array(spread),)


# --- Normalization ---

class BatchNormState:
    """Running moments of one batch-normalization layer"""

    def __init__(self, channels, momentum=0.9, eps=1e-5, dtype=None):
        dtype = dtype or _default_dtype
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def copy(self):
        clone = BatchNormState(len(self.running_mean), self.momentum, self.eps, self.running_mean.dtype)
        clone.running_mean = self.running_mean.copy()
        clone.running_var = self.running_var.copy()
        return clone


class BatchNorm(Function):
    name = "batch_norm"

    def forward(self, x, gamma, beta, state=None, training=True):
        if x.ndim not in (2, 4):
            raise DimensionError(f"batch_norm expects N×C or N×C×H×W, got {list(x.shape)}")
        channels = x.shape[1]
        if gamma.shape != (channels,) or beta.shape != (channels,):
            raise DimensionError(
                f"batch_norm: gamma {list(gamma.shape)} / beta {list(beta.shape)} for {channels} channels"
            )
        self.axes = (0,) + tuple(range(2, x.ndim))
        self.view = (1, channels) + (1,) * (x.ndim - 2)
        self.training = training
        self.gamma = gamma

        if training:
            if x.shape[0] < 2:
                raise ConfigurationError("batch_norm in train mode needs a batch of at least 2 samples")
            mean = x.mean(axis=self.axes)
            var = x.var(axis=self.axes)
            count = x.size // channels
            if state is not None:
                m = state.momentum
                unbiased = var * count / max(count - 1, 1)
                state.running_mean[...] = m * state.running_mean + (1.0 - m) * mean
                state.running_var[...] = m * state.running_var + (1.0 - m) * unbiased
            eps = state.eps if state is not None else 1e-5
        else:
            if state is None:
                raise UsageError("batch_norm in infer mode needs running moments")
            mean = state.running_mean.astype(x.dtype)
            var = state.running_var.astype(x.dtype)
            eps = state.eps

        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.x_hat = (x - mean.reshape(self.view)) * self.inv_std.reshape(self.view)
        return gamma.reshape(self.view) * self.x_hat + beta.reshape(self.view)

    def backward(self, grad):
        grad_beta = grad.sum(axis=self.axes)
        grad_gamma = (grad * self.x_hat).sum(axis=self.axes)
        grad_x_hat = grad * self.gamma.reshape(self.view)
        inv_std = self.inv_std.reshape(self.view)
        if not self.training:
            return grad_x_hat * inv_std, grad_gamma, grad_beta
        count = grad.size // grad.shape[1]
        sum_grad = grad_x_hat.sum(axis=self.axes, keepdims=True)
        sum_grad_xhat = (grad_x_hat * self.x_hat).sum(axis=self.axes, keepdims=True)
        grad_x = inv_std / count * (count * grad_x_hat - sum_grad - self.x_hat * sum_grad_xhat)
        return grad_x, grad_gamma, grad_beta


# --- Elementwise ---

class Relu(Function):
    name = "relu"

    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, x):
        self.out = 0.5 * (np.tanh(0.5 * x) + 1.0)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Tanh(Function):
    name = "tanh"

    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Add(Function):
    name = "add"

    def forward(self, a, b):
        _require_same_shape(self.name, a, b)
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        _require_same_shape(self.name, a, b)
        return a - b

    def backward(self, grad):
        return grad, -grad


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _require_same_shape(self.name, a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class Scale(Function):
    name = "scale"

    def forward(self, x, factor=1.0):
        self.factor = factor
        return x * x.dtype.type(factor)

    def backward(self, grad):
        return (grad * grad.dtype.type(self.factor),)


class AddScalar(Function):
    name = "add_scalar"

    def forward(self, x, value=0.0):
        return x + x.dtype.type(value)

    def backward(self, grad):
        return (grad,)


class SmoothL1(Function):
    """0.5·x² below the knee, knee·(|x| − knee/2) above it"""

    name = "smooth_l1"

    def forward(self, x, knee=0.01):
        magnitude = np.abs(x)
        self.inside = magnitude < knee
        self.x = x
        self.knee = knee
        return np.where(self.inside, 0.5 * x * x, knee * (magnitude - 0.5 * knee)).astype(x.dtype)

    def backward(self, grad):
        local = np.where(self.inside, self.x, self.knee * np.sign(self.x))
        return (grad * local,)


# --- Shape ---

class Concat(Function):
    name = "concat"

    def forward(self, *arrays, axis=-1):
        reference = arrays[0]
        axis = axis % reference.ndim
        for other in arrays[1:]:
            if other.ndim != reference.ndim or any(
                other.shape[d] != reference.shape[d] for d in range(reference.ndim) if d != axis
            ):
                raise DimensionError(
                    f"concat: shape {list(other.shape)} incompatible with {list(reference.shape)} on axis {axis}"
                )
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Stack(Function):
    name = "stack"

    def forward(self, *arrays, axis=0):
        for other in arrays[1:]:
            _require_same_shape(self.name, arrays[0], other)
        self.axis = axis
        return np.stack(arrays, axis=axis)

    def backward(self, grad):
        count = grad.shape[self.axis]
        return tuple(np.take(grad, i, axis=self.axis) for i in range(count))


class Reshape(Function):
    name = "reshape"

    def forward(self, x, shape=None):
        self.input_shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError as error:
            raise DimensionError(f"reshape: cannot reshape {list(x.shape)} to {list(shape)}") from error

    def backward(self, grad):
        return (grad.reshape(self.input_shape),)


class GetItem(Function):
    name = "getitem"

    def forward(self, x, key=None):
        self.input_shape = x.shape
        self.dtype = x.dtype
        self.key = key
        try:
            return np.array(x[key])
        except IndexError as error:
            raise DimensionError(f"getitem: index {key!r} out of range for shape {list(x.shape)}") from error

    def backward(self, grad):
        full = np.zeros(self.input_shape, dtype=self.dtype)
        np.add.at(full, self.key, grad)
        return (full,)


class Sum(Function):
    name = "sum"

    def forward(self, x, axis=None):
        self.input_shape = x.shape
        self.axis = axis
        return np.asarray(x.sum(axis=axis))

    def backward(self, grad):
        if self.axis is not None:
            grad = np.expand_dims(grad, self.axis)
        return (np.array(np.broadcast_to(grad, self.input_shape)),)


class Mean(Function):
    name = "mean"

    def forward(self, x, axis=None):
        self.input_shape = x.shape
        self.axis = axis
        self.count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
        return np.asarray(x.mean(axis=axis))

    def backward(self, grad):
        if self.axis is not None:
            grad = np.expand_dims(grad, self.axis)
        return (np.array(np.broadcast_to(grad / self.count, self.input_shape)),)


# --- Functional API ---

def matmul(a, b):
    return Matmul.apply(a, b)


def transpose(a):
    return Transpose.apply(a)


def fully_connected(x, weight, bias=None):
    if bias is None:
        return FullyConnected.apply(x, weight)
    return FullyConnected.apply(x, weight, bias)


def conv2d(x, kernel, bias, stride=1, padding=0):
    return Conv2d.apply(x, kernel, bias, stride=stride, padding=padding)


def avg_pool2d(x, window=2):
    return AvgPool2d.apply(x, window=window)


def global_avg_pool(x):
    return GlobalAvgPool.apply(x)


def batch_norm(x, gamma, beta, state=None, training=True):
    return BatchNorm.apply(x, gamma, beta, state=state, training=training)


def relu(x):
    return Relu.apply(x)


def sigmoid(x):
    return Sigmoid.apply(x)


def tanh(x):
    return Tanh.apply(x)


def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def scale(x, factor):
    return Scale.apply(x, factor=float(factor))


def add_scalar(x, value):
    return AddScalar.apply(x, value=float(value))


def smooth_l1(x, knee=0.01):
    return SmoothL1.apply(x, knee=knee)


def concat(tensors, axis=-1):
    if not tensors:
        raise UsageError("concat needs at least one tensor")
    return Concat.apply(*tensors, axis=axis)


def stack(tensors, axis=0):
    if not tensors:
        raise UsageError("stack needs at least one tensor")
    return Stack.apply(*tensors, axis=axis)


def reshape(x, shape):
    return Reshape.apply(x, shape=tuple(shape))


def getitem(x, key):
    return GetItem.apply(x, key=key)


def tensor_sum(x, axis=None):
    return Sum.apply(x, axis=axis)


def tensor_mean(x, axis=None):
    return Mean.apply(x, axis=axis)


# --- Gradient checking ---

def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise |a − n| / max(|a|, |n|, floor)"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale_ = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale_


def _scalar_value(result):
    if isinstance(result, Tensor):
        return result.item()
    return float(result)


def numerical_gradient(f, tensor, step=1e-5, indices=None):
    """
    Central finite differences of the scalar function ``f()`` with respect to
    ``tensor``. Only ``indices`` (flat positions) are perturbed when given.
    """
    flat = tensor.data.reshape(-1)
    positions = range(flat.size) if indices is None else indices
    estimate = np.zeros(flat.size, dtype=np.float64)
    for position in positions:
        original = flat[position]
        flat[position] = original + step
        upper = _scalar_value(f())
        flat[position] = original - step
        lower = _scalar_value(f())
        flat[position] = original
        estimate[position] = (upper - lower) / (2.0 * step)
    return estimate.reshape(tensor.shape)


def gradient_check(f, tensors, step=1e-5, max_entries=None, rng=None, floor=1e-6):
    """
    Compare tape gradients of ``f()`` against central finite differences.

    ``tensors`` is a mapping name -> Tensor (or a sequence). Returns a dict of the
    maximum relative error per tensor over the checked entries.
    """
    if not isinstance(tensors, dict):
        tensors = {t.label: t for t in tensors}
    rng = rng or np.random.default_rng(0)

    for t in tensors.values():
        t.zero_grad()
    with Tape():
        loss = f()
    backward(loss)
    analytic = {name: t.grad.copy() for name, t in tensors.items()}

    errors = {}
    for name, t in tensors.items():
        if max_entries is None or t.size <= max_entries:
            indices = np.arange(t.size)
        else:
            indices = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        numeric = numerical_gradient(f, t, step=step, indices=indices).reshape(-1)
        errs = relative_error(analytic[name].reshape(-1)[indices], numeric[indices], floor=floor)
        errors[name] = float(errs.max())
        logger.debug("gradient check %s: max relative error %.3e", name, errors[name])
    return errors
