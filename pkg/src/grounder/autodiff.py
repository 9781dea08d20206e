"""Dense tensors with reverse-mode automatic differentiation.

Every tensor wraps a numpy array (float32 by default, float64 when the
precision mode is switched, e.g. for gradient checking). Operations on
tensors record a tape; ``backward()`` on a scalar result fills ``.grad``
on every participating tensor with ``requires_grad`` set.
"""

from __future__ import annotations

import contextlib
import math
from typing import Iterable, Sequence

import numpy as np

from .kernels import gru_seq_backward, gru_seq_forward

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class NumericalError(RuntimeError):
    """Raised when a computation produces NaN/Inf where finite values are required."""


def set_default_dtype(dtype) -> None:
    """Set the dtype used for newly created tensors ('float32' or 'float64')."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default dtype (used by the gradient-check suite)."""
    global _DEFAULT_DTYPE
    saved = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _DEFAULT_DTYPE = saved


@contextlib.contextmanager
def no_grad():
    """Disable tape recording (inference mode)."""
    global _GRAD_ENABLED
    saved = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = saved


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def zeros(shape, requires_grad=False):
        return Tensor(np.zeros(shape, dtype=_DEFAULT_DTYPE), requires_grad)

    @staticmethod
    def ones(shape, requires_grad=False):
        return Tensor(np.ones(shape, dtype=_DEFAULT_DTYPE), requires_grad)

    # -- basic introspection ---------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -_np(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, idx):
        return take(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def backward(self):
        backward(self)


class Parameter(Tensor):
    """A trainable tensor. ``name`` is assigned when registered on a Module."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name


def _np(x):
    return np.asarray(x, dtype=_DEFAULT_DTYPE)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    out._parents = parents if needs else ()
    out._backward = backward_fn if needs else None
    return out


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / structural operations
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def back(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")

    def back(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), back)


def power(a, exponent) -> Tensor:
    a = _as_tensor(a)
    exponent = float(exponent)
    data = a.data**exponent

    def back(g):
        if a.requires_grad:
            _accum(a, g * exponent * a.data ** (exponent - 1.0))

    return _make(data, (a,), back)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def back(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _make(data, (a, b), back)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    data = np.maximum(x.data, 0.0)

    def back(g):
        _accum(x, g * (x.data > 0))

    return _make(data, (x,), back)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    s = _sigmoid(x.data)

    def back(g):
        _accum(x, g * s * (1.0 - s))

    return _make(s, (x,), back)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    t = np.tanh(x.data)

    def back(g):
        _accum(x, g * (1.0 - t * t))

    return _make(t, (x,), back)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    e = np.exp(x.data)

    def back(g):
        _accum(x, g * e)

    return _make(e, (x,), back)


def log(x) -> Tensor:
    x = _as_tensor(x)
    data = np.log(x.data)

    def back(g):
        _accum(x, g / x.data)

    return _make(data, (x,), back)


def sqrt(x) -> Tensor:
    return power(x, 0.5)


def clamp(x, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only strictly inside the interval."""
    x = _as_tensor(x)
    data = np.clip(x.data, lo, hi)

    def back(g):
        _accum(x, g * ((x.data > lo) & (x.data < hi)))

    return _make(data, (x,), back)


def smooth_l1(x) -> Tensor:
    """Elementwise smooth L1: 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise."""
    x = _as_tensor(x)
    a = np.abs(x.data)
    inner = a < 1.0
    data = np.where(inner, 0.5 * x.data * x.data, a - 0.5)

    def back(g):
        _accum(x, g * np.where(inner, x.data, np.sign(x.data)))

    return _make(data, (x,), back)


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = _as_tensor(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.shape).astype(x.data.dtype, copy=False))

    return _make(np.asarray(data), (x,), back)


def tmean(x, axis=None, keepdims=False) -> Tensor:
    x = _as_tensor(x)
    n = x.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def transpose(x) -> Tensor:
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"transpose expects 2-D input, got {x.shape}")
    data = x.data.T

    def back(g):
        _accum(x, g.T)

    return _make(np.ascontiguousarray(data), (x,), back)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    data = x.data.reshape(shape)

    def back(g):
        _accum(x, g.reshape(x.shape))

    return _make(data, (x,), back)


def take(x, idx) -> Tensor:
    """Basic/advanced indexing with scatter-add backward."""
    x = _as_tensor(x)
    data = x.data[idx]

    def back(g):
        buf = np.zeros_like(x.data)
        np.add.at(buf, idx, g)
        _accum(x, buf)

    return _make(np.ascontiguousarray(data), (x,), back)


def flip_rows(x) -> Tensor:
    x = _as_tensor(x)
    data = np.ascontiguousarray(x.data[::-1])

    def back(g):
        _accum(x, g[::-1])

    return _make(data, (x,), back)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            t.shape[i] != ref[i] for i in range(len(ref)) if i != ax
        ):
            raise ShapeError(
                f"concat: shapes {[t.shape for t in tensors]} differ off axis {ax}"
            )
    data = np.concatenate([t.data for t in tensors], axis=ax)
    sizes = [t.shape[ax] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(lo, hi)
                _accum(t, g[tuple(sl)])

    return _make(data, tuple(tensors), back)


# ---------------------------------------------------------------------------
# row-structured operations
# ---------------------------------------------------------------------------


def softmax_rows(x) -> Tensor:
    """Row-wise softmax of a 2-D tensor, stabilized by row-max subtraction."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows expects 2-D input, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        _accum(x, y * (g - dot))

    return _make(y, (x,), back)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm: gain/bias {gain.shape}/{bias.shape} must be ({d},)"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + bias.data

    def back(g):
        if gain.requires_grad:
            _accum(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            _accum(bias, g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accum(x, inv * (dxhat - m1 - xhat * m2))

    return _make(data, (x, gain, bias), back)


def conv1d(seq, filters, bias, stride: int) -> Tensor:
    """Temporal 1-D convolution over a [L, d] sequence.

    ``filters`` has shape [C_f, k, d]; window w covers rows
    [w*stride, w*stride + k). Output is [num_windows, C_f] with
    num_windows = floor((L - k) / stride) + 1.
    """
    seq, filters, bias = _as_tensor(seq), _as_tensor(filters), _as_tensor(bias)
    L, d = seq.shape
    cf, k, df = filters.shape
    if df != d:
        raise ShapeError(f"conv1d: sequence width {d} != filter width {df}")
    if L < k:
        raise ShapeError(f"conv1d: sequence length {L} shorter than kernel {k}")
    if stride < 1:
        raise ValueError(f"conv1d: stride must be >= 1, got {stride}")
    num_w = (L - k) // stride + 1
    idx = np.arange(num_w)[:, None] * stride + np.arange(k)[None, :]
    win = seq.data[idx]  # [num_w, k, d]
    w2 = filters.data.reshape(cf, k * d)
    data = win.reshape(num_w, k * d) @ w2.T + bias.data

    def back(g):
        if bias.requires_grad:
            _accum(bias, g.sum(axis=0))
        if filters.requires_grad:
            _accum(filters, (g.T @ win.reshape(num_w, k * d)).reshape(cf, k, d))
        if seq.requires_grad:
            dwin = (g @ w2).reshape(num_w, k, d)
            buf = np.zeros_like(seq.data)
            np.add.at(buf, idx.ravel(), dwin.reshape(-1, d))
            _accum(seq, buf)

    return _make(data, (seq, filters, bias), back)


def gru_cell(x, h_prev, w_x, w_h, b) -> Tensor:
    """One GRU step (reset gate r, update gate z, candidate n).

    Gate layout along the projected axis is [r | z | n], each of width H:
        r = sigmoid(xp_r + hp_r)
        z = sigmoid(xp_z + hp_z)
        n = tanh(xp_n + r * hp_n)
        h = (1 - z) * n + z * h_prev
    where xp = x @ w_x + b and hp = h_prev @ w_h.
    """
    hsz = h_prev.shape[-1]
    xp = matmul(reshape(x, (1, -1)), w_x) + b
    hp = matmul(reshape(h_prev, (1, -1)), w_h)
    r = sigmoid(xp[:, :hsz] + hp[:, :hsz])
    z = sigmoid(xp[:, hsz : 2 * hsz] + hp[:, hsz : 2 * hsz])
    n = tanh(xp[:, 2 * hsz :] + r * hp[:, 2 * hsz :])
    h = (1.0 - z) * n + z * reshape(h_prev, (1, -1))
    return reshape(h, (hsz,))


def gru_sequence(xp, w_h) -> Tensor:
    """Run the recurrent GRU scan over pre-projected inputs.

    ``xp`` is [L, 3H] (the input projection x @ W_x + b for every step),
    ``w_h`` the recurrent weights [H, 3H]. Initial state is zero. The scan
    runs in the compiled kernel when available; gradients use the matching
    hand-derived backward kernel.
    """
    xp, w_h = _as_tensor(xp), _as_tensor(w_h)
    if xp.ndim != 2 or xp.shape[1] != 3 * w_h.shape[0] or w_h.shape[1] != xp.shape[1]:
        raise ShapeError(f"gru_sequence: xp {xp.shape} incompatible with w_h {w_h.shape}")
    xpd = np.ascontiguousarray(xp.data)
    whd = np.ascontiguousarray(w_h.data)
    h, r, z, n, hpn = gru_seq_forward(xpd, whd)

    def back(g):
        dxp, dwh = gru_seq_backward(whd, h, r, z, n, hpn, np.ascontiguousarray(g))
        if xp.requires_grad:
            _accum(xp, dxp)
        if w_h.requires_grad:
            _accum(w_h, dwh)

    return _make(h, (xp, w_h), back)


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; accumulates into ``.grad``."""
    if loss.size != 1:
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise RuntimeError("loss does not require grad (no recorded graph)")

    topo: list[Tensor] = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def assert_finite(x: Tensor, context: str = "") -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NumericalError(f"non-finite values in {context or 'tensor'}")
    return x


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))
