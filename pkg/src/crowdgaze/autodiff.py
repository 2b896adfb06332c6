"""Reverse-mode automatic differentiation on float64 numpy arrays.

The engine is deliberately small: a :class:`Tensor` wraps an ndarray and
remembers the operation that produced it. Calling :meth:`Tensor.backward`
on a scalar walks the recorded graph once and accumulates exact partial
derivatives into every upstream tensor flagged with ``requires_grad``.

Conventions:

* every value is float64; other dtypes are promoted on entry
* tensors are never mutated by operations; optimizers swap out ``data``
  on leaf tensors between passes
* a graph belongs to one forward pass and is discarded afterwards
* broadcasting follows numpy; gradients are summed back to the
  originating shape
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Tensor",
    "no_grad",
    "matmul",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "clip",
    "concat",
    "pool_rows",
    "grad_of_scalar",
    "finite_difference_gradients",
    "max_relative_error",
]

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense float64 array plus the bookkeeping for reverse-mode gradients."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bw")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple["Tensor", ...] = ()
        self._bw: Callable[[np.ndarray], None] | None = None

    # -- shape helpers -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        other = _as_tensor(other)
        out_data = self.data + other.data

        def bw(g):
            _acc(self, _unbroadcast(g, self.data.shape))
            _acc(other, _unbroadcast(g, other.data.shape))

        return _from_op(out_data, (self, other), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_tensor(other)
        out_data = self.data - other.data

        def bw(g):
            _acc(self, _unbroadcast(g, self.data.shape))
            _acc(other, _unbroadcast(-g, other.data.shape))

        return _from_op(out_data, (self, other), bw)

    def __rsub__(self, other):
        return _as_tensor(other).__sub__(self)

    def __mul__(self, other):
        other = _as_tensor(other)
        out_data = self.data * other.data
        a_data, b_data = self.data, other.data

        def bw(g):
            _acc(self, _unbroadcast(g * b_data, a_data.shape))
            _acc(other, _unbroadcast(g * a_data, b_data.shape))

        return _from_op(out_data, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out_data = self.data / other.data
        a_data, b_data = self.data, other.data

        def bw(g):
            _acc(self, _unbroadcast(g / b_data, a_data.shape))
            _acc(other, _unbroadcast(-g * a_data / (b_data * b_data), b_data.shape))

        return _from_op(out_data, (self, other), bw)

    def __rtruediv__(self, other):
        return _as_tensor(other).__truediv__(self)

    def __neg__(self):
        def bw(g):
            _acc(self, -g)

        return _from_op(-self.data, (self,), bw)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only constant exponents are supported")
        out_data = self.data ** exponent
        base = self.data

        def bw(g):
            _acc(self, g * exponent * base ** (exponent - 1))

        return _from_op(out_data, (self,), bw)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        out_data = self.data[key]

        def bw(g):
            gp = np.zeros_like(self.data)
            np.add.at(gp, key, g)
            _acc(self, gp)

        return _from_op(out_data, (self,), bw)

    # -- reductions / reshaping ----------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.data.shape

        def bw(g):
            if axis is None:
                _acc(self, np.full(shape, float(g)))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                _acc(self, np.broadcast_to(gg, shape).copy())

        return _from_op(out_data, (self,), bw)

    def reshape(self, *new_shape):
        if len(new_shape) == 1 and isinstance(new_shape[0], tuple):
            new_shape = new_shape[0]
        out_data = self.data.reshape(new_shape)
        shape = self.data.shape

        def bw(g):
            _acc(self, g.reshape(shape))

        return _from_op(out_data, (self,), bw)

    # -- backward pass ---------------------------------------------------
    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``grad`` of every upstream tensor.

        ``self`` must hold exactly one element. Gradients add onto any
        existing ``grad``; callers reset leaves between passes.
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._bw is not None:
                node._bw(node.grad)


# ----------------------------------------------------------------------
# construction helpers

def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _from_op(data: np.ndarray, parents: tuple[Tensor, ...], bw) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._bw = bw
    return out


def _acc(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ----------------------------------------------------------------------
# operations

def matmul(a, b) -> Tensor:
    """Matrix product of two rank-2 tensors.

    Raises ``ValueError`` when either argument is not 2-D or the inner
    dimensions disagree. Empty inner dimensions yield a zero matrix.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got shapes {a.data.shape} and {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.data.shape} x {b.data.shape}"
        )
    out_data = a.data @ b.data
    a_data, b_data = a.data, b.data

    def bw(g):
        _acc(a, g @ b_data.T)
        _acc(b, a_data.T @ g)

    return _from_op(out_data, (a, b), bw)


def relu(t) -> Tensor:
    t = _as_tensor(t)
    mask = t.data > 0.0
    out_data = np.where(mask, t.data, 0.0)

    def bw(g):
        _acc(t, g * mask)

    return _from_op(out_data, (t,), bw)


def sigmoid(t) -> Tensor:
    t = _as_tensor(t)
    out_data = expit(t.data)

    def bw(g):
        _acc(t, g * out_data * (1.0 - out_data))

    return _from_op(out_data, (t,), bw)


def tanh(t) -> Tensor:
    t = _as_tensor(t)
    out_data = np.tanh(t.data)

    def bw(g):
        _acc(t, g * (1.0 - out_data * out_data))

    return _from_op(out_data, (t,), bw)


def exp(t) -> Tensor:
    t = _as_tensor(t)
    out_data = np.exp(t.data)

    def bw(g):
        _acc(t, g * out_data)

    return _from_op(out_data, (t,), bw)


def log(t) -> Tensor:
    t = _as_tensor(t)
    out_data = np.log(t.data)
    src = t.data

    def bw(g):
        _acc(t, g / src)

    return _from_op(out_data, (t,), bw)


def clip(t, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; the gradient passes through inside the interval."""
    t = _as_tensor(t)
    out_data = np.clip(t.data, lo, hi)
    inside = (t.data >= lo) & (t.data <= hi)

    def bw(g):
        _acc(t, g * inside)

    return _from_op(out_data, (t,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, stop)
            _acc(t, g[tuple(sl)])

    return _from_op(out_data, tuple(tensors), bw)


def pool_rows(src: Tensor, pairs: Iterable[tuple[int, int]], n_rows: int) -> Tensor:
    """Scatter-add rows of ``src`` into an ``(n_rows, D)`` output.

    Each ``(j, r)`` pair adds ``src[j]`` onto output row ``r``; rows never
    referenced stay zero. Gradients route back to the contributing rows.
    """
    src = _as_tensor(src)
    pairs = list(pairs)
    out_data = np.zeros((n_rows, src.data.shape[1]))
    for j, r in pairs:
        out_data[r] += src.data[j]

    def bw(g):
        gs = np.zeros_like(src.data)
        for j, r in pairs:
            gs[j] += g[r]
        _acc(src, gs)

    return _from_op(out_data, (src,), bw)


# ----------------------------------------------------------------------
# gradient extraction and verification

def grad_of_scalar(loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients of a recorded scalar loss with respect to named leaves.

    Rejects non-scalar losses and losses that were produced outside a
    recorded pass (nothing to differentiate).
    """
    if not isinstance(loss, Tensor):
        raise TypeError("loss must be a Tensor")
    if loss.data.size != 1:
        raise ValueError("loss must be scalar")
    if not loss.requires_grad and any(p.requires_grad for p in params.values()):
        raise ValueError("loss is not connected to a recorded forward pass")
    for t in params.values():
        t.grad = None
    loss.backward()
    return {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.items()
    }


def finite_difference_gradients(
    f: Callable[[], float],
    params: Mapping[str, Tensor],
    h: float = 1e-5,
) -> dict[str, np.ndarray]:
    """Central finite differences of ``f()`` over every parameter entry.

    ``f`` is re-evaluated with individual entries displaced by ``±h``;
    recording is disabled during the probe evaluations. Parameter data is
    restored exactly afterwards.
    """
    grads: dict[str, np.ndarray] = {}
    for name, t in params.items():
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with no_grad():
                fp = float(f())
            flat[i] = orig - h
            with no_grad():
                fm = float(f())
            flat[i] = orig
            gf[i] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


def max_relative_error(
    a: Mapping[str, np.ndarray],
    b: Mapping[str, np.ndarray],
    floor: float = 1e-5,
) -> tuple[float, str]:
    """Worst elementwise relative deviation between two gradient maps.

    The denominator is floored so that two near-zero values that agree to
    machine precision do not register as a large relative error.
    """
    worst = 0.0
    worst_name = ""
    for name in a:
        num = np.abs(a[name] - b[name])
        if num.size == 0:
            continue
        den = np.maximum(np.maximum(np.abs(a[name]), np.abs(b[name])), floor)
        r = float((num / den).max())
        if r > worst:
            worst = r
            worst_name = name
    return worst, worst_name
