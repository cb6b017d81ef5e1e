"""Reverse-mode autodiff over dense float64 arrays.

Small on purpose: 2-D matmul, elementwise arithmetic, the activations the
agent networks need, and a record/replay Tape. Ops only record when a Tape
is active, so inference-time forwards carry no bookkeeping cost.
"""

from __future__ import annotations

import numpy as np

_FINITE_CHECKS = False


def set_finite_checks(enabled: bool) -> None:
    """Turn the per-op NaN/Inf assertion on or off (off by default)."""
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


class Tensor:
    """Dense float64 array (rank <= 3) with a gradient slot."""

    __slots__ = ("data", "grad")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 3:
            raise ValueError(f"rank {arr.ndim} tensor not supported (max 3)")
        self.data = arr
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class TapeReuseError(RuntimeError):
    """Raised when backward() runs twice on the same tape."""


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Records ops during a forward pass; replays them in reverse once.

    Recording order is a topological order of the op graph, so walking the
    node list backwards visits every node exactly once after all of its
    consumers. A tape is single-use: call backward() at most once.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple, object]] = []
        self._used = False

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("nested tapes are not supported")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, out: Tensor, parents: tuple, backward) -> None:
        self._nodes.append((out, parents, backward))

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss)=1 and accumulate grads into every parent."""
        if self._used:
            raise TapeReuseError("tape already consumed by a backward pass")
        self._used = True
        loss.grad = np.ones_like(loss.data)
        for out, parents, bwd in reversed(self._nodes):
            if out.grad is None:
                continue
            bwd(out.grad, *parents)


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor:
    if _FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite value produced by a tensor op")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE.record(out, parents, backward)
    return out


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g, a, b):
        a.accumulate(g @ b.data.T)
        b.accumulate(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g, a, b):
        a.accumulate(g)
        b.accumulate(g)

    return _make(a.data + b.data, (a, b), bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x is (B, N), b is (N,): row-broadcast add."""

    def bwd(g, x, b):
        x.accumulate(g)
        b.accumulate(g.sum(axis=0))

    return _make(x.data + b.data, (x, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g, a, b):
        a.accumulate(g)
        b.accumulate(-g)

    return _make(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g, a, b):
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    return _make(a.data * b.data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    def bwd(g, a):
        a.accumulate(g * c)

    return _make(a.data * c, (a,), bwd)


def square(a: Tensor) -> Tensor:
    def bwd(g, a):
        a.accumulate(g * (2.0 * a.data))

    return _make(a.data * a.data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def bwd(g, a):
        a.accumulate(g * (a.data > 0.0))

    return _make(out_data, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g, a, out_data=out_data):
        a.accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bwd(g, a, out_data=out_data):
        a.accumulate(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bwd(g, a, out_data=out_data):
        a.accumulate(g * out_data)

    return _make(out_data, (a,), bwd)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, *parts):
        for i, p in enumerate(parts):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            p.accumulate(g[tuple(sl)])

    return _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), bwd)


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g, a):
        a.accumulate(np.full_like(a.data, g.item() / n))

    return _make(np.asarray(a.data.mean()), (a,), bwd)


def total(a: Tensor) -> Tensor:
    def bwd(g, a):
        a.accumulate(np.full_like(a.data, g.item()))

    return _make(np.asarray(a.data.sum()), (a,), bwd)


def pick(x: Tensor, indices: np.ndarray) -> Tensor:
    """Per-row selection: out[i] = x[i, indices[i]]. x is (B, A), out (B,)."""
    rows = np.arange(x.data.shape[0])

    def bwd(g, x):
        gx = np.zeros_like(x.data)
        gx[rows, indices] = g
        x.accumulate(gx)

    return _make(x.data[rows, indices], (x,), bwd)


def log_softmax(x: Tensor) -> Tensor:
    """Row-wise log softmax for (B, A) logits."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out_data = shifted - log_z

    def bwd(g, x, out_data=out_data):
        x.accumulate(g - np.exp(out_data) * g.sum(axis=1, keepdims=True))

    return _make(out_data, (x,), bwd)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    old = a.data.shape

    def bwd(g, a, old=old):
        a.accumulate(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), bwd)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; at ties the gradient routes to `a`."""
    take_a = a.data <= b.data

    def bwd(g, a, b, take_a=take_a):
        a.accumulate(g * take_a)
        b.accumulate(g * ~take_a)

    return _make(np.where(take_a, a.data, b.data), (a, b), bwd)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)

    def bwd(g, a, inside=inside):
        a.accumulate(g * inside)

    return _make(np.clip(a.data, lo, hi), (a,), bwd)
