"""Network building blocks: dense, LSTM, bidirectional LSTM, graph conv.

Every layer owns its parameter Tensors and exposes them through
``parameters()`` as (name, Tensor) pairs so optimizers and checkpoints can
address them uniformly. Batch convention is rows: x is (B, in_features).
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Dense:
    """y = x @ W + b, optionally followed by ReLU."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 activation: str | None = None, name: str = "dense"):
        if activation not in (None, "relu"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.W = Tensor(_glorot(rng, in_dim, out_dim))
        self.b = Tensor(np.zeros(out_dim))
        self.activation = activation
        self.name = name

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.W.data.shape[0]:
            raise ValueError(
                f"{self.name}: expected (B, {self.W.data.shape[0]}) input, got {x.data.shape}")
        y = T.add_bias(T.matmul(x, self.W), self.b)
        if self.activation == "relu":
            y = T.relu(y)
        return y

    def apply_np(self, x: np.ndarray) -> np.ndarray:
        """Inference-only forward on raw arrays."""
        y = x @ self.W.data + self.b.data
        return np.maximum(y, 0.0) if self.activation == "relu" else y

    def parameters(self):
        return [(f"{self.name}.W", self.W), (f"{self.name}.b", self.b)]


class LSTMCell:
    """Standard gated cell: f,i,o sigmoid, g tanh, c = f*c + i*g, h = o*tanh(c).

    Gate blocks are packed [i, f, g, o] along the last axis of W/U/b.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 name: str = "lstm"):
        self.in_dim = in_dim
        self.hidden = hidden
        self.W = Tensor(_glorot(rng, in_dim, 4 * hidden))
        self.U = Tensor(_glorot(rng, hidden, 4 * hidden))
        self.b = Tensor(np.zeros(4 * hidden))
        self.name = name

    def zero_state(self, batch: int) -> tuple[Tensor, Tensor]:
        return (Tensor(np.zeros((batch, self.hidden))),
                Tensor(np.zeros((batch, self.hidden))))

    def step(self, x: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        h_prev, c_prev = state
        if x.data.shape[1] != self.in_dim:
            raise ValueError(
                f"{self.name}: expected (B, {self.in_dim}) input, got {x.data.shape}")
        z = T.add_bias(T.add(T.matmul(x, self.W), T.matmul(h_prev, self.U)), self.b)
        H = self.hidden
        zi, zf, zg, zo = (_slice_cols(z, k * H, (k + 1) * H) for k in range(4))
        i = T.sigmoid(zi)
        f = T.sigmoid(zf)
        g = T.tanh(zg)
        o = T.sigmoid(zo)
        c = T.add(T.mul(f, c_prev), T.mul(i, g))
        h = T.mul(o, T.tanh(c))
        return h, c

    def run(self, xs: list[Tensor], state=None) -> list[Tensor]:
        """Unroll over a sequence of (B, in_dim) inputs; returns h per step."""
        if not xs:
            raise ValueError(f"{self.name}: empty sequence")
        if state is None:
            state = self.zero_state(xs[0].data.shape[0])
        outs = []
        h, c = state
        for x in xs:
            h, c = self.step(x, (h, c))
            outs.append(h)
        return outs

    def step_np(self, x: np.ndarray, state: tuple) -> tuple:
        """Inference-only cell step on raw (B, *) arrays; returns (h, c)."""
        h_prev, c_prev = state
        z = x @ self.W.data + h_prev @ self.U.data + self.b.data
        H = self.hidden
        i = 1.0 / (1.0 + np.exp(-z[:, :H]))
        f = 1.0 / (1.0 + np.exp(-z[:, H:2 * H]))
        g = np.tanh(z[:, 2 * H:3 * H])
        o = 1.0 / (1.0 + np.exp(-z[:, 3 * H:]))
        c = f * c_prev + i * g
        return o * np.tanh(c), c

    def parameters(self):
        return [(f"{self.name}.W", self.W), (f"{self.name}.U", self.U),
                (f"{self.name}.b", self.b)]


def _slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    def bwd(g, x):
        gx = np.zeros_like(x.data)
        gx[:, lo:hi] = g
        x.accumulate(gx)

    return T._make(x.data[:, lo:hi], (x,), bwd)


class BiLSTM:
    """Two LSTM cells over opposite directions, concatenated per step."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 name: str = "bilstm"):
        self.fwd = LSTMCell(in_dim, hidden, rng, name=f"{name}.fwd")
        self.bwd = LSTMCell(in_dim, hidden, rng, name=f"{name}.bwd")
        self.hidden = hidden

    def run(self, xs: list[Tensor]) -> list[Tensor]:
        """Per-step outputs of width 2*hidden, aligned with the input order."""
        if not xs:
            raise ValueError("bilstm: empty sequence")
        hs_f = self.fwd.run(xs)
        hs_b = self.bwd.run(list(reversed(xs)))
        hs_b.reverse()
        return [T.concat([hf, hb], axis=1) for hf, hb in zip(hs_f, hs_b)]

    def parameters(self):
        return self.fwd.parameters() + self.bwd.parameters()


def gcn_operator(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric renormalized propagation matrix D^-1/2 (A+I) D^-1/2."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    a_hat = a + np.eye(a.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


class GraphConv:
    """One propagation layer: act( S @ X @ W ) with fixed operator S."""

    def __init__(self, adjacency: np.ndarray, in_features: int, out_features: int,
                 rng: np.random.Generator, activation: str | None = "relu",
                 name: str = "gcn"):
        self.op = Tensor(gcn_operator(adjacency))
        self.W = Tensor(_glorot(rng, in_features, out_features))
        self.activation = activation
        self.name = name

    def __call__(self, x: Tensor) -> Tensor:
        n = self.op.data.shape[0]
        if x.data.ndim != 2 or x.data.shape[0] != n:
            raise ValueError(f"{self.name}: expected ({n}, F) node features, got {x.data.shape}")
        y = T.matmul(T.matmul(self.op, x), self.W)
        if self.activation == "relu":
            y = T.relu(y)
        return y

    def parameters(self):
        return [(f"{self.name}.W", self.W)]
