"""Agent network assemblies: Q heads, actor/critic, and the graph encoder."""

from __future__ import annotations

import numpy as np

from ..nn import layers
from ..nn import tensor as T
from ..nn.tensor import Tensor


def state_scale(k: int) -> np.ndarray:
    """Fixed diagonal feature scaling for the flat market state.

    Demands and supplies arrive in kW (order 1..30), prices in $/kWh
    (order 0.1); one static rescale puts both near unit range so the small
    networks condition well. Purely an input transform inside the agents.
    """
    scale = np.empty(2 * k + 2)
    scale[:2 * k] = 0.15
    scale[2 * k:] = 6.0
    return scale


class FeedForwardQ:
    """Dense trunk 64-64 with a linear Q head."""

    def __init__(self, state_dim: int, n_actions: int, rng: np.random.Generator,
                 hidden: tuple = (64, 64), name: str = "q"):
        dims = (state_dim,) + tuple(hidden)
        self.layers = [layers.Dense(dims[i], dims[i + 1], rng, activation="relu",
                                    name=f"{name}.fc{i}") for i in range(len(hidden))]
        self.head = layers.Dense(dims[-1], n_actions, rng, name=f"{name}.head")
        self.n_actions = n_actions

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return self.head(x)

    def forward_np(self, states: np.ndarray) -> np.ndarray:
        x = states
        for layer in self.layers:
            x = layer.apply_np(x)
        return self.head.apply_np(x)

    def parameters(self):
        out = []
        for layer in self.layers:
            out += layer.parameters()
        return out + self.head.parameters()


class RecurrentQ:
    """Dense in, LSTM (or BiLSTM) core, linear Q head."""

    def __init__(self, state_dim: int, n_actions: int, rng: np.random.Generator,
                 bidirectional: bool = False, dense_width: int = 64,
                 hidden: int = 64, name: str = "q"):
        self.encoder = layers.Dense(state_dim, dense_width, rng, activation="relu",
                                    name=f"{name}.in")
        self.bidirectional = bidirectional
        if bidirectional:
            self.core = layers.BiLSTM(dense_width, hidden, rng, name=f"{name}.core")
            head_in = 2 * hidden
        else:
            self.core = layers.LSTMCell(dense_width, hidden, rng, name=f"{name}.core")
            head_in = hidden
        self.head = layers.Dense(head_in, n_actions, rng, name=f"{name}.head")
        self.hidden = hidden
        self.n_actions = n_actions

    def forward_sequence(self, xs: list[Tensor]) -> list[Tensor]:
        """Per-step Q values over a sequence of (B, state_dim) inputs."""
        encoded = [self.encoder(x) for x in xs]
        hs = self.core.run(encoded)
        return [self.head(h) for h in hs]

    # -- acting-time helpers (raw numpy, no tape) -----------------------------

    def zero_state(self):
        cell = self.core.fwd if self.bidirectional else self.core
        return (np.zeros((1, cell.hidden)), np.zeros((1, cell.hidden)))

    def step_np(self, state: np.ndarray, carry):
        """Q row for one state, carrying forward hidden state across an episode.

        For the bidirectional core this is exact for the newest step: the
        backward direction's contribution at the sequence end is a single
        cell step from a zero state on the current input.
        """
        x = self.encoder.apply_np(state[None, :])
        if not self.bidirectional:
            h, c = self.core.step_np(x, carry)
            return self.head.apply_np(h)[0], (h, c)
        h_f, c_f = self.core.fwd.step_np(x, carry)
        zeros = (np.zeros((1, self.core.bwd.hidden)),) * 2
        h_b, _ = self.core.bwd.step_np(x, zeros)
        q = self.head.apply_np(np.concatenate([h_f, h_b], axis=1))
        return q[0], (h_f, c_f)

    def parameters(self):
        return (self.encoder.parameters() + self.core.parameters()
                + self.head.parameters())


class GcnEncoder:
    """One graph-convolution layer over the fully connected cluster graph.

    The flat market state is reshaped to one row per cluster with features
    [demand, supply, DR, SMP] (prices broadcast), propagated once, and
    flattened back for the downstream network. The propagation operator is
    fixed, so it can be premixed in numpy and only the feature weights train.
    """

    N_FEATURES = 4

    def __init__(self, k: int, rng: np.random.Generator, out_features: int = 8,
                 name: str = "gcn"):
        adjacency = np.ones((k, k)) - np.eye(k)
        self.op = layers.gcn_operator(adjacency)
        self.k = k
        self.out_features = out_features
        self.W = Tensor(layers._glorot(rng, self.N_FEATURES, out_features))
        self.name = name

    @property
    def out_dim(self) -> int:
        return self.k * self.out_features

    def node_features(self, states: np.ndarray) -> np.ndarray:
        """(B, 2K+2) -> premixed (B*K, 4) node features."""
        if states.ndim == 1:
            states = states[None, :]
        b = states.shape[0]
        if states.shape[1] != 2 * self.k + 2:
            raise ValueError(f"state width {states.shape[1]} does not match K={self.k}")
        demand = states[:, :self.k]
        supply = states[:, self.k:2 * self.k]
        dr = np.repeat(states[:, 2 * self.k:2 * self.k + 1], self.k, axis=1)
        smp = np.repeat(states[:, 2 * self.k + 1:], self.k, axis=1)
        opt = self.op.T
        mixed = np.stack([demand @ opt, supply @ opt, dr @ opt, smp @ opt], axis=2)
        return mixed.reshape(b * self.k, self.N_FEATURES)

    def encode(self, states: np.ndarray) -> Tensor:
        """(B, 2K+2) -> (B, K*out_features) embedding."""
        b = states.shape[0] if states.ndim == 2 else 1
        z = T.relu(T.matmul(Tensor(self.node_features(states)), self.W))
        return T.reshape(z, (b, self.k * self.out_features))

    def parameters(self):
        return [(f"{self.name}.W", self.W)]


def gcn_apply(x: np.ndarray, adjacency: np.ndarray, w: Tensor,
              activation: str = "relu") -> Tensor:
    """Single-graph propagation act(D^-1/2 (A+I) D^-1/2  X  W) on a tape."""
    op = layers.gcn_operator(adjacency)
    if x.shape[0] != op.shape[0]:
        raise ValueError("node feature rows must match the adjacency size")
    y = T.matmul(Tensor(op @ x), w)
    return T.relu(y) if activation == "relu" else y


class ActorCritic:
    """Separate 64-64 policy and value networks."""

    def __init__(self, state_dim: int, n_actions: int, rng: np.random.Generator,
                 hidden: tuple = (64, 64)):
        self.actor = FeedForwardQ(state_dim, n_actions, rng, hidden, name="actor")
        self.critic = FeedForwardQ(state_dim, 1, rng, hidden, name="critic")
        self.n_actions = n_actions

    def logits_np(self, states: np.ndarray) -> np.ndarray:
        return self.actor.forward_np(states)

    def values_np(self, states: np.ndarray) -> np.ndarray:
        return self.critic.forward_np(states)[:, 0]
