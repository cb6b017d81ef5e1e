"""Value-based agents: DQN plus the recurrent variants, with target network.

The loss is the squared Bellman residual: target r + gamma * max Q'(s') on
non-terminal transitions, plain r on terminal ones. Recurrent updates unroll
from a zeroed hidden state through a burn-in prefix that contributes no loss
terms, then accumulate the residuals over the trained suffix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn import tensor as T
from ..nn.optim import Adam
from ..nn.tensor import Tape, Tensor
from .networks import FeedForwardQ, GcnEncoder, RecurrentQ, state_scale
from .replay import ReplayBuffer


@dataclass
class Hyperparams:
    """Training knobs; the Q-family values follow the reported setup."""

    gamma: float = 0.95
    epsilon: float = 0.1
    epsilon_decay: float = 0.995
    epsilon_min: float = 0.01
    batch_size: int = 128
    learning_rate: float = 0.005
    target_sync: int = 200       # online->target copy cadence in updates; 0 = shared
    update_every: int = 4        # env steps between gradient updates
    replay_capacity: int = 10_000
    seq_len: int = 8
    burn_in: int = 4
    hidden: int = 64
    # policy-gradient side
    actor_lr: float = 0.0005
    critic_lr: float = 0.001
    clip_ratio: float = 0.1
    gae_lambda: float = 0.95
    update_interval: int = 128
    epochs: int = 3
    normalize_advantages: bool = True
    gcn_features: int = 8

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not self.epsilon_min <= self.epsilon <= 1.0:
            raise ValueError("need epsilon_min <= epsilon <= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not 0 <= self.burn_in < self.seq_len:
            raise ValueError("need 0 <= burn_in < seq_len")


@dataclass
class EpsilonSchedule:
    value: float
    decay: float
    floor: float

    def end_episode(self) -> float:
        self.value = max(self.value * self.decay, self.floor)
        return self.value


class QPolicy:
    """Online network, optional target copy, optimizer and sync bookkeeping."""

    def __init__(self, net, hp: Hyperparams, encoder: GcnEncoder | None = None):
        self.net = net
        self.encoder = encoder
        self.hp = hp
        params = net.parameters() + (encoder.parameters() if encoder else [])
        self.optimizer = Adam(params, lr=hp.learning_rate)
        self.updates = 0
        self._target_params = None
        if hp.target_sync > 0:
            self._target_params = [p.data.copy() for _, p in params]
        self._params = [p for _, p in params]

    def sync_target(self) -> None:
        if self._target_params is not None:
            for t, p in zip(self._target_params, self._params):
                t[...] = p.data

    def _swap_in_target(self):
        if self._target_params is None:
            return None
        saved = [p.data for p in self._params]
        for p, t in zip(self._params, self._target_params):
            p.data = t
        return saved

    def _swap_back(self, saved):
        if saved is not None:
            for p, s in zip(self._params, saved):
                p.data = s

    def encode_np(self, states: np.ndarray):
        """States -> network input, through the graph encoder when present."""
        if self.encoder is None:
            return states
        return self.encoder.encode(states).data

    def encode(self, states: np.ndarray) -> Tensor:
        if self.encoder is None:
            return Tensor(states)
        return self.encoder.encode(states)


def dqn_update(policy: QPolicy, batch, hp: Hyperparams) -> float:
    """One Adam step on the mean squared Bellman residual of a batch."""
    states, actions, rewards, next_states, dones = batch
    if len(actions) == 0:
        raise ValueError("empty batch")
    saved = policy._swap_in_target()
    q_next = policy.net.forward(policy.encode(next_states)).data
    policy._swap_back(saved)
    targets = rewards + hp.gamma * q_next.max(axis=1) * (1.0 - dones)

    policy.optimizer.zero_grad()
    with Tape() as tape:
        q = policy.net.forward(policy.encode(states))
        residual = T.sub(T.pick(q, actions), Tensor(targets))
        loss = T.mean(T.square(residual))
        tape.backward(loss)
    policy.optimizer.step()
    policy.updates += 1
    if hp.target_sync > 0 and policy.updates % hp.target_sync == 0:
        policy.sync_target()
    return float(loss.data)


def drqn_update(policy: QPolicy, seq_batch, hp: Hyperparams) -> float:
    """Sequence Bellman update; burn-in steps shape the hidden state only."""
    states, actions, rewards, next_states, dones = seq_batch
    b, length = actions.shape
    if length != hp.seq_len:
        raise ValueError(f"sequence length {length} != configured {hp.seq_len}")

    saved = policy._swap_in_target()
    target_qs = policy.net.forward_sequence(
        [policy.encode(next_states[:, t]) for t in range(length)])
    q_next_max = np.stack([q.data.max(axis=1) for q in target_qs], axis=1)
    policy._swap_back(saved)
    targets = rewards + hp.gamma * q_next_max * (1.0 - dones)

    policy.optimizer.zero_grad()
    with Tape() as tape:
        qs = policy.net.forward_sequence(
            [policy.encode(states[:, t]) for t in range(length)])
        losses = []
        for t in range(hp.burn_in, length):
            residual = T.sub(T.pick(qs[t], actions[:, t]), Tensor(targets[:, t]))
            losses.append(T.mean(T.square(residual)))
        loss = losses[0]
        for extra in losses[1:]:
            loss = T.add(loss, extra)
        loss = T.scale(loss, 1.0 / len(losses))
        tape.backward(loss)
    policy.optimizer.step()
    policy.updates += 1
    if hp.target_sync > 0 and policy.updates % hp.target_sync == 0:
        policy.sync_target()
    return float(loss.data)


class DQNAgent:
    """Epsilon-greedy value learner; covers DQN, DRQN and Bi-DRQN."""

    def __init__(self, state_dim: int, n_actions: int, hp: Hyperparams,
                 rng: np.random.Generator, recurrent: str | None = None,
                 gcn: bool = False, k: int | None = None):
        if recurrent not in (None, "lstm", "bilstm"):
            raise ValueError(f"unknown recurrent mode {recurrent!r}")
        self.hp = hp
        self.rng = rng
        self.n_actions = n_actions
        self.recurrent = recurrent
        encoder = None
        net_in = state_dim
        if gcn:
            if k is None:
                raise ValueError("gcn agents need the cluster count k")
            encoder = GcnEncoder(k, rng, out_features=hp.gcn_features)
            net_in = encoder.out_dim
        if recurrent is None:
            net = FeedForwardQ(net_in, n_actions, rng, hidden=(hp.hidden, hp.hidden))
        else:
            net = RecurrentQ(net_in, n_actions, rng,
                             bidirectional=(recurrent == "bilstm"),
                             dense_width=hp.hidden, hidden=hp.hidden if recurrent == "lstm"
                             else max(hp.hidden // 2, 1))
        self.policy = QPolicy(net, hp, encoder)
        self._scale = state_scale(k) if k is not None else np.ones(state_dim)
        self.replay = ReplayBuffer(hp.replay_capacity, state_dim)
        self.epsilon = EpsilonSchedule(hp.epsilon, hp.epsilon_decay, hp.epsilon_min)
        self.episode = 0
        self._carry = None
        self._steps = 0
        self.last_loss = None

    def begin_episode(self) -> None:
        self.episode += 1
        self._carry = None

    def q_row(self, state: np.ndarray) -> np.ndarray:
        x = self.policy.encode_np((state * self._scale)[None, :])
        if self.recurrent is None:
            return self.policy.net.forward_np(x)[0]
        if self._carry is None:
            self._carry = self.policy.net.zero_state()
        q, self._carry = self.policy.net.step_np(x[0], self._carry)
        return q

    def act(self, state: np.ndarray, greedy: bool = False) -> int:
        q = self.q_row(state)
        if not greedy and self.rng.random() < self.epsilon.value:
            return int(self.rng.integers(self.n_actions))
        return int(np.argmax(q))

    def observe(self, state, action, reward, next_state, done) -> None:
        self.replay.push(state, action, reward, next_state, done, self.episode)
        self._steps += 1
        if self._steps % self.hp.update_every != 0:
            return
        if self.recurrent is None:
            if self.replay.size >= self.hp.batch_size:
                states, actions, rewards, next_states, dones = \
                    self.replay.sample(self.hp.batch_size, self.rng)
                batch = (states * self._scale, actions, rewards,
                         next_states * self._scale, dones)
                self.last_loss = dqn_update(self.policy, batch, self.hp)
        else:
            n_seq = max(self.hp.batch_size // self.hp.seq_len, 1)
            if self.replay.size >= self.hp.batch_size + self.hp.seq_len:
                states, actions, rewards, next_states, dones = \
                    self.replay.sample_sequences(n_seq, self.hp.seq_len, self.rng)
                seqs = (states * self._scale, actions, rewards,
                        next_states * self._scale, dones)
                self.last_loss = drqn_update(self.policy, seqs, self.hp)

    def end_episode(self) -> None:
        self.epsilon.end_episode()

    def named_parameters(self):
        out = self.policy.net.parameters()
        if self.policy.encoder is not None:
            out = out + self.policy.encoder.parameters()
        return out
