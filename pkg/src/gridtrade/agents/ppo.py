"""On-policy actor-critic with the clipped probability-ratio objective.

Advantages come from generalized advantage estimation over the rollout; the
actor maximizes mean min(ratio * A, clip(ratio) * A) for a few passes while
the critic regresses to the empirical returns, each with its own Adam.
"""

from __future__ import annotations

import numpy as np

from ..nn import tensor as T
from ..nn.optim import Adam
from ..nn.tensor import Tape, Tensor
from .networks import ActorCritic, GcnEncoder, state_scale
from .qlearn import Hyperparams


def clipped_objective(ratio: Tensor, advantage: Tensor, clip_ratio: float) -> Tensor:
    """Per-step surrogate min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    raw = T.mul(ratio, advantage)
    clipped = T.mul(T.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio), advantage)
    return T.minimum(raw, clipped)


def gae_advantages(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                   last_value: float, gamma: float, lam: float):
    """Backward GAE recursion; returns (advantages, returns)."""
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    next_value = last_value
    for t in range(n - 1, -1, -1):
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        running = delta + gamma * lam * not_done * running
        adv[t] = running
        next_value = values[t]
    return adv, adv + values


def ppo_update(policy: "PPOAgent", rollout: dict, hp: Hyperparams) -> tuple[float, float]:
    """Run the configured number of clipped-surrogate passes on one rollout."""
    states = rollout["states"]
    if len(states) < hp.update_interval:
        raise ValueError(
            f"rollout of {len(states)} steps is shorter than the update interval "
            f"{hp.update_interval}")
    actions = rollout["actions"]
    logp_old = rollout["logp"]
    values = policy.values_np(states)
    last_value = 0.0
    if not rollout["dones"][-1]:
        last_value = float(policy.values_np(rollout["last_state"][None, :])[0])
    adv, returns = gae_advantages(rollout["rewards"], values, rollout["dones"],
                                  last_value, hp.gamma, hp.gae_lambda)
    if hp.normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    adv_t = Tensor(adv)
    policy_loss = value_loss = float("nan")
    for _ in range(hp.epochs):
        policy.actor_opt.zero_grad()
        with Tape() as tape:
            logits = policy.actor_forward(states)
            logp = T.pick(T.log_softmax(logits), actions)
            ratio = T.exp(T.sub(logp, Tensor(logp_old)))
            objective = T.mean(clipped_objective(ratio, adv_t, hp.clip_ratio))
            loss = T.scale(objective, -1.0)
            tape.backward(loss)
        policy.actor_opt.step()
        policy_loss = float(loss.data)

        policy.critic_opt.zero_grad()
        with Tape() as tape:
            v = T.reshape(policy.critic_forward(states), (len(states),))
            vloss = T.mean(T.square(T.sub(v, Tensor(returns))))
            tape.backward(vloss)
        policy.critic_opt.step()
        value_loss = float(vloss.data)
    return policy_loss, value_loss


class PPOAgent:
    """One cluster's PPO learner over the discrete trade labels."""

    def __init__(self, state_dim: int, n_actions: int, hp: Hyperparams,
                 rng: np.random.Generator, gcn: bool = False, k: int | None = None):
        self.hp = hp
        self.rng = rng
        self.n_actions = n_actions
        self.encoder = None
        net_in = state_dim
        if gcn:
            if k is None:
                raise ValueError("gcn agents need the cluster count k")
            self.encoder = GcnEncoder(k, rng, out_features=hp.gcn_features)
            net_in = self.encoder.out_dim
        self.net = ActorCritic(net_in, n_actions, rng)
        self._scale = state_scale(k) if k is not None else np.ones(state_dim)
        actor_params = self.net.actor.parameters()
        if self.encoder is not None:
            actor_params = actor_params + self.encoder.parameters()
        self.actor_opt = Adam(actor_params, lr=hp.actor_lr)
        self.critic_opt = Adam(self.net.critic.parameters(), lr=hp.critic_lr)
        self._rollout = self._empty_rollout()
        self.last_loss = None
        self.epsilon = None  # exploration comes from the stochastic policy

    def _empty_rollout(self) -> dict:
        return {"states": [], "actions": [], "rewards": [], "dones": [], "logp": []}

    def _encode_np(self, states: np.ndarray) -> np.ndarray:
        states = states * self._scale
        if self.encoder is None:
            return states
        return self.encoder.encode(states).data

    def actor_forward(self, states: np.ndarray) -> Tensor:
        states = states * self._scale
        if self.encoder is None:
            return self.net.actor.forward(Tensor(states))
        return self.net.actor.forward(self.encoder.encode(states))

    def critic_forward(self, states: np.ndarray) -> Tensor:
        return self.net.critic.forward(Tensor(self._encode_np(states)))

    def values_np(self, states: np.ndarray) -> np.ndarray:
        return self.net.critic.forward_np(self._encode_np(states))[:, 0]

    def begin_episode(self) -> None:
        pass

    def act(self, state: np.ndarray, greedy: bool = False) -> int:
        logits = self.net.actor.forward_np(self._encode_np(state[None, :]))[0]
        if greedy:
            return int(np.argmax(logits))
        shifted = logits - logits.max()
        probs = np.exp(shifted)
        probs /= probs.sum()
        action = int(self.rng.choice(self.n_actions, p=probs))
        self._last_logp = float(np.log(probs[action]))
        return action

    def observe(self, state, action, reward, next_state, done) -> None:
        roll = self._rollout
        roll["states"].append(state)
        roll["actions"].append(action)
        roll["rewards"].append(reward)
        roll["dones"].append(1.0 if done else 0.0)
        roll["logp"].append(self._last_logp)
        if len(roll["states"]) >= self.hp.update_interval:
            batch = {
                "states": np.asarray(roll["states"]),
                "actions": np.asarray(roll["actions"], dtype=np.int64),
                "rewards": np.asarray(roll["rewards"]),
                "dones": np.asarray(roll["dones"]),
                "logp": np.asarray(roll["logp"]),
                "last_state": np.asarray(next_state),
            }
            pi_loss, _ = ppo_update(self, batch, self.hp)
            self.last_loss = pi_loss
            self._rollout = self._empty_rollout()

    def end_episode(self) -> None:
        pass

    def named_parameters(self):
        out = self.net.actor.parameters() + self.net.critic.parameters()
        if self.encoder is not None:
            out = out + self.encoder.parameters()
        return out
