import numpy as np
import pytest

from gridtrade.agents import DQNAgent, GcnEncoder, dqn_update, drqn_update
from gridtrade.agents.networks import FeedForwardQ, RecurrentQ
from gridtrade.agents.qlearn import EpsilonSchedule, Hyperparams, QPolicy
from gridtrade.nn import Tensor, grad_check
from gridtrade.nn import tensor as T


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(gamma=1.0)
    with pytest.raises(ValueError):
        Hyperparams(epsilon=0.005, epsilon_min=0.01)
    with pytest.raises(ValueError):
        Hyperparams(batch_size=0)
    with pytest.raises(ValueError):
        Hyperparams(burn_in=8, seq_len=8)


def test_epsilon_schedule_decay_and_floor():
    eps = EpsilonSchedule(0.1, 0.995, 0.01)
    assert eps.end_episode() == pytest.approx(0.0995, abs=1e-15)
    for _ in range(2000):
        eps.end_episode()
    assert eps.value == 0.01


def test_act_greedy_and_uniform():
    hp = Hyperparams()
    agent = DQNAgent(4, 3, hp, np.random.default_rng(0), k=1)
    state = np.array([0.3, 0.1, 0.9, 0.2])
    agent.epsilon.value = 0.0
    q = agent.q_row(state)
    assert agent.act(state) == int(np.argmax(q))

    agent.epsilon.value = 1.0
    counts = np.zeros(3)
    for _ in range(3000):
        counts[agent.act(state)] += 1
    assert np.all(np.abs(counts / 3000 - 1 / 3) < 0.05)


def _fixture_policy():
    """Two one-hot states; online and target Q tables set by hand."""
    hp = Hyperparams(batch_size=2, learning_rate=0.0, target_sync=1000)
    net = FeedForwardQ(2, 2, np.random.default_rng(0), hidden=())
    policy = QPolicy(net, hp)
    net.head.W.data = np.array([[2.5, 0.0], [0.6, 0.0]])
    net.head.b.data = np.zeros(2)
    # target net: Q(s:=e1) = (2.0, 1.7) -> max 2.0
    policy._target_params[0][...] = np.array([[2.0, 1.7], [0.0, 0.0]])
    policy._target_params[1][...] = np.zeros(2)
    return policy, hp


def test_dqn_update_frozen_fixture_loss():
    """target A: 1 + 0.95*2 = 2.9 vs Q 2.5; target B terminal: 1 vs 0.6."""
    policy, hp = _fixture_policy()
    states = np.array([[1.0, 0.0], [0.0, 1.0]])
    actions = np.array([0, 0])
    rewards = np.array([1.0, 1.0])
    next_states = np.array([[1.0, 0.0], [1.0, 0.0]])
    dones = np.array([0.0, 1.0])
    loss = dqn_update(policy, (states, actions, rewards, next_states, dones), hp)
    assert loss == pytest.approx(0.16, abs=1e-12)


def test_dqn_update_terminal_target_is_reward():
    policy, hp = _fixture_policy()
    states = np.array([[0.0, 1.0], [0.0, 1.0]])
    actions = np.array([0, 0])
    rewards = np.array([1.0, 1.0])
    next_states = states
    dones = np.array([1.0, 1.0])
    loss = dqn_update(policy, (states, actions, rewards, next_states, dones), hp)
    assert loss == pytest.approx((1.0 - 0.6) ** 2, abs=1e-12)


def test_dqn_update_gamma_zero():
    policy, hp = _fixture_policy()
    hp_zero = Hyperparams(batch_size=2, learning_rate=0.0, gamma=0.0, target_sync=1000)
    states = np.array([[1.0, 0.0], [0.0, 1.0]])
    batch = (states, np.array([0, 0]), np.array([1.0, 1.0]), states, np.array([0.0, 0.0]))
    loss = dqn_update(policy, batch, hp_zero)
    assert loss == pytest.approx(((1 - 2.5) ** 2 + (1 - 0.6) ** 2) / 2, abs=1e-12)


def test_dqn_update_rejects_empty_batch():
    policy, hp = _fixture_policy()
    empty = (np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros(0), np.zeros((0, 2)),
             np.zeros(0))
    with pytest.raises(ValueError):
        dqn_update(policy, empty, hp)


def test_target_network_sync():
    hp = Hyperparams(target_sync=3, learning_rate=0.01, batch_size=2)
    net = FeedForwardQ(2, 2, np.random.default_rng(1), hidden=(4,))
    policy = QPolicy(net, hp)
    states = np.random.default_rng(0).normal(size=(2, 2))
    batch = (states, np.array([0, 1]), np.array([1.0, -1.0]), states, np.array([0.0, 0.0]))
    for _ in range(3):
        dqn_update(policy, batch, hp)
    for target, (_, param) in zip(policy._target_params, net.parameters()):
        assert np.array_equal(target, param.data)


def test_shared_target_mode():
    hp = Hyperparams(target_sync=0, learning_rate=0.0, batch_size=1)
    net = FeedForwardQ(2, 2, np.random.default_rng(1), hidden=())
    net.head.W.data = np.array([[1.0, 3.0], [0.0, 0.0]])
    net.head.b.data = np.zeros(2)
    policy = QPolicy(net, hp)
    states = np.array([[1.0, 0.0]])
    batch = (states, np.array([0]), np.array([0.0]), states, np.array([0.0]))
    loss = dqn_update(policy, batch, hp)
    # target = 0 + 0.95 * max(online Q) = 0.95*3, prediction 1.0
    assert loss == pytest.approx((0.95 * 3.0 - 1.0) ** 2, abs=1e-12)


def test_drqn_length_one_equals_flat_bellman():
    rng = np.random.default_rng(3)
    hp = Hyperparams(seq_len=1, burn_in=0, learning_rate=0.0, target_sync=0,
                     batch_size=4)
    net = RecurrentQ(3, 2, rng, dense_width=4, hidden=4)
    policy = QPolicy(net, hp)
    states = rng.normal(size=(4, 1, 3))
    actions = rng.integers(0, 2, size=(4, 1))
    rewards = rng.normal(size=(4, 1))
    next_states = rng.normal(size=(4, 1, 3))
    dones = np.zeros((4, 1))
    loss = drqn_update(policy, (states, actions, rewards, next_states, dones), hp)

    def q_from_zero(batch_states):
        h, c = net.core.step_np(net.encoder.apply_np(batch_states),
                                (np.zeros((4, 4)), np.zeros((4, 4))))
        return net.head.apply_np(h)

    q_next = q_from_zero(next_states[:, 0])
    targets = rewards[:, 0] + hp.gamma * q_next.max(axis=1)
    q = q_from_zero(states[:, 0])[np.arange(4), actions[:, 0]]
    assert loss == pytest.approx(np.mean((targets - q) ** 2), abs=1e-12)


def test_drqn_zero_recurrent_weights_are_feedforward():
    rng = np.random.default_rng(4)
    net = RecurrentQ(3, 2, rng, dense_width=4, hidden=4)
    net.core.W.data[:] = 0.0
    net.core.U.data[:] = 0.0
    net.core.b.data[:] = 0.0
    x = rng.normal(size=(1, 3))
    q1, _ = net.step_np(x[0], net.zero_state())
    q2, _ = net.step_np(x[0], net.zero_state())
    assert np.array_equal(q1, q2)          # h stays 0, purely feedforward
    carry = net.zero_state()
    _, carry = net.step_np(rng.normal(size=3), carry)
    q3, _ = net.step_np(x[0], carry)
    assert np.allclose(q1, q3, atol=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_drqn_eight_step_unroll_gradient(seed):
    rng = np.random.default_rng(seed)
    net = RecurrentQ(2, 2, rng, dense_width=3, hidden=3)
    xs = [Tensor(rng.normal(size=(2, 2))) for _ in range(8)]

    def loss():
        qs = net.forward_sequence(xs)
        total = T.total(qs[0])
        for q in qs[1:]:
            total = T.add(total, T.total(q))
        return total

    params = [p for _, p in net.parameters()]
    assert grad_check(loss, params, step=1e-5) < 1e-4


def test_drqn_update_checks_sequence_length():
    hp = Hyperparams(seq_len=8, burn_in=4)
    net = RecurrentQ(3, 2, np.random.default_rng(0))
    policy = QPolicy(net, hp)
    bad = (np.zeros((2, 4, 3)), np.zeros((2, 4), dtype=int), np.zeros((2, 4)),
           np.zeros((2, 4, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        drqn_update(policy, bad, hp)


def test_tabular_q_sanity_converges():
    """Single-state MDP with reward 1: Q -> 1/(1-gamma)."""
    gamma, alpha = 0.95, 0.05
    q = 0.0
    for _ in range(10_000):
        q = q + alpha * ((1.0 + gamma * q) - q)
    assert abs(q - 1.0 / (1.0 - gamma)) < 1e-3


def test_gcn_encoder_degenerate_single_cluster():
    rng = np.random.default_rng(0)
    enc = GcnEncoder(1, rng, out_features=3)
    state = np.array([2.0, 1.0, 0.1, 0.08])
    out = enc.encode(state[None, :]).data
    manual = np.maximum(state[None, :] @ enc.W.data, 0.0)
    assert np.allclose(out, manual.reshape(1, 3), atol=1e-14)


def test_gcn_encoder_cluster_permutation():
    rng = np.random.default_rng(1)
    k = 4
    enc = GcnEncoder(k, rng, out_features=2)
    state = np.concatenate([rng.random(k), rng.random(k), [0.1, 0.08]])
    perm = np.array([3, 1, 0, 2])
    permuted = np.concatenate([state[:k][perm], state[k:2 * k][perm], state[2 * k:]])
    base = enc.encode(state[None, :]).data.reshape(k, 2)
    moved = enc.encode(permuted[None, :]).data.reshape(k, 2)
    assert np.allclose(moved, base[perm], atol=1e-12)


def test_gcn_encoder_zero_weights():
    enc = GcnEncoder(3, np.random.default_rng(0), out_features=2)
    enc.W.data[:] = 0.0
    out = enc.encode(np.ones((1, 8))).data
    assert np.array_equal(out, np.zeros((1, 6)))


def test_gcn_encoder_rejects_bad_width():
    enc = GcnEncoder(3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        enc.encode(np.ones((1, 5)))


def test_full_network_losses_pass_gradient_check():
    """Bellman-style losses through each network shape stay within 1e-4."""
    for seed in range(3):
        rng = np.random.default_rng(seed)
        states = rng.normal(size=(3, 4))
        targets = Tensor(rng.normal(size=3))
        actions = rng.integers(0, 2, size=3)

        ff = FeedForwardQ(4, 2, rng, hidden=(6, 6))

        def ff_loss():
            q = ff.forward(Tensor(states))
            return T.mean(T.square(T.sub(T.pick(q, actions), targets)))

        assert grad_check(ff_loss, [p for _, p in ff.parameters()], step=1e-5) < 1e-4

        rec = RecurrentQ(4, 2, rng, dense_width=4, hidden=3)
        seq = [Tensor(rng.normal(size=(3, 4))) for _ in range(3)]

        def rec_loss():
            qs = rec.forward_sequence(seq)
            return T.mean(T.square(T.sub(T.pick(qs[-1], actions), targets)))

        assert grad_check(rec_loss, [p for _, p in rec.parameters()], step=1e-5) < 1e-4
