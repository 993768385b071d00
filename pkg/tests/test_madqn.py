import numpy as np
import pytest

from harness import toy_optimal_policy, train_toy
from oracles import toy_mdp, value_iteration
from qbilevel import madqn, mlp
from qbilevel.market import GencoSpec, MechanismParams
from qbilevel.rng import stream


class FixedQ:
    """Q-function stub returning constant values; records updates."""

    kind = "fixed"

    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)
        self.n_actions = len(self.q)
        self.updates = 0

    def init_params(self, rng):
        return mlp.MlpParams([np.zeros((self.n_actions, 6))], [self.q.copy()])

    def q_values(self, features, params):
        return np.tile(params.biases[0], (np.atleast_2d(features).shape[0], 1))

    def loss_and_grad(self, features, params, actions, targets):
        return mlp.loss_and_grad(features, params, actions, targets)

    def apply_update(self, params, gradient, lr):
        self.updates += 1
        return mlp.apply_update(params, gradient, lr)


def agent(q=(0.0, 1.0), **cfg):
    cfg = madqn.AgentConfig(**{"batch_size": 4, "replay_capacity": 8, "n_bid_levels": len(q) - 1, **cfg})
    return madqn.DqnAgent(FixedQ(q), cfg, stream(0))


class TestActionSpace:
    def test_grid(self):
        acts = madqn.action_space(MechanismParams(100), 10)
        assert acts[0] is None
        np.testing.assert_allclose(acts[1:], np.arange(10, 101, 10))

    def test_single_level(self):
        assert madqn.action_space(MechanismParams(80), 1) == [None, 80]

    @pytest.mark.parametrize("k", [1, 3, 10, 17])
    def test_length(self, k):
        assert len(madqn.action_space(MechanismParams(55.5), k)) == k + 1

    def test_bids(self):
        spec = GencoSpec(2, "thermal", 60, 10)
        mech = MechanismParams(200)
        assert madqn.action_to_bid(0, spec, mech, 10).participate is False
        bid = madqn.action_to_bid(10, spec, mech, 10)
        assert (bid.genco_id, bid.price, bid.quantity) == (2, 200, 60)
        assert madqn.action_to_bid(3, spec, mech, 10).price == pytest.approx(60)


class TestSelect:
    def test_greedy(self):
        a = agent(q=(0.1, 0.9, 0.2), eps_start=0.0)
        assert a.select_action(np.zeros(6), stream(1)) == 1

    def test_tie_lowest_index(self):
        a = agent(q=(0.5, 0.5, 0.5), eps_start=0.0)
        assert a.select_action(np.zeros(6), stream(1)) == 0

    def test_uniform_exploration(self):
        k = 4
        a = agent(q=(0.0,) * k, eps_start=1.0)
        rng = stream(2)
        counts = np.bincount([a.select_action(np.zeros(6), rng) for _ in range(10_000)], minlength=k)
        p = 1 / k
        sigma = np.sqrt(10_000 * p * (1 - p))
        assert np.all(np.abs(counts - 10_000 * p) <= 3 * sigma)


class TestTargets:
    def test_bootstrap(self):
        assert madqn.compute_targets([1.0], [[0.5, 2.0]], [False], 0.9)[0] == pytest.approx(2.8)

    def test_terminal(self):
        assert madqn.compute_targets([5.0], [[10.0, 20.0]], [True], 0.9)[0] == 5.0

    def test_zero_gamma(self):
        np.testing.assert_array_equal(madqn.compute_targets([1.0, -2.0], [[3, 4], [5, 6]], [False, False], 0.0), [1, -2])

    def test_agent_uses_target_params(self):
        a = agent(q=(0.0, 2.0), gamma=0.9)
        a.params = a.qfunc.init_params(None)
        a.params.biases[0][:] = 100.0  # online moves; target stays
        exp = madqn.Experience(np.zeros(6), 0, 1.0, np.zeros(6), False)
        assert a.compute_target(exp) == pytest.approx(2.8)


class TestReplay:
    def test_fifo_capacity(self):
        buf = madqn.ReplayBuffer(3)
        for i in range(5):
            buf.add(i)
        assert len(buf) == 3 and list(buf) == [2, 3, 4]

    def test_sample_distinct(self):
        buf = madqn.ReplayBuffer(10)
        for i in range(10):
            buf.add(i)
        s = buf.sample(stream(0), 10)
        assert sorted(s) == list(range(10))


class TestTrainStep:
    def test_short_buffer_noop(self):
        a = agent()
        before = a.params.copy()
        for _ in range(3):
            a.remember(np.zeros(6), 0, 1.0, np.zeros(6))
        assert a.train_step(stream(0)) is None
        assert a.qfunc.updates == 0 and a.steps == 0
        np.testing.assert_array_equal(a.params.flat(), before.flat())

    def test_consistent_targets_leave_params(self):
        a = agent(q=(0.5, 1.0), gamma=0.0)
        for _ in range(4):
            a.remember(np.ones(6), 1, 1.0, np.ones(6), True)
        before = a.params.flat()
        assert a.train_step(stream(0)) == 0.0
        np.testing.assert_array_equal(a.params.flat(), before)

    def test_target_staleness_and_sync(self):
        a = agent(target_sync=3, lr=0.1)
        init = a.target_params.flat()
        for _ in range(8):
            a.remember(np.ones(6), 1, 5.0, np.ones(6))
        rng = stream(0)
        history = []
        for step in range(1, 8):
            a.train_step(rng)
            history.append(a.target_params.flat())
            if step < 3:
                np.testing.assert_array_equal(a.target_params.flat(), init)
        changed = [s + 1 for s in range(1, 7) if not np.array_equal(history[s], history[s - 1])]
        assert changed == [3, 6]
        np.testing.assert_array_equal(a.target_params.flat(), history[5])

    def test_sync_idempotent(self):
        a = agent()
        a.params = a.params.with_flat(a.params.flat() + 1)
        a.sync_target().sync_target()
        x = np.ones(6)
        np.testing.assert_array_equal(a.qfunc.q_values(x, a.target_params), a.qfunc.q_values(x, a.params))

    def test_epsilon_schedule(self):
        cfg = madqn.AgentConfig(eps_start=1.0, eps_end=0.05, eps_decay_steps=100)
        assert madqn.epsilon_at(cfg, 0) == 1.0
        assert madqn.epsilon_at(cfg, 50) == pytest.approx(0.525)
        assert madqn.epsilon_at(cfg, 1000) == pytest.approx(0.05)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            madqn.AgentConfig(gamma=1.0)
        with pytest.raises(ValueError):
            madqn.AgentConfig(replay_capacity=4, batch_size=8)
        with pytest.raises(ValueError):
            madqn.AgentConfig(n_bid_levels=0)
        assert madqn.AgentConfig().n_actions == 11


@pytest.mark.parametrize("backend", ["mlp", "vqc"])
def test_toy_mdp_optimal(backend):
    _, policy = train_toy(backend, seed=0)
    assert policy == toy_optimal_policy()


def test_reward_scaling_keeps_argmax():
    reward, nxt = toy_mdp()
    for scale in (0.5, 2.0, 1000.0):
        q = value_iteration(reward / scale, nxt, 0.5)
        np.testing.assert_array_equal(np.argmax(q, axis=1), toy_optimal_policy())
    _, policy = train_toy("mlp", seed=1, reward_scale=2.0)
    assert policy == toy_optimal_policy()


def test_telemetry_csv(tmp_path):
    rows = [{"episode": 0, "agent": 1, "mean_loss": None, "epsilon": 0.5, "mean_reward": 2.0}]
    madqn.write_telemetry(rows, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines() == [
        "episode,agent,mean_loss,epsilon,mean_reward",
        "0,1,,0.5,2.0",
    ]
