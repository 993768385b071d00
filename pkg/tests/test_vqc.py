import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_fd, dense_circuit_z
from qbilevel import vqc
from qbilevel.rng import stream


def make(L=2, n_actions=3, tie=True, seed=0):
    cfg = vqc.VqcConfig(n_actions=n_actions, n_layers=L, tie_ry_rz=tie)
    return cfg, vqc.init_params(cfg, stream(seed, "vqc"))


class TestEncode:
    def test_range_points(self):
        cfg = vqc.VqcConfig(n_actions=2, feature_ranges=((0, 10),) * 6)
        np.testing.assert_allclose(vqc.encode([0, 10, 5, -3, 13, 2.5], cfg), [0, math.pi, math.pi / 2, 0, math.pi, math.pi / 4])

    def test_non_finite(self):
        cfg = vqc.VqcConfig(n_actions=2)
        with pytest.raises(ValueError):
            vqc.encode([0, 0, 0, 0, 0, np.nan], cfg)

    @given(a=st.floats(-2, 3), b=st.floats(-2, 3))
    def test_monotone(self, a, b):
        cfg = vqc.VqcConfig(n_actions=2)
        lo, hi = sorted((a, b))
        assert vqc.encode([lo] * 6, cfg)[0] <= vqc.encode([hi] * 6, cfg)[0]


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            vqc.VqcConfig(n_actions=1)
        with pytest.raises(ValueError):
            vqc.VqcConfig(n_actions=2, feature_ranges=((1, 1),) * 6)
        with pytest.raises(ValueError):
            vqc.VqcConfig(n_actions=2, feature_ranges=((0, 1),) * 5)

    def test_angle_shapes(self):
        assert make(L=3)[1].angles.shape == (3, 6)
        assert make(L=3, tie=False)[1].angles.shape == (3, 6, 2)


class TestForward:
    def test_zero_layers_ground_state(self):
        cfg = vqc.VqcConfig(n_actions=2, n_layers=0)
        params = vqc.VqcParams(np.zeros((0, 6)), np.array([[1.0, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0]]))
        np.testing.assert_allclose(vqc.forward(np.zeros(6), params, cfg), [1.0, 0.0])

    def test_zero_weights(self):
        cfg, params = make()
        params.obs_weights[:] = 0
        np.testing.assert_array_equal(vqc.forward(np.full(6, 1.0), params, cfg), 0)

    @pytest.mark.parametrize("tie", [True, False])
    def test_dense_oracle(self, tie):
        cfg, params = make(L=2, tie=tie, seed=3)
        enc = stream(4).uniform(0, math.pi, 6)
        ry = params.angles if tie else params.angles[..., 0]
        rz = params.angles if tie else params.angles[..., 1]
        expected = params.obs_weights @ dense_circuit_z(enc, ry, rz)
        np.testing.assert_allclose(vqc.forward(enc, params, cfg), expected, atol=1e-10)

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=25, deadline=None)
    def test_bound(self, seed):
        cfg, params = make(seed=seed)
        q = vqc.forward(stream(seed, "x").uniform(0, math.pi, 6), params, cfg)
        assert np.all(np.abs(q) <= np.abs(params.obs_weights).sum(axis=1) + 1e-12)

    def test_shape_mismatch(self):
        cfg, params = make(L=2)
        with pytest.raises(ValueError):
            vqc.forward(np.zeros(6), vqc.VqcParams(np.zeros((1, 6)), params.obs_weights), cfg)


class TestGrad:
    def test_zero_residual(self):
        cfg, params = make()
        g = vqc.grad(np.ones(6), params, cfg, 1, 0.0)
        assert not g.angles.any() and not g.obs_weights.any()

    def test_zero_layers_weight_gradient(self):
        cfg, params = make(L=0)
        enc = stream(1).uniform(0, math.pi, 6)
        g = vqc.grad(enc, params, cfg, 2, 0.5)
        assert g.angles.size == 0
        expected = np.zeros_like(params.obs_weights)
        expected[2] = -0.5 * np.cos(enc)
        np.testing.assert_allclose(g.obs_weights, expected, atol=1e-14)

    @pytest.mark.parametrize("tie,L", [(True, 1), (True, 2), (False, 2)])
    def test_finite_differences(self, tie, L):
        cfg, params = make(L=L, tie=tie, seed=L)
        enc = stream(L, "enc").uniform(0, math.pi, 6)
        action = 1
        g = vqc.grad(enc, params, cfg, action, -1.0)  # gradient of Q_action itself

        def q_of(flat):
            return vqc.forward(enc, params.with_flat(flat), cfg)[action]

        np.testing.assert_allclose(g.flat(), central_fd(q_of, params.flat()), atol=1e-8)

    def test_batch_loss_gradient(self):
        cfg, params = make(L=2, seed=5)
        rng = stream(6)
        enc = rng.uniform(0, math.pi, (4, 6))
        actions = np.array([0, 2, 2, 1])
        targets = rng.normal(size=4)
        loss, g = vqc.loss_and_grad(enc, params, cfg, actions, targets)

        def half_mse(flat):
            q = vqc.forward_batch(enc, params.with_flat(flat), cfg)[np.arange(4), actions]
            return 0.5 * np.mean((targets - q) ** 2)

        q = vqc.forward_batch(enc, params, cfg)[np.arange(4), actions]
        assert loss == pytest.approx(np.mean((targets - q) ** 2))
        np.testing.assert_allclose(g.flat(), central_fd(half_mse, params.flat()), atol=1e-8)

    def test_bad_action(self):
        cfg, params = make()
        with pytest.raises(ValueError):
            vqc.grad(np.zeros(6), params, cfg, 3, 1.0)


class TestUpdate:
    def test_identity_cases(self):
        cfg, params = make()
        g = vqc.grad(np.ones(6), params, cfg, 0, 1.0)
        zero = vqc.VqcParams(np.zeros_like(params.angles), np.zeros_like(params.obs_weights))
        np.testing.assert_array_equal(vqc.apply_update(params, zero, 0.3).flat(), params.flat())
        np.testing.assert_array_equal(vqc.apply_update(params, g, 0.0).flat(), params.flat())
        with pytest.raises(ValueError):
            vqc.apply_update(params, g, -0.1)

    def test_scalar_descent(self):
        p = vqc.VqcParams(np.array([[0.0]]), np.array([[0.0], [0.0]]))
        losses = []
        for _ in range(100):
            losses.append((p.angles[0, 0] - 3.0) ** 2)
            g = vqc.VqcParams(2 * (p.angles - 3.0), np.zeros((2, 1)))
            p = vqc.apply_update(p, g, 0.1)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_one_parameter_circuit_converges(self):
        # one qubit, feature at its minimum: <Z> = cos(omega), the Rz factor is invisible
        cfg = vqc.VqcConfig(n_actions=2, n_layers=1, n_qubits=1, feature_ranges=((0, 1),))
        p = vqc.VqcParams(np.array([[0.2]]), np.array([[1.0], [1.0]]))
        y = math.cos(1.0)
        first = None
        for _ in range(500):
            loss, g = vqc.loss_and_grad(np.zeros((1, 1)), p, cfg, [0], [y])
            first = loss if first is None else first
            p = vqc.VqcParams(p.angles - 0.5 * g.angles, p.obs_weights)
        assert loss < 1e-4 * first


def test_checkpoint_round_trip():
    cfg, params = make(L=2, tie=False)
    restored, saved = vqc.from_json(vqc.to_json(params, cfg), cfg)
    assert saved == cfg
    np.testing.assert_array_equal(restored.flat(), params.flat())
    other = vqc.VqcConfig(n_actions=3, n_layers=1)
    with pytest.raises(ValueError):
        vqc.from_json(vqc.to_json(params, cfg), other)
