"""Variational quantum circuit Q-function.

Circuit per evaluation (qubit count n, layers L):

    |0..0>  ->  Rx(s_i) on each qubit            (feature encoding)
            ->  L x [ Ry(w_li) then Rz(w_li) on each qubit, CNOT ladder ]
            ->  Q_a = sum_i W[a, i] <Z_i>

With ``tie_ry_rz`` (the default) one angle drives both rotations of a
qubit in a layer; otherwise Ry and Rz angles are independent.

Angle gradients use the two-term parameter-shift rule applied to every
gate occurrence separately. A tied angle feeds two gates, so its gradient
is the sum of both occurrences' shift terms.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import circuit_z

HALF_PI = 0.5 * math.pi


def _default_ranges():
    return ((0.0, 1.0),) * 6


@dataclass(frozen=True)
class VqcConfig:
    n_actions: int
    n_layers: int = 2
    n_qubits: int = 6
    feature_ranges: tuple = field(default_factory=_default_ranges)
    tie_ry_rz: bool = True

    def __post_init__(self):
        ranges = tuple(tuple(float(v) for v in r) for r in self.feature_ranges)
        object.__setattr__(self, "feature_ranges", ranges)
        if self.n_actions < 2:
            raise ValueError("n_actions must be at least 2")
        if self.n_layers < 0:
            raise ValueError("n_layers must be non-negative")
        if not 1 <= self.n_qubits <= 12:
            raise ValueError("n_qubits must lie in [1, 12]")
        if len(ranges) != self.n_qubits:
            raise ValueError(f"need {self.n_qubits} feature ranges, got {len(ranges)}")
        for lo, hi in ranges:
            if not lo < hi:
                raise ValueError(f"feature range ({lo}, {hi}) must have min < max")

    @property
    def angle_shape(self):
        if self.tie_ry_rz:
            return (self.n_layers, self.n_qubits)
        return (self.n_layers, self.n_qubits, 2)

    def to_dict(self):
        return {
            "n_actions": self.n_actions,
            "n_layers": self.n_layers,
            "n_qubits": self.n_qubits,
            "feature_ranges": [list(r) for r in self.feature_ranges],
            "tie_ry_rz": self.tie_ry_rz,
        }


@dataclass
class VqcParams:
    angles: np.ndarray
    obs_weights: np.ndarray

    def copy(self):
        return VqcParams(self.angles.copy(), self.obs_weights.copy())

    def check(self, config):
        if self.angles.shape != config.angle_shape:
            raise ValueError(f"angles shape {self.angles.shape} != {config.angle_shape}")
        if self.obs_weights.shape != (config.n_actions, config.n_qubits):
            raise ValueError(
                f"obs_weights shape {self.obs_weights.shape} != "
                f"{(config.n_actions, config.n_qubits)}"
            )

    def flat(self):
        return np.concatenate([self.angles.ravel(), self.obs_weights.ravel()])

    def with_flat(self, vector):
        k = self.angles.size
        return VqcParams(
            np.asarray(vector[:k], dtype=np.float64).reshape(self.angles.shape),
            np.asarray(vector[k:], dtype=np.float64).reshape(self.obs_weights.shape),
        )


def init_params(config, rng, weight_scale=1.0):
    angles = rng.uniform(-math.pi, math.pi, size=config.angle_shape)
    weights = rng.uniform(-weight_scale, weight_scale, size=(config.n_actions, config.n_qubits))
    return VqcParams(angles, weights)


def encode(features, config):
    """Min-max map each feature onto [0, pi], clamped at the range ends.

    Accepts one feature vector or a (B, n) batch.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != config.n_qubits:
        raise ValueError(f"expected {config.n_qubits} features, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    lo = np.array([r[0] for r in config.feature_ranges])
    hi = np.array([r[1] for r in config.feature_ranges])
    return np.clip(math.pi * (x - lo) / (hi - lo), 0.0, math.pi)


def _layer_angles(params, config):
    if config.tie_ry_rz:
        return params.angles, params.angles
    return params.angles[..., 0], params.angles[..., 1]


def z_batch(encoded, params, config):
    """Per-qubit <Z> for a (B, n) batch of encoded states."""
    enc = np.atleast_2d(encoded)
    ry, rz = _layer_angles(params, config)
    b = enc.shape[0]
    return circuit_z(
        enc,
        np.broadcast_to(ry, (b,) + ry.shape),
        np.broadcast_to(rz, (b,) + rz.shape),
    )


def forward_batch(encoded, params, config):
    return z_batch(encoded, params, config) @ params.obs_weights.T


def forward(encoded, params, config):
    """Q-values for a single encoded state."""
    params.check(config)
    return forward_batch(np.asarray(encoded)[None, :], params, config)[0]


def _shift_table(config):
    # (2G, L, n) angle offsets for Ry and Rz: occurrence g = (gate, layer, qubit),
    # rows 2g and 2g+1 carry the +pi/2 and -pi/2 shift of that single gate.
    L, n = config.n_layers, config.n_qubits
    g = 2 * L * n
    dy = np.zeros((g, 2, L, n))
    dz = np.zeros((g, 2, L, n))
    for gate, table in enumerate((dy, dz)):
        for layer in range(L):
            for q in range(n):
                k = gate * L * n + layer * n + q
                table[k, 0, layer, q] = HALF_PI
                table[k, 1, layer, q] = -HALF_PI
    return dy.reshape(2 * g, L, n), dz.reshape(2 * g, L, n)


def shift_gradients(encoded, params, config):
    """d<Z_i>/d(angle) for every angle, shape (B,) + angle_shape + (n,)."""
    enc = np.atleast_2d(encoded)
    b, n, L = enc.shape[0], config.n_qubits, config.n_layers
    ry, rz = _layer_angles(params, config)
    dy, dz = _shift_table(config)
    rows = dy.shape[0]
    z = circuit_z(
        np.repeat(enc, rows, axis=0),
        np.broadcast_to(ry + dy, (b, rows, L, n)).reshape(b * rows, L, n),
        np.broadcast_to(rz + dz, (b, rows, L, n)).reshape(b * rows, L, n),
    ).reshape(b, 2, L, n, 2, n)
    # axis 1: gate (Ry, Rz); axis 4: shift sign
    dzdg = 0.5 * (z[:, :, :, :, 0, :] - z[:, :, :, :, 1, :])
    if config.tie_ry_rz:
        return dzdg.sum(axis=1)
    return np.moveaxis(dzdg, 1, 3)


def loss_and_grad(encoded, params, config, actions, targets):
    """Mean of (y - Q_a)^2 and the gradient of mean 1/2 (y - Q_a)^2."""
    enc = np.atleast_2d(encoded)
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=np.float64)
    b = enc.shape[0]
    z = z_batch(enc, params, config)
    w_taken = params.obs_weights[actions]
    q_taken = np.einsum("bi,bi->b", z, w_taken)
    residual = targets - q_taken

    grad_w = np.zeros_like(params.obs_weights)
    np.add.at(grad_w, actions, -residual[:, None] * z)
    grad_w /= b
    if config.n_layers == 0:
        grad_angles = np.zeros(config.angle_shape)
    else:
        dz = shift_gradients(enc, params, config)
        dq = np.einsum("b...i,bi->b...", dz, w_taken)
        grad_angles = np.einsum("b,b...->...", -residual, dq) / b
    return float(np.mean(residual**2)), VqcParams(grad_angles, grad_w)


def grad(encoded, params, config, action, residual):
    """Gradient of 1/2 residual^2 for one sample, where residual = y - Q_action."""
    params.check(config)
    if not 0 <= action < config.n_actions:
        raise ValueError(f"action {action} out of range")
    enc = np.atleast_2d(encoded)
    q = forward_batch(enc, params, config)[0, action]
    _, g = loss_and_grad(enc, params, config, [action], [q + residual])
    return g


def apply_update(params, gradient, lr):
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    return VqcParams(params.angles - lr * gradient.angles, params.obs_weights - lr * gradient.obs_weights)


def to_json(params, config):
    return json.dumps(
        {
            "kind": "vqc",
            "config": config.to_dict(),
            "angles": params.angles.tolist(),
            "obs_weights": params.obs_weights.tolist(),
        }
    )


def from_json(text, config=None):
    data = json.loads(text)
    if data.get("kind") != "vqc":
        raise ValueError("not a VQC checkpoint")
    saved = VqcConfig(**{**data["config"], "feature_ranges": tuple(map(tuple, data["config"]["feature_ranges"]))})
    if config is not None and saved != config:
        raise ValueError("checkpoint config does not match the expected config")
    params = VqcParams(np.array(data["angles"], dtype=np.float64), np.array(data["obs_weights"], dtype=np.float64))
    params.check(saved)
    return params, saved


class VqcQFunction:
    """Raw-feature adapter used by the DQN agents."""

    kind = "vqc"

    def __init__(self, config, weight_scale=1.0):
        self.config = config
        self.n_actions = config.n_actions
        self.weight_scale = weight_scale

    def init_params(self, rng):
        return init_params(self.config, rng, self.weight_scale)

    def q_values(self, features, params):
        return forward_batch(encode(np.atleast_2d(features), self.config), params, self.config)

    def loss_and_grad(self, features, params, actions, targets):
        return loss_and_grad(encode(np.atleast_2d(features), self.config), params, self.config, actions, targets)

    def apply_update(self, params, gradient, lr):
        return apply_update(params, gradient, lr)

    def to_json(self, params):
        return to_json(params, self.config)
