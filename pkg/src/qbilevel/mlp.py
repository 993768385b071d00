"""Classical feed-forward Q-function with hand-written backpropagation.

Architecture: inputs -> tanh hidden layers -> linear output per action.
Same forward / loss_and_grad / apply_update surface as :mod:`qbilevel.vqc`.
"""
import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpConfig:
    n_actions: int
    n_inputs: int = 6
    hidden: tuple = (64, 64)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.n_actions < 1 or self.n_inputs < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be positive")

    @property
    def widths(self):
        return (self.n_inputs,) + self.hidden + (self.n_actions,)

    def to_dict(self):
        return {"n_actions": self.n_actions, "n_inputs": self.n_inputs, "hidden": list(self.hidden)}


@dataclass
class MlpParams:
    weights: list
    biases: list

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def check(self, config):
        widths = config.widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ValueError("layer count does not match architecture")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[k + 1], widths[k]) or b.shape != (widths[k + 1],):
                raise ValueError(f"layer {k} has shape {w.shape}/{b.shape}")

    def flat(self):
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def with_flat(self, vector):
        weights, biases, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(np.asarray(vector[k : k + w.size], dtype=np.float64).reshape(w.shape))
            k += w.size
            biases.append(np.asarray(vector[k : k + b.size], dtype=np.float64).reshape(b.shape))
            k += b.size
        return MlpParams(weights, biases)


def init_params(config, rng):
    """Uniform in +-1/sqrt(fan_in) for weights and biases."""
    weights, biases = [], []
    widths = config.widths
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(weights, biases)


def _activations(x, params):
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if k < last:
            h = np.tanh(h)
        acts.append(h)
    return acts


def forward_batch(features, params):
    return _activations(np.atleast_2d(np.asarray(features, dtype=np.float64)), params)[-1]


def forward(features, params):
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (params.weights[0].shape[1],):
        raise ValueError(f"expected {params.weights[0].shape[1]} features, got shape {x.shape}")
    return forward_batch(x[None, :], params)[0]


def loss_and_grad(features, params, actions, targets):
    """Mean of (y - Q_a)^2 and the gradient of mean 1/2 (y - Q_a)^2."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=np.float64)
    b = x.shape[0]
    acts = _activations(x, params)
    q = acts[-1]
    residual = targets - q[np.arange(b), actions]

    delta = np.zeros_like(q)
    delta[np.arange(b), actions] = -residual / b
    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        gw[k] = delta.T @ acts[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * (1.0 - acts[k] ** 2)
    return float(np.mean(residual**2)), MlpParams(gw, gb)


def grad(features, params, action, residual):
    """Gradient of 1/2 residual^2 for one sample, where residual = y - Q_action."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    q = forward_batch(x, params)[0]
    if not 0 <= action < q.shape[0]:
        raise ValueError(f"action {action} out of range")
    _, g = loss_and_grad(x, params, [action], [q[action] + residual])
    return g


def apply_update(params, gradient, lr):
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    return MlpParams(
        [w - lr * g for w, g in zip(params.weights, gradient.weights)],
        [b - lr * g for b, g in zip(params.biases, gradient.biases)],
    )


def to_json(params, config):
    return json.dumps(
        {
            "kind": "mlp",
            "config": config.to_dict(),
            "weights": [w.tolist() for w in params.weights],
            "biases": [b.tolist() for b in params.biases],
        }
    )


def from_json(text, config=None):
    data = json.loads(text)
    if data.get("kind") != "mlp":
        raise ValueError("not an MLP checkpoint")
    saved = MlpConfig(**data["config"])
    if config is not None and saved != config:
        raise ValueError("checkpoint config does not match the expected config")
    params = MlpParams(
        [np.array(w, dtype=np.float64) for w in data["weights"]],
        [np.array(b, dtype=np.float64) for b in data["biases"]],
    )
    params.check(saved)
    return params, saved


class MlpQFunction:
    kind = "mlp"

    def __init__(self, config):
        self.config = config
        self.n_actions = config.n_actions

    def init_params(self, rng):
        return init_params(self.config, rng)

    def q_values(self, features, params):
        return forward_batch(features, params)

    def loss_and_grad(self, features, params, actions, targets):
        return loss_and_grad(features, params, actions, targets)

    def apply_update(self, params, gradient, lr):
        return apply_update(params, gradient, lr)

    def to_json(self, params):
        return to_json(params, self.config)
