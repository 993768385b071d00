"""PPO actor-critic over the hybrid market-mechanism action.

Action: price cap (Gaussian), penalty coefficient (Gaussian), settlement
rule (Bernoulli, 1 = pay-as-clear). Gaussian draws are clamped into their
bounds before reaching the market, but log-probabilities always refer to
the raw, unclamped draw. Standard deviations are in native units
(USD/MWh for the cap, a fraction for the penalty), ``sigma = exp(log_std)``.

Actor and critic are one-hidden-layer tanh networks with hand-written
gradients. The actor ascends the clipped surrogate plus an entropy bonus,
the critic descends the squared one-step TD error against a frozen copy of
itself.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .market import MechanismParams, Settlement

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
GAUSS_ENTROPY_CONST = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    beta: float = 1.0
    c1: float = 0.5
    c2: float = 0.01
    gamma: float = 0.9
    actor_lr: float = 1e-2
    critic_lr: float = 1e-2
    epochs: int = 4
    minibatch_size: int = 32
    pc_bounds: tuple = (50.0, 500.0)
    penalty_bounds: tuple = (0.05, 0.15)
    hidden: int = 32
    init_log_std: tuple = (2.0, math.log(0.02))
    mean_scale: tuple = (10.0, 0.01)
    init_pc_mean: float = None
    init_penalty_mean: float = None
    normalize_advantages: bool = True
    max_grad_norm: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "pc_bounds", tuple(float(v) for v in self.pc_bounds))
        object.__setattr__(self, "penalty_bounds", tuple(float(v) for v in self.penalty_bounds))
        object.__setattr__(self, "init_log_std", tuple(float(v) for v in self.init_log_std))
        object.__setattr__(self, "mean_scale", tuple(float(v) for v in self.mean_scale))
        if len(self.mean_scale) != 2 or min(self.mean_scale) <= 0:
            raise ValueError("mean_scale needs two positive entries")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not (self.actor_lr > 0 and self.critic_lr > 0):
            raise ValueError("learning rates must be positive")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.epochs < 1 or self.minibatch_size < 1 or self.hidden < 1:
            raise ValueError("epochs, minibatch_size and hidden must be >= 1")
        lo, hi = self.pc_bounds
        if not 0 < lo < hi:
            raise ValueError("pc_bounds must satisfy 0 < low < high")
        lo, hi = self.penalty_bounds
        if not 0 <= lo < hi <= 1:
            raise ValueError("penalty_bounds must satisfy 0 <= low < high <= 1")

    @property
    def effective_entropy_coef(self):
        return self.c2 * self.beta


def upper_state(metrics):
    """[hhi / 10000, renewable penetration, clip(SDR, 0, 3) / 3]."""
    return np.array(
        [
            metrics.hhi / 10000.0,
            metrics.renewable_penetration,
            min(max(metrics.supply_demand_ratio, 0.0), 3.0) / 3.0,
        ]
    )


@dataclass
class PolicyParams:
    actor: dict
    critic: dict

    def copy(self):
        return PolicyParams(
            {k: v.copy() for k, v in self.actor.items()},
            {k: v.copy() for k, v in self.critic.items()},
        )


def _mid(bounds):
    return 0.5 * (bounds[0] + bounds[1])


def init_policy(config, rng, n_inputs=3):
    h = config.hidden
    b_in = 1.0 / math.sqrt(n_inputs)
    b_h = 1.0 / math.sqrt(h)
    mid_pc, mid_p = _mid(config.pc_bounds), _mid(config.penalty_bounds)
    k_pc, k_p = config.mean_scale
    pc0 = mid_pc if config.init_pc_mean is None else config.init_pc_mean
    p0 = mid_p if config.init_penalty_mean is None else config.init_penalty_mean
    actor = {
        "W1": rng.uniform(-b_in, b_in, size=(h, n_inputs)),
        "b1": np.zeros(h),
        "W2": rng.uniform(-b_h, b_h, size=(3, h)) * 0.01,
        "b2": np.array([(pc0 - mid_pc) / k_pc, (p0 - mid_p) / k_p, 0.0]),
        "log_std": np.clip(np.array(config.init_log_std), LOG_STD_MIN, LOG_STD_MAX),
    }
    critic = {
        "W1": rng.uniform(-b_in, b_in, size=(h, n_inputs)),
        "b1": np.zeros(h),
        "W2": rng.uniform(-b_h, b_h, size=(1, h)),
        "b2": np.zeros(1),
    }
    return PolicyParams(actor, critic)


def _actor_forward(states, actor, config):
    s = np.atleast_2d(states)
    hidden = np.tanh(s @ actor["W1"].T + actor["b1"])
    out = hidden @ actor["W2"].T + actor["b2"]
    # mean = bounds midpoint + mean_scale * head output
    k_pc, k_p = config.mean_scale
    means = np.stack(
        [_mid(config.pc_bounds) + k_pc * out[:, 0], _mid(config.penalty_bounds) + k_p * out[:, 1]],
        axis=1,
    )
    return s, hidden, means, out[:, 2]


def policy_heads(states, params, config):
    """(means (B, 2), stds (2,), settlement logits (B,))."""
    _, _, means, logits = _actor_forward(states, params.actor, config)
    return means, np.exp(params.actor["log_std"]), logits


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def log_prob(states, raw, params, config):
    """Joint log-probability of raw actions [pc, penalty, mr] (B, 3)."""
    raw = np.atleast_2d(raw)
    means, std, logits = policy_heads(states, params, config)
    log_std = params.actor["log_std"]
    z = (raw[:, :2] - means) / std
    gauss = np.sum(-0.5 * z**2 - log_std - HALF_LOG_2PI, axis=1)
    mr = raw[:, 2]
    bern = mr * _log_sigmoid(logits) + (1.0 - mr) * _log_sigmoid(-logits)
    return gauss + bern


def entropy(states, params, config):
    """Per-state policy entropy: two Gaussian closed forms plus the Bernoulli term."""
    _, _, _, logits = _actor_forward(states, params.actor, config)
    p = _sigmoid(logits)
    bern = -(p * _log_sigmoid(logits) + (1.0 - p) * _log_sigmoid(-logits))
    gauss = np.sum(GAUSS_ENTROPY_CONST + params.actor["log_std"])
    return gauss + bern


def entropy_bonus(states, params, config, beta):
    return -beta * float(np.mean(entropy(states, params, config)))


def sample_action(state, params, config, rng):
    """Draw a mechanism; returns (MechanismParams, raw [pc, penalty, mr], log_prob)."""
    means, std, logits = policy_heads(state, params, config)
    pc_raw = rng.normal(means[0, 0], std[0])
    p_raw = rng.normal(means[0, 1], std[1])
    mr = 1.0 if rng.random() < _sigmoid(logits[0]) else 0.0
    raw = np.array([pc_raw, p_raw, mr])
    lp = float(log_prob(state, raw, params, config)[0])
    return to_mechanism(raw, config), raw, lp


def to_mechanism(raw, config):
    return MechanismParams(
        price_cap=float(np.clip(raw[0], *config.pc_bounds)),
        settlement=Settlement(int(raw[2])),
        penalty_coeff=float(np.clip(raw[1], *config.penalty_bounds)),
    )


def greedy_mechanism(state, params, config):
    """Mode of the policy: clamped means and the more likely settlement rule."""
    means, _, logits = policy_heads(state, params, config)
    return to_mechanism(np.array([means[0, 0], means[0, 1], float(logits[0] > 0)]), config)


def value(states, critic):
    s = np.atleast_2d(states)
    hidden = np.tanh(s @ critic["W1"].T + critic["b1"])
    return (hidden @ critic["W2"].T + critic["b2"])[:, 0]


@dataclass
class Transition:
    state: np.ndarray
    mechanism: MechanismParams
    raw: np.ndarray
    log_prob: float
    reward: float
    next_state: np.ndarray
    value: float = 0.0
    terminal: bool = False


def advantage(transition, critic, gamma):
    """One-step TD advantage r + gamma V(s') - V(s) under the given critic."""
    v = value(transition.state, critic)[0]
    boot = 0.0 if transition.terminal else gamma * value(transition.next_state, critic)[0]
    return float(transition.reward + boot - v)


def td_targets(transitions, critic, gamma):
    rewards = np.array([t.reward for t in transitions])
    nxt = np.stack([t.next_state for t in transitions])
    alive = np.array([0.0 if t.terminal else 1.0 for t in transitions])
    return rewards + gamma * alive * value(nxt, critic)


def surrogate_terms(ratio, adv, eps):
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def actor_objective(states, raw, params, old_log_probs, advantages, config):
    """Mean clipped surrogate: E[min(r A, clip(r, 1-eps, 1+eps) A)]."""
    ratio = np.exp(log_prob(states, raw, params, config) - np.asarray(old_log_probs))
    return float(np.mean(surrogate_terms(ratio, np.asarray(advantages), config.clip_eps)))


def critic_loss(states, targets, critic):
    return float(np.mean((value(states, critic) - np.asarray(targets)) ** 2))


def critic_loss_and_grad(states, targets, critic):
    s = np.atleast_2d(states)
    hidden = np.tanh(s @ critic["W1"].T + critic["b1"])
    v = (hidden @ critic["W2"].T + critic["b2"])[:, 0]
    err = v - np.asarray(targets)
    b = s.shape[0]
    dv = (2.0 / b) * err
    grads = {
        "W2": dv[None, :] @ hidden,
        "b2": np.array([dv.sum()]),
    }
    dh = dv[:, None] * critic["W2"][0][None, :] * (1.0 - hidden**2)
    grads["W1"] = dh.T @ s
    grads["b1"] = dh.sum(axis=0)
    return float(np.mean(err**2)), grads


def actor_objective_and_grad(states, raw, params, old_log_probs, advantages, config):
    """Clipped surrogate plus entropy bonus, and its gradient (for ascent)."""
    actor = params.actor
    s, hidden, means, logits = _actor_forward(states, actor, config)
    raw = np.atleast_2d(raw)
    adv = np.asarray(advantages, dtype=np.float64)
    b = s.shape[0]
    log_std = actor["log_std"]
    std = np.exp(log_std)

    z = (raw[:, :2] - means) / std
    p = _sigmoid(logits)
    mr = raw[:, 2]
    logp = (
        np.sum(-0.5 * z**2 - log_std - HALF_LOG_2PI, axis=1)
        + mr * _log_sigmoid(logits)
        + (1.0 - mr) * _log_sigmoid(-logits)
    )
    ratio = np.exp(logp - np.asarray(old_log_probs))
    eps = config.clip_eps
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    surrogate = np.minimum(ratio * adv, clipped * adv)
    live = ratio * adv <= clipped * adv
    coef = np.where(live, adv * ratio, 0.0) / b

    ent_coef = config.effective_entropy_coef
    bern_ent = -(p * _log_sigmoid(logits) + (1.0 - p) * _log_sigmoid(-logits))
    objective = float(
        np.mean(surrogate) + ent_coef * np.mean(np.sum(GAUSS_ENTROPY_CONST + log_std) + bern_ent)
    )

    k_pc, k_p = config.mean_scale
    d_out = np.empty((b, 3))
    d_out[:, 0] = coef * z[:, 0] / std[0] * k_pc
    d_out[:, 1] = coef * z[:, 1] / std[1] * k_p
    # entropy of Bernoulli: dH/dlogit = -p (1 - p) logit
    d_out[:, 2] = coef * (mr - p) + ent_coef * (-p * (1.0 - p) * logits) / b
    d_log_std = np.sum(coef[:, None] * (z**2 - 1.0), axis=0) + ent_coef

    grads = {
        "W2": d_out.T @ hidden,
        "b2": d_out.sum(axis=0),
        "log_std": d_log_std,
    }
    dh = (d_out @ actor["W2"]) * (1.0 - hidden**2)
    grads["W1"] = dh.T @ s
    grads["b1"] = dh.sum(axis=0)
    return objective, grads


def _clip_norm(grads, max_norm):
    if max_norm is None or max_norm <= 0:
        return grads
    total = math.sqrt(sum(float(np.sum(g**2)) for g in grads.values()))
    if total <= max_norm:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def ppo_update(transitions, params, config, rng):
    """Several epochs of minibatch SGD on a frozen batch; returns (params, report)."""
    if not transitions:
        raise ValueError("ppo_update needs at least one transition")
    old_critic = {k: v.copy() for k, v in params.critic.items()}
    states = np.stack([t.state for t in transitions])
    raw = np.stack([t.raw for t in transitions])
    old_logp = np.array([t.log_prob for t in transitions])
    targets = td_targets(transitions, old_critic, config.gamma)
    adv = targets - value(states, old_critic)
    if config.normalize_advantages and len(transitions) > 1:
        std = adv.std()
        adv = (adv - adv.mean()) / (std + 1e-8)

    new = params.copy()
    n = len(transitions)
    mb = min(config.minibatch_size, n)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = order[start : start + mb]
            _, ga = actor_objective_and_grad(states[idx], raw[idx], new, old_logp[idx], adv[idx], config)
            ga = _clip_norm(ga, config.max_grad_norm)
            for k, g in ga.items():
                new.actor[k] = new.actor[k] + config.actor_lr * g
            new.actor["log_std"] = np.clip(new.actor["log_std"], LOG_STD_MIN, LOG_STD_MAX)
            _, gc = critic_loss_and_grad(states[idx], targets[idx], new.critic)
            gc = _clip_norm(gc, config.max_grad_norm)
            for k, g in gc.items():
                new.critic[k] = new.critic[k] - config.critic_lr * g

    j_actor = actor_objective(states, raw, new, old_logp, adv, config)
    j_critic = critic_loss(states, targets, new.critic)
    ent = float(np.mean(entropy(states, new, config)))
    report = {
        "j_actor": j_actor,
        "j_critic": j_critic,
        "entropy": ent,
        "loss": -j_actor + config.c1 * j_critic + config.c2 * (-config.beta * ent),
    }
    return new, report


TRACE_FIELDS = ("step", "price_cap", "settlement", "penalty", "reward", "j_actor", "j_critic", "entropy")


def write_trace(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in TRACE_FIELDS})
