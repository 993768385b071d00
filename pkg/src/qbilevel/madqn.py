"""Independent DQN learners for the GENCO bidders.

Each agent owns its Q-function parameters, a target copy, a FIFO replay
buffer and an epsilon-greedy exploration schedule. The Q-function backend
is anything exposing ``init_params / q_values / loss_and_grad /
apply_update`` (see :class:`qbilevel.vqc.VqcQFunction` and
:class:`qbilevel.mlp.MlpQFunction`).
"""
import csv
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .market import Bid


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    lr: float = 0.01
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 2000
    replay_capacity: int = 2000
    batch_size: int = 16
    target_sync: int = 50
    n_bid_levels: int = 10
    reward_scale: float = 1000.0

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.replay_capacity < self.batch_size or self.batch_size < 1:
            raise ValueError("replay_capacity must be >= batch_size >= 1")
        if self.n_bid_levels < 1:
            raise ValueError("n_bid_levels must be >= 1")
        if self.target_sync < 1 or self.eps_decay_steps < 1:
            raise ValueError("target_sync and eps_decay_steps must be >= 1")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ValueError("epsilon bounds must lie in [0, 1]")
        if not self.reward_scale > 0:
            raise ValueError("reward_scale must be positive")

    @property
    def n_actions(self):
        return self.n_bid_levels + 1


@dataclass(frozen=True)
class Experience:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO ring of experiences with uniform sampling."""

    def __init__(self, capacity):
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def add(self, experience):
        self._items.append(experience)

    def sample(self, rng, batch_size):
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]


def action_space(mech, n_bid_levels):
    """Action 0 opts out; action k in 1..K bids at price_cap * k / K."""
    if not mech.price_cap > 0:
        raise ValueError("price cap must be positive")
    return [None] + [mech.price_cap * k / n_bid_levels for k in range(1, n_bid_levels + 1)]


def action_to_bid(action, spec, mech, n_bid_levels):
    """Full-capacity bid for a participating action, opt-out otherwise."""
    if action == 0:
        return Bid(spec.id, False, 0.0, 0.0)
    price = min(mech.price_cap * action / n_bid_levels, mech.price_cap)
    return Bid(spec.id, True, price, spec.capacity)


def greedy(q):
    """Argmax with ties broken by the lowest index."""
    return int(np.argmax(q))


def compute_targets(rewards, next_q, terminal, gamma):
    """y = r + gamma * max_a' Q_target(s', a'), without bootstrap on terminal."""
    rewards = np.asarray(rewards, dtype=np.float64)
    boot = np.max(np.atleast_2d(next_q), axis=1)
    return rewards + gamma * boot * (1.0 - np.asarray(terminal, dtype=np.float64))


class DqnAgent:
    def __init__(self, qfunc, config, rng):
        if qfunc.n_actions < 2:
            raise ValueError("need at least two actions")
        self.qfunc = qfunc
        self.config = config
        self.params = qfunc.init_params(rng)
        self.target_params = self.params.copy()
        self.buffer = ReplayBuffer(config.replay_capacity)
        self.steps = 0
        self.epsilon = config.eps_start

    @property
    def n_actions(self):
        return self.qfunc.n_actions

    def q_values(self, features):
        return self.qfunc.q_values(np.atleast_2d(features), self.params)[0]

    def select_action(self, features, rng):
        if self.epsilon > 0 and rng.random() < self.epsilon:
            return int(rng.integers(self.n_actions))
        return greedy(self.q_values(features))

    def remember(self, state, action, reward, next_state, terminal=False):
        self.buffer.add(
            Experience(
                np.asarray(state, dtype=np.float64),
                int(action),
                float(reward),
                np.asarray(next_state, dtype=np.float64),
                bool(terminal),
            )
        )

    def compute_target(self, experience):
        next_q = self.qfunc.q_values(np.atleast_2d(experience.next_state), self.target_params)
        return float(
            compute_targets([experience.reward], next_q, [experience.terminal], self.config.gamma)[0]
        )

    def train_step(self, rng):
        """One minibatch update; returns mean squared TD error or None if the buffer is short."""
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return None
        batch = self.buffer.sample(rng, cfg.batch_size)
        states = np.stack([e.state for e in batch])
        next_states = np.stack([e.next_state for e in batch])
        actions = np.array([e.action for e in batch])
        rewards = np.array([e.reward for e in batch])
        terminal = np.array([e.terminal for e in batch])

        next_q = self.qfunc.q_values(next_states, self.target_params)
        targets = compute_targets(rewards, next_q, terminal, cfg.gamma)
        loss, gradient = self.qfunc.loss_and_grad(states, self.params, actions, targets)
        self.params = self.qfunc.apply_update(self.params, gradient, cfg.lr)

        self.steps += 1
        if self.steps % cfg.target_sync == 0:
            self.sync_target()
        self.epsilon = epsilon_at(cfg, self.steps)
        return loss

    def sync_target(self):
        self.target_params = self.params.copy()
        return self


def epsilon_at(config, step):
    frac = min(1.0, step / config.eps_decay_steps)
    return config.eps_start + (config.eps_end - config.eps_start) * frac


TELEMETRY_FIELDS = ("episode", "agent", "mean_loss", "epsilon", "mean_reward")


def write_telemetry(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TELEMETRY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in TELEMETRY_FIELDS})


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return value


def config_dict(config):
    return asdict(config)
