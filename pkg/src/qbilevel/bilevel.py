"""Closed loop between the mechanism designer and the simulated market.

Each upper step: the PPO policy picks a mechanism, the lower level plays
and trains through one month of hourly day-ahead auctions, the month's
market metrics become the reward and the next upper state.

Random streams (all from one master seed, see :mod:`qbilevel.rng`):
``("agent", i, "init" | "explore" | "replay")`` per GENCO agent,
``("market",)`` for renewable deviations, ``("ppo", "init" | "sample" |
"update")`` for the upper level.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import madqn, ppo
from .market import (
    MarketMetrics,
    MechanismParams,
    Settlement,
    clear_hour,
    genco_reward,
    market_metrics,
    realize_renewable,
)
from .rng import stream

log = logging.getLogger(__name__)

HOURS = 24


@dataclass(frozen=True)
class RewardWeights:
    w1: float = 0.7
    w2: float = 0.3
    sw_normalizer: float = None

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError("w1 and w2 must be non-negative and sum to 1")
        if self.sw_normalizer is not None and not self.sw_normalizer > 0:
            raise ValueError("sw_normalizer must be positive")


@dataclass(frozen=True)
class StopRule:
    threshold: float = 0.20
    window: int = 3
    max_steps: int = 15

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.window < 1 or self.max_steps < 1:
            raise ValueError("window and max_steps must be >= 1")


def upper_reward(metrics, weights, sw_normalizer=None):
    """w1 * clamp(SW / normalizer, 0, 1) + w2 * RP."""
    norm = weights.sw_normalizer if sw_normalizer is None else sw_normalizer
    if norm is None or not norm > 0:
        raise ValueError("a positive social-welfare normalizer is required")
    sw = min(max(metrics.social_welfare / norm, 0.0), 1.0)
    return weights.w1 * sw + weights.w2 * metrics.renewable_penetration


def relative_changes(history):
    h = [float(v) for v in history]
    return [abs(b - a) / max(abs(a), 1.0) for a, b in zip(h[:-1], h[1:])]


def should_stop(history, rule):
    """True once the last ``window`` relative SW changes are all below threshold,
    or once ``max_steps`` upper steps have been taken (one history entry each)."""
    if len(history) >= rule.max_steps:
        return True
    if len(history) < rule.window + 1:
        return False
    return all(c < rule.threshold for c in relative_changes(history)[-rule.window :])


def agent_features(demand, hour, prev_price, mech, prev_dispatch, capacity, prev_part, demand_scale, pc_max):
    return np.array(
        [
            demand / demand_scale,
            hour / 23.0,
            prev_price / mech.price_cap,
            prev_dispatch / capacity,
            1.0 if prev_part else 0.0,
            mech.price_cap / pc_max,
        ]
    )


@dataclass
class MonthReport:
    mechanism: MechanismParams
    metrics: MarketMetrics
    agent_rewards: list
    mean_losses: list
    epsilons: list
    duration: float = 0.0
    telemetry: list = field(default_factory=list)
    results: list = field(default_factory=list)


class MarketSimulation:
    """The lower level: GENCO agents bidding into hourly merit-order auctions."""

    def __init__(self, scenario, make_qfunc, agent_config, seed, pc_max=500.0, warm_start=True):
        self.scenario = scenario
        self.make_qfunc = make_qfunc
        self.agent_config = agent_config
        self.seed = seed
        self.pc_max = pc_max
        self.warm_start = warm_start
        self.months_run = 0
        self.market_rng = stream(seed, "market")
        self.explore_rngs = [stream(seed, "agent", s.id, "explore") for s in scenario.gencos]
        self.replay_rngs = [stream(seed, "agent", s.id, "replay") for s in scenario.gencos]
        self.agents = self._new_agents(0)

    def _new_agents(self, generation):
        return [
            madqn.DqnAgent(self.make_qfunc(), self.agent_config, stream(self.seed, "agent", s.id, "init", generation))
            for s in self.scenario.gencos
        ]

    @property
    def sw_normalizer(self):
        """Social-welfare upper bound: valuation times total monthly demand."""
        return self.scenario.valuation * float(self.scenario.demand.sum())

    def run_month(self, mech):
        if not self.warm_start and self.months_run > 0:
            self.agents = self._new_agents(self.months_run)
        start = time.perf_counter()
        sc = self.scenario
        specs = sc.gencos
        cfg = self.agent_config
        n = len(specs)
        demand = sc.demand
        days = demand.shape[0]
        scale = sc.total_capacity

        prev_price = 0.0
        prev_part = [False] * n
        prev_disp = [0.0] * n
        results = []
        totals = [0.0] * n
        telemetry = []
        day_losses = [[] for _ in range(n)]
        all_losses = [[] for _ in range(n)]
        day_rewards = [[] for _ in range(n)]

        def feats(d, h, i):
            return agent_features(
                demand[d, h], h, prev_price, mech, prev_disp[i], specs[i].capacity, prev_part[i], scale, self.pc_max
            )

        for d in range(days):
            for h in range(HOURS):
                x = [feats(d, h, i) for i in range(n)]
                actions = [self.agents[i].select_action(x[i], self.explore_rngs[i]) for i in range(n)]
                bids = [madqn.action_to_bid(actions[i], specs[i], mech, cfg.n_bid_levels) for i in range(n)]
                res = clear_hour(bids, demand[d, h], mech)
                results.append(res)
                rewards = []
                for i, spec in enumerate(specs):
                    realized = realize_renewable(spec, float(res.dispatch[i]), self.market_rng)
                    rewards.append(genco_reward(spec, bids[i], res, realized, prev_part[i], mech))
                prev_price = res.clearing_price
                prev_part = [b.participate for b in bids]
                prev_disp = [float(v) for v in res.dispatch]

                nd, nh = (d, h + 1) if h + 1 < HOURS else ((d + 1) % days, 0)
                terminal = h == HOURS - 1
                for i in range(n):
                    agent = self.agents[i]
                    agent.remember(x[i], actions[i], rewards[i] / cfg.reward_scale, feats(nd, nh, i), terminal)
                    loss = agent.train_step(self.replay_rngs[i])
                    if loss is not None:
                        day_losses[i].append(loss)
                        all_losses[i].append(loss)
                    totals[i] += rewards[i]
                    day_rewards[i].append(rewards[i])
            episode = self.months_run * days + d
            for i in range(n):
                telemetry.append(
                    {
                        "episode": episode,
                        "agent": i,
                        "mean_loss": float(np.mean(day_losses[i])) if day_losses[i] else None,
                        "epsilon": float(self.agents[i].epsilon),
                        "mean_reward": float(np.mean(day_rewards[i])),
                    }
                )
                day_losses[i] = []
                day_rewards[i] = []

        self.months_run += 1
        metrics = market_metrics(results, specs, sc.valuation)
        return MonthReport(
            mechanism=mech,
            metrics=metrics,
            agent_rewards=totals,
            mean_losses=[float(np.mean(v)) if v else None for v in all_losses],
            epsilons=[float(a.epsilon) for a in self.agents],
            duration=time.perf_counter() - start,
            telemetry=telemetry,
            results=results,
        )


class QuadraticStub:
    """Synthetic lower level whose welfare peaks at a known price cap.

    SW = scale * (1 - ((PC - optimum) / width)^2), renewable penetration 0.
    """

    def __init__(self, optimum=300.0, width=250.0, scale=1.0e6):
        self.optimum = optimum
        self.width = width
        self.scale = scale
        self.sw_normalizer = scale

    def run_month(self, mech):
        sw = self.scale * (1.0 - ((mech.price_cap - self.optimum) / self.width) ** 2)
        metrics = MarketMetrics(social_welfare=sw, hhi=5000.0, renewable_penetration=0.0, supply_demand_ratio=1.5)
        return MonthReport(mech, metrics, [], [], [])


@dataclass
class ExperimentRecord:
    months: list
    rewards: list
    trace: list
    best_index: int = 0
    stop_reason: str = ""

    @property
    def best(self):
        return self.months[self.best_index]

    @property
    def final_mechanism(self):
        return self.best.mechanism

    @property
    def final_sw(self):
        return self.best.metrics.social_welfare

    @property
    def sw_history(self):
        return [m.metrics.social_welfare for m in self.months[1:]]


def run_experiment(
    lower,
    ppo_config,
    weights,
    stop_rule,
    initial_mechanism,
    seed,
    rollout_len=1,
    on_month=None,
):
    """Run the bilevel loop; month 0 uses ``initial_mechanism`` to seed the upper state.

    ``on_month(record)`` is called after every month so callers can flush
    partial results.
    """
    if rollout_len < 1:
        raise ValueError("rollout_len must be >= 1")
    norm = weights.sw_normalizer or lower.sw_normalizer
    policy = ppo.init_policy(ppo_config, stream(seed, "ppo", "init"))
    sample_rng = stream(seed, "ppo", "sample")
    update_rng = stream(seed, "ppo", "update")

    first = lower.run_month(initial_mechanism)
    record = ExperimentRecord(months=[first], rewards=[upper_reward(first.metrics, weights, norm)], trace=[])
    log.info("month 0 (initial) SW=%.1f", first.metrics.social_welfare)
    if on_month:
        on_month(record)
    state = ppo.upper_state(first.metrics)
    pending = []

    for step in range(1, stop_rule.max_steps + 1):
        mech, raw, lp = ppo.sample_action(state, policy, ppo_config, sample_rng)
        v = float(ppo.value(state, policy.critic)[0])
        report = lower.run_month(mech)
        r = upper_reward(report.metrics, weights, norm)
        next_state = ppo.upper_state(report.metrics)
        record.months.append(report)
        record.rewards.append(r)
        pending.append(ppo.Transition(state, mech, raw, lp, r, next_state, v))

        stop = should_stop(record.sw_history, stop_rule)
        row = {
            "step": step,
            "price_cap": mech.price_cap,
            "settlement": int(mech.settlement),
            "penalty": mech.penalty_coeff,
            "reward": r,
            "j_actor": "",
            "j_critic": "",
            "entropy": "",
        }
        if len(pending) >= rollout_len or stop:
            policy, rep = ppo.ppo_update(pending, policy, ppo_config, update_rng)
            pending = []
            row.update(j_actor=rep["j_actor"], j_critic=rep["j_critic"], entropy=rep["entropy"])
        record.trace.append(row)
        log.info(
            "month %d PC=%.1f MR=%s P=%.3f SW=%.1f r=%.4f",
            step, mech.price_cap, Settlement(mech.settlement).name, mech.penalty_coeff,
            report.metrics.social_welfare, r,
        )
        state = next_state
        record.best_index = int(np.argmax(record.rewards))
        if on_month:
            on_month(record)
        if stop:
            record.stop_reason = "max_steps" if step >= stop_rule.max_steps else "converged"
            break
    record.best_index = int(np.argmax(record.rewards))
    return record
