"""Small closed-loop drivers shared by unit and acceptance tests."""
import numpy as np

from oracles import toy_mdp, value_iteration
from qbilevel import madqn, mlp, ppo, vqc
from qbilevel.rng import stream

TOY_GAMMA = 0.5
TOY_FEATURES = np.array([np.zeros(6), np.ones(6)])


def toy_qfunc(backend):
    if backend == "vqc":
        return vqc.VqcQFunction(vqc.VqcConfig(n_actions=2, n_layers=1))
    return mlp.MlpQFunction(mlp.MlpConfig(n_actions=2, hidden=(16, 16)))


TOY_LR = {"vqc": 0.1, "mlp": 0.05}


def train_toy(backend, seed, steps=5000, reward_scale=1.0):
    """DQN on the two-state MDP; returns (agent, greedy policy per state)."""
    reward, nxt = toy_mdp()
    cfg = madqn.AgentConfig(
        gamma=TOY_GAMMA,
        lr=TOY_LR[backend],
        eps_start=1.0,
        eps_end=0.1,
        eps_decay_steps=2000,
        replay_capacity=1000,
        batch_size=16,
        target_sync=50,
        n_bid_levels=1,
        reward_scale=reward_scale,
    )
    agent = madqn.DqnAgent(toy_qfunc(backend), cfg, stream(seed, "toy", "init"))
    explore, replay = stream(seed, "toy", "explore"), stream(seed, "toy", "replay")
    s = 0
    for _ in range(steps):
        a = agent.select_action(TOY_FEATURES[s], explore)
        agent.remember(TOY_FEATURES[s], a, reward[s, a] / reward_scale, TOY_FEATURES[nxt[s, a]], False)
        agent.train_step(replay)
        s = nxt[s, a]
    policy = [madqn.greedy(agent.q_values(TOY_FEATURES[k])) for k in (0, 1)]
    return agent, policy


def toy_optimal_policy():
    reward, nxt = toy_mdp()
    return list(np.argmax(value_iteration(reward, nxt, TOY_GAMMA), axis=1))


BANDIT_STATE = np.full(3, 0.5)


def run_bandit(kind, seed, updates, batch=16, **overrides):
    """PPO on a one-step bandit.

    ``kind == "discrete"``: reward 1 for pay-as-bid (arm 0), else 0; returns P(arm 0).
    ``kind == "quadratic"``: reward -(PC - 300)^2; returns the policy's PC mean.
    """
    cfg = ppo.PpoConfig(**overrides)
    params = ppo.init_policy(cfg, stream(seed, "bandit", "init"))
    sample_rng, update_rng = stream(seed, "bandit", "sample"), stream(seed, "bandit", "update")
    s = BANDIT_STATE
    for _ in range(updates):
        batch_tr = []
        for _ in range(batch):
            mech, raw, lp = ppo.sample_action(s, params, cfg, sample_rng)
            if kind == "discrete":
                r = 1.0 if mech.settlement == 0 else 0.0
            else:
                r = -((mech.price_cap - 300.0) ** 2)
            batch_tr.append(ppo.Transition(s, mech, raw, lp, r, s, terminal=True))
        params, _ = ppo.ppo_update(batch_tr, params, cfg, update_rng)
    means, _, logits = ppo.policy_heads(s, params, cfg)
    if kind == "discrete":
        return float(1.0 - ppo._sigmoid(logits[0]))
    return float(means[0, 0])
