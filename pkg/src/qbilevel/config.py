"""Experiment configuration: JSON schema, defaults, validation, scenario building."""
import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .bilevel import MarketSimulation, RewardWeights, StopRule
from .madqn import AgentConfig
from .market import MarketError, MechanismParams, Scenario, Settlement, load_gencos
from .mlp import MlpConfig, MlpQFunction
from .ppo import PpoConfig
from .vqc import VqcConfig, VqcQFunction

BACKENDS = ("vqc", "mlp")
N_FEATURES = 6


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    gencos: str = None
    demand: str = None
    days: int = 30
    valuation: float = 500.0
    peak_fraction: float = 0.8
    trough_fraction: float = 0.45
    peak_hour: int = 18

    def __post_init__(self):
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if not self.valuation > 0:
            raise ValueError("valuation must be positive")
        if not 0 <= self.trough_fraction <= self.peak_fraction:
            raise ValueError("need 0 <= trough_fraction <= peak_fraction")
        if not 0 <= self.peak_hour < 24:
            raise ValueError("peak_hour must lie in [0, 24)")


@dataclass(frozen=True)
class VqcSection:
    n_layers: int = 2
    tie_ry_rz: bool = True
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.n_layers < 0:
            raise ValueError("n_layers must be non-negative")
        if not self.weight_scale > 0:
            raise ValueError("weight_scale must be positive")


@dataclass(frozen=True)
class MlpSection:
    hidden: tuple = (64, 64)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if any(not isinstance(h, int) or h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive integers")


@dataclass(frozen=True)
class InitialMechanism:
    price_cap: float = 100.0
    settlement: str = "pay_as_bid"
    penalty_coeff: float = 0.10

    def build(self):
        return MechanismParams(self.price_cap, Settlement.parse(self.settlement), self.penalty_coeff)

    def __post_init__(self):
        self.build()


@dataclass(frozen=True)
class ExperimentConfig:
    backend: str = "vqc"
    seed: int = 0
    warm_start: bool = True
    rollout_len: int = 1
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    vqc: VqcSection = field(default_factory=VqcSection)
    mlp: MlpSection = field(default_factory=MlpSection)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    stop_rule: StopRule = field(default_factory=StopRule)
    initial_mechanism: InitialMechanism = field(default_factory=InitialMechanism)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.rollout_len < 1:
            raise ValueError("rollout_len must be >= 1")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def smoke(self):
        """Tiny horizons: 2 days per month, at most 2 upper steps."""
        return self.replace(
            scenario=dataclasses.replace(self.scenario, days=2),
            stop_rule=dataclasses.replace(self.stop_rule, max_steps=2),
        )

    def to_dict(self):
        return _to_jsonable(dataclasses.asdict(self))


SECTIONS = {
    "scenario": ScenarioConfig,
    "agent": AgentConfig,
    "vqc": VqcSection,
    "mlp": MlpSection,
    "ppo": PpoConfig,
    "reward_weights": RewardWeights,
    "stop_rule": StopRule,
    "initial_mechanism": InitialMechanism,
}


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError("non-finite value in config")
    return obj


def _check_type(name, annotation, value):
    if value is None:
        return
    ok = {
        float: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        int: lambda v: isinstance(v, int) and not isinstance(v, bool),
        bool: lambda v: isinstance(v, bool),
        str: lambda v: isinstance(v, str),
        tuple: lambda v: isinstance(v, (list, tuple)),
    }.get(annotation)
    if ok is not None and not ok(value):
        raise ConfigError(f"{name}: expected {annotation.__name__}, got {type(value).__name__}")


def _build(cls, data, prefix):
    where = prefix or "config"
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        name = f"{prefix}.{key}" if prefix else key
        if key in SECTIONS and cls is ExperimentConfig:
            kwargs[key] = _build(SECTIONS[key], value, name)
            continue
        _check_type(name, fields[key].type, value)
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data):
    return _build(ExperimentConfig, data, "")


def parse_config(text, source="<string>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {context}") from None
    return config_from_dict(data)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(config):
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


def sinusoid_demand(total_capacity, days, peak_fraction=0.8, trough_fraction=0.45, peak_hour=18):
    """Daily cosine load shape between trough and peak fractions of capacity."""
    hours = np.arange(24)
    mid = 0.5 * (peak_fraction + trough_fraction)
    amp = 0.5 * (peak_fraction - trough_fraction)
    day = total_capacity * (mid + amp * np.cos(2 * np.pi * (hours - peak_hour) / 24))
    return np.tile(day, (days, 1))


def load_demand(path):
    """Days x 24 demand from a JSON list of lists or a headerless CSV."""
    try:
        if str(path).endswith(".json"):
            with open(path) as fh:
                rows = json.load(fh)
        else:
            with open(path, newline="") as fh:
                rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read demand profile {path}: {exc}") from None
    return np.asarray(rows, dtype=np.float64)


def default_gencos_path():
    return resources.files("qbilevel") / "data" / "default_gencos.json"


def build_scenario(config):
    sc = config.scenario
    try:
        gencos = load_gencos(sc.gencos or default_gencos_path())
    except OSError as exc:
        raise ConfigError(f"cannot read genco dataset {sc.gencos}: {exc.strerror}") from None
    except (MarketError, ValueError) as exc:
        raise ConfigError(f"genco dataset: {exc}") from None
    total = sum(g.capacity for g in gencos)
    if sc.demand:
        demand = load_demand(sc.demand)
        if demand.ndim != 2 or demand.shape[1] != 24 or demand.shape[0] < sc.days:
            raise ConfigError(
                f"demand profile {sc.demand} has shape {demand.shape}; need at least ({sc.days}, 24)"
            )
        demand = demand[: sc.days]
    else:
        demand = sinusoid_demand(total, sc.days, sc.peak_fraction, sc.trough_fraction, sc.peak_hour)
    try:
        return Scenario(gencos, demand, sc.valuation)
    except MarketError as exc:
        raise ConfigError(str(exc)) from None


def qfunc_factory(config, backend=None):
    backend = backend or config.backend
    n_actions = config.agent.n_actions
    if backend == "vqc":
        vcfg = VqcConfig(
            n_actions=n_actions,
            n_layers=config.vqc.n_layers,
            n_qubits=N_FEATURES,
            tie_ry_rz=config.vqc.tie_ry_rz,
        )
        return lambda: VqcQFunction(vcfg, config.vqc.weight_scale)
    if backend == "mlp":
        mcfg = MlpConfig(n_actions=n_actions, n_inputs=N_FEATURES, hidden=config.mlp.hidden)
        return lambda: MlpQFunction(mcfg)
    raise ConfigError(f"unknown backend {backend!r}")


def validate(config):
    """Cross-field checks; returns the built scenario."""
    scenario = build_scenario(config)
    if len(scenario.gencos) < 1:
        raise ConfigError("at least one GENCO is required")
    lo, hi = config.ppo.pc_bounds
    if config.initial_mechanism.price_cap > hi:
        raise ConfigError("initial_mechanism.price_cap exceeds ppo.pc_bounds upper limit")
    qfunc_factory(config)
    return scenario


def build_lower(config, backend=None, scenario=None):
    scenario = scenario or validate(config)
    return MarketSimulation(
        scenario,
        qfunc_factory(config, backend),
        config.agent,
        config.seed,
        pc_max=config.ppo.pc_bounds[1],
        warm_start=config.warm_start,
    )
