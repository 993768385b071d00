"""Single-node day-ahead market: merit-order clearing, GENCO rewards, metrics."""
import csv
import enum
import json
from dataclasses import asdict, dataclass, field

import numpy as np

THERMAL = "thermal"
RENEWABLE = "renewable"


class MarketError(ValueError):
    """Invalid market input (bad bid, negative demand, malformed dataset)."""


class Settlement(enum.IntEnum):
    PAY_AS_BID = 0
    PAY_AS_CLEAR = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise MarketError(f"unknown settlement rule {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class GencoSpec:
    id: int
    kind: str
    capacity: float
    marginal_cost: float
    fixed_cost: float = 0.0
    switching_cost: float = 0.0
    forecast_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in (THERMAL, RENEWABLE):
            raise MarketError(f"genco {self.id}: kind must be thermal or renewable")
        if not self.capacity > 0:
            raise MarketError(f"genco {self.id}: capacity must be positive")
        if self.marginal_cost < 0:
            raise MarketError(f"genco {self.id}: marginal_cost must be non-negative")
        if self.fixed_cost < 0 or self.switching_cost < 0:
            raise MarketError(f"genco {self.id}: costs must be non-negative")
        if (self.forecast_sigma == 0) != (self.kind == THERMAL) or self.forecast_sigma < 0:
            raise MarketError(
                f"genco {self.id}: forecast_sigma must be 0 for thermal and positive for renewable"
            )

    @property
    def renewable(self):
        return self.kind == RENEWABLE


def validate_gencos(specs):
    ids = [s.id for s in specs]
    if sorted(ids) != list(range(len(ids))):
        raise MarketError(f"genco ids must be unique and contiguous from 0, got {ids}")
    return sorted(specs, key=lambda s: s.id)


def load_gencos(path):
    """Read a JSON list of GENCO records."""
    with open(path) as fh:
        records = json.load(fh)
    if isinstance(records, dict):
        records = records.get("gencos", records)
    if not isinstance(records, list):
        raise MarketError(f"{path}: expected a list of genco records")
    try:
        specs = [GencoSpec(**rec) for rec in records]
    except TypeError as exc:
        raise MarketError(f"{path}: {exc}") from None
    return validate_gencos(specs)


def dump_gencos(specs, path):
    with open(path, "w") as fh:
        json.dump([asdict(s) for s in specs], fh, indent=2)


@dataclass(frozen=True)
class MechanismParams:
    price_cap: float
    settlement: Settlement = Settlement.PAY_AS_BID
    penalty_coeff: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "settlement", Settlement.parse(self.settlement))
        if not self.price_cap > 0:
            raise MarketError("price_cap must be positive")
        if not 0.0 <= self.penalty_coeff <= 1.0:
            raise MarketError("penalty_coeff must lie in [0, 1]")

    def within(self, cap_bounds):
        lo, hi = cap_bounds
        return lo <= self.price_cap <= hi


@dataclass(frozen=True)
class Bid:
    genco_id: int
    participate: bool
    price: float = 0.0
    quantity: float = 0.0


@dataclass
class HourlyClearingResult:
    dispatch: np.ndarray
    clearing_price: float
    payments: np.ndarray
    unserved: float
    demand: float
    bid_prices: np.ndarray
    participating: np.ndarray
    offered: float
    settlement: Settlement = Settlement.PAY_AS_BID

    def settlement_price(self, genco_id):
        """Price per MWh actually paid to ``genco_id`` this hour."""
        if self.settlement == Settlement.PAY_AS_CLEAR:
            return self.clearing_price
        return float(self.bid_prices[genco_id])

    @property
    def served(self):
        return self.demand - self.unserved


@dataclass
class MarketMetrics:
    social_welfare: float
    hhi: float
    renewable_penetration: float
    supply_demand_ratio: float


def _validate_bids(bids, mech):
    n = len(bids)
    seen = [False] * n
    for b in bids:
        i = b.genco_id
        if not 0 <= i < n or seen[i]:
            raise MarketError("bids must cover genco ids 0..n-1 exactly once")
        seen[i] = True
        if not b.participate:
            continue
        if b.price > mech.price_cap:
            raise MarketError(
                f"genco {i}: bid price {b.price} exceeds price cap {mech.price_cap}"
            )
        if b.price < 0 or b.quantity < 0:
            raise MarketError(f"genco {i}: bid price and quantity must be non-negative")


def clear_hour(bids, demand, mech):
    """Clear one hour by merit order.

    Participating bids are filled in ascending (price, genco_id) order; the
    last accepted unit may be partially dispatched. ``clearing_price`` is the
    highest accepted bid price under either rule (0 when nothing clears);
    it sets payments only under pay-as-clear.
    """
    if demand < 0:
        raise MarketError(f"demand must be non-negative, got {demand}")
    _validate_bids(bids, mech)
    n = len(bids)
    dispatch = [0.0] * n
    prices = [0.0] * n
    participating = [False] * n
    order = []
    offered = 0.0
    for b in bids:
        if b.participate:
            participating[b.genco_id] = True
            prices[b.genco_id] = float(b.price)
            if b.quantity > 0:
                order.append((b.price, b.genco_id, b.quantity))
                offered += b.quantity
    order.sort()

    remaining = float(demand)
    clearing_price = 0.0
    for price, i, quantity in order:
        if remaining <= 0:
            break
        q = min(float(quantity), remaining)
        dispatch[i] = q
        remaining -= q
        clearing_price = float(price)
    # recompute from the dispatch so the balance holds to rounding
    unserved = float(demand) - sum(dispatch)
    if abs(unserved) < 1e-12:
        unserved = 0.0

    dispatch = np.array(dispatch)
    bid_prices = np.array(prices)
    if mech.settlement == Settlement.PAY_AS_CLEAR:
        payments = dispatch * clearing_price
    else:
        payments = dispatch * bid_prices
    return HourlyClearingResult(
        dispatch=dispatch,
        clearing_price=clearing_price,
        payments=payments,
        unserved=unserved,
        demand=float(demand),
        bid_prices=bid_prices,
        participating=np.array(participating, dtype=bool),
        offered=float(offered),
        settlement=mech.settlement,
    )


def truncated_normal(rng, sigma, bound=1.0):
    """One draw from N(0, sigma^2) restricted to [-bound, bound] by rejection."""
    while True:
        e = rng.normal(0.0, sigma)
        if -bound <= e <= bound:
            return e


def realize_renewable(spec, scheduled, rng):
    """Actual output for a scheduled quantity; thermal units deliver exactly."""
    if not spec.renewable or spec.forecast_sigma == 0 or scheduled == 0:
        return scheduled
    return scheduled * (1.0 + truncated_normal(rng, spec.forecast_sigma))


def genco_reward(spec, bid, result, realized, prev_participation, mech):
    """Hourly profit in USD for one GENCO.

    payment - variable cost - fixed cost if participating - switching cost
    on a participation toggle - renewable deviation penalty, the latter
    priced at the settlement price this GENCO faced.
    """
    i = spec.id
    dispatched = float(result.dispatch[i])
    reward = float(result.payments[i]) - spec.marginal_cost * dispatched
    if bid.participate:
        reward -= spec.fixed_cost
    if bool(bid.participate) != bool(prev_participation):
        reward -= spec.switching_cost
    if spec.renewable:
        price = result.clearing_price if mech.settlement == Settlement.PAY_AS_CLEAR else bid.price
        reward -= mech.penalty_coeff * abs(realized - dispatched) * price
    return reward


def social_welfare(results, specs, valuation):
    """Consumer value of served energy minus production cost, summed over hours."""
    if not valuation > 0:
        raise MarketError("valuation must be positive")
    costs = np.array([s.marginal_cost for s in validate_gencos(specs)])
    total = 0.0
    for r in results:
        total += valuation * float(r.dispatch.sum()) - float(costs @ r.dispatch)
    return total


def hhi(energy):
    """Herfindahl-Hirschman index of per-firm energy; 10000 if nothing traded."""
    energy = np.asarray(energy, dtype=np.float64)
    total = energy.sum()
    if total <= 0:
        return 10000.0
    shares = 100.0 * energy / total
    return float(np.sum(shares**2))


def market_metrics(results, specs, valuation, total_offered=None):
    if not results:
        raise MarketError("market_metrics needs at least one hour of results")
    specs = validate_gencos(specs)
    energy = np.sum([r.dispatch for r in results], axis=0)
    renewable = np.array([s.renewable for s in specs])
    total = float(energy.sum())
    rp = float(energy[renewable].sum()) / total if total > 0 else 0.0
    if total_offered is None:
        total_offered = [r.offered for r in results]
    ratios = [o / r.demand for o, r in zip(total_offered, results) if r.demand > 0]
    sdr = float(np.mean(ratios)) if ratios else 0.0
    return MarketMetrics(
        social_welfare=social_welfare(results, specs, valuation),
        hhi=hhi(energy),
        renewable_penetration=rp,
        supply_demand_ratio=sdr,
    )


CLEARING_FIELDS = ("hour", "genco_id", "dispatch", "price", "payment", "unserved")


def clearing_rows(results, start_hour=0):
    for h, r in enumerate(results, start=start_hour):
        for i in range(len(r.dispatch)):
            price = r.settlement_price(i) if r.dispatch[i] > 0 else 0.0
            yield {
                "hour": h,
                "genco_id": i,
                "dispatch": repr(float(r.dispatch[i])),
                "price": repr(float(price)),
                "payment": repr(float(r.payments[i])),
                "unserved": repr(float(r.unserved)),
            }


def write_clearing_csv(results, path, start_hour=0):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CLEARING_FIELDS)
        writer.writeheader()
        writer.writerows(clearing_rows(results, start_hour))


def read_clearing_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["hour"] = int(row["hour"])
        row["genco_id"] = int(row["genco_id"])
        for key in ("dispatch", "price", "payment", "unserved"):
            row[key] = float(row[key])
    return rows


@dataclass
class Scenario:
    """GENCO fleet plus an hourly demand profile of shape (days, 24)."""

    gencos: list
    demand: np.ndarray
    valuation: float = 500.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gencos = validate_gencos(self.gencos)
        self.demand = np.asarray(self.demand, dtype=np.float64)
        if self.demand.ndim != 2 or self.demand.shape[1] != 24 or self.demand.shape[0] < 1:
            raise MarketError(f"demand profile must have shape (days, 24), got {self.demand.shape}")
        if np.any(self.demand < 0) or not np.all(np.isfinite(self.demand)):
            raise MarketError("demand profile must be finite and non-negative")

    @property
    def total_capacity(self):
        return float(sum(s.capacity for s in self.gencos))

    @property
    def days(self):
        return self.demand.shape[0]
