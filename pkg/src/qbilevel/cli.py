"""``qbilevel`` command line: run, compare, validate.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
Log verbosity comes from ``QBILEVEL_LOG`` (DEBUG, INFO, WARNING, ...).
"""
import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import KERNEL_BACKEND, __version__, madqn, ppo
from .bilevel import run_experiment
from .config import ConfigError, build_lower, dump_config, load_config, validate
from .market import Settlement

log = logging.getLogger("qbilevel")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

MONTHLY_FIELDS = (
    "month",
    "price_cap",
    "settlement",
    "penalty_coeff",
    "social_welfare",
    "hhi",
    "renewable_penetration",
    "supply_demand_ratio",
    "reward",
    "mean_agent_reward",
)
COMPARISON_FIELDS = ("metric", "vqc", "mlp")
COMPARISON_METRICS = ("settlement_rule", "price_cap", "penalty_coefficient", "social_welfare")
# Published figures for the two arms, shown next to desk-scale results.
REFERENCE = {
    "vqc": {"settlement_rule": "pay_as_clear", "price_cap": "[0,396]", "penalty_coefficient": "9%",
            "social_welfare": 3520736},
    "mlp": {"settlement_rule": "pay_as_clear", "price_cap": "[0,125]", "penalty_coefficient": "15%",
            "social_welfare": 1354578},
}


def _num(value):
    return repr(float(value))


def settlement_name(value):
    return Settlement(int(value)).name.lower()


def monthly_rows(record):
    for i, (m, r) in enumerate(zip(record.months, record.rewards)):
        rewards = m.agent_rewards
        yield {
            "month": i,
            "price_cap": _num(m.mechanism.price_cap),
            "settlement": settlement_name(m.mechanism.settlement),
            "penalty_coeff": _num(m.mechanism.penalty_coeff),
            "social_welfare": _num(m.metrics.social_welfare),
            "hhi": _num(m.metrics.hhi),
            "renewable_penetration": _num(m.metrics.renewable_penetration),
            "supply_demand_ratio": _num(m.metrics.supply_demand_ratio),
            "reward": _num(r),
            "mean_agent_reward": _num(sum(rewards) / len(rewards)) if rewards else "",
        }


def write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_dict(record, config, status, error=None):
    best = record.best if record.months else None
    out = {
        "status": status,
        "version": __version__,
        "backend": config.backend,
        "kernel_backend": KERNEL_BACKEND,
        "seed": config.seed,
        "months": len(record.months),
        "upper_steps": max(len(record.months) - 1, 0),
        "stop_reason": record.stop_reason,
        "best_month": record.best_index if best else None,
        "initial_social_welfare": record.months[0].metrics.social_welfare if record.months else None,
        "durations_s": [m.duration for m in record.months],
    }
    if best is not None:
        out["final_mechanism"] = {
            "price_cap": best.mechanism.price_cap,
            "settlement": settlement_name(best.mechanism.settlement),
            "penalty_coeff": best.mechanism.penalty_coeff,
        }
        out["final_social_welfare"] = best.metrics.social_welfare
        out["final_reward"] = record.rewards[record.best_index]
    if error:
        out["error"] = error
    return out


def write_record(out, record, config, status="complete", error=None):
    """Write (or refresh) every file of an experiment directory."""
    out = Path(out)
    agents_dir = out / "agents"
    agents_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out / "monthly.csv", MONTHLY_FIELDS, monthly_rows(record))
    ppo.write_trace(record.trace, out / "ppo_trace.csv")
    per_agent = {}
    for month in record.months:
        for row in month.telemetry:
            per_agent.setdefault(row["agent"], []).append(row)
    for agent, rows in sorted(per_agent.items()):
        madqn.write_telemetry(rows, agents_dir / f"agent_{agent}.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary_dict(record, config, status, error), fh, indent=2)


def execute(config, out, lower=None):
    """Run one experiment into ``out``. Partial results are flushed after every month."""
    scenario = validate(config) if lower is None else None
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(dump_config(config) + "\n")
    if lower is None:
        lower = build_lower(config, scenario=scenario)
    latest = {}

    def flush(record):
        latest["record"] = record
        write_record(out, record, config, status="running")

    try:
        record = run_experiment(
            lower,
            config.ppo,
            config.reward_weights,
            config.stop_rule,
            config.initial_mechanism.build(),
            config.seed,
            rollout_len=config.rollout_len,
            on_month=flush,
        )
    except Exception as exc:
        if "record" in latest:
            write_record(out, latest["record"], config, status="aborted", error=f"{type(exc).__name__}: {exc}")
        raise
    write_record(out, record, config)
    return record


def comparison_rows(arms):
    values = {}
    for backend, record in arms.items():
        mech = record.final_mechanism
        values[backend] = {
            "settlement_rule": settlement_name(mech.settlement),
            "price_cap": _num(mech.price_cap),
            "penalty_coefficient": _num(mech.penalty_coeff),
            "social_welfare": _num(record.final_sw),
        }
    return [{"metric": m, **{b: values[b][m] for b in COMPARISON_FIELDS[1:]}} for m in COMPARISON_METRICS]


def format_comparison(rows):
    lines = [f"{'metric':<22}{'vqc':>18}{'mlp':>18}   reference (vqc / mlp)"]
    for row in rows:
        m = row["metric"]
        cells = []
        for b in ("vqc", "mlp"):
            v = row[b]
            if m == "price_cap":
                v = f"[0,{float(v):.1f}]"
            elif m == "penalty_coefficient":
                v = f"{100 * float(v):.1f}%"
            elif m == "social_welfare":
                v = f"{float(v):,.0f}"
            cells.append(v)
        ref = REFERENCE["vqc"][m], REFERENCE["mlp"][m]
        if m == "social_welfare":
            ref = tuple(f"{r:,}" for r in ref)
        lines.append(f"{m:<22}{cells[0]:>18}{cells[1]:>18}   {ref[0]} / {ref[1]}")
    return "\n".join(lines)


def compare(config, out, make_lower=None):
    """Run both backends from the same scenario and seed; returns the comparison rows.

    ``make_lower(config, backend)`` may supply a substitute lower level.
    """
    validate(config)
    out = Path(out)
    arms = {}
    failures = {}
    for backend in ("vqc", "mlp"):
        arm_config = config.replace(backend=backend)
        lower = make_lower(arm_config, backend) if make_lower else None
        try:
            arms[backend] = execute(arm_config, out / backend, lower)
        except Exception as exc:
            failures[backend] = f"{type(exc).__name__}: {exc}"
            log.error("%s arm failed: %s", backend, exc)
    rows = comparison_rows(arms) if not failures else []
    if rows:
        write_csv(out / "comparison.csv", COMPARISON_FIELDS, rows)
    with open(out / "comparison.json", "w") as fh:
        json.dump(
            {
                "status": "complete" if not failures else "incomplete",
                "seed": config.seed,
                "rows": rows,
                "failures": failures,
                "reference": REFERENCE,
            },
            fh,
            indent=2,
        )
    if failures:
        raise RuntimeError("comparison incomplete: " + "; ".join(f"{k}: {v}" for k, v in failures.items()))
    return rows


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="qbilevel", description="Bilevel electricity-market mechanism design experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run one experiment"),
        ("compare", "run the vqc and mlp backends side by side"),
        ("validate", "check a config file and exit"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output directory (default runs/<command>-seed<seed>)")
        p.add_argument("--smoke", action="store_true", help="2-day months, at most 2 upper steps")
    return parser


def _setup_logging():
    level = os.environ.get("QBILEVEL_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must lie in [0, 2^64)")
            config = config.replace(seed=args.seed)
        if args.smoke:
            config = config.smoke()
        validate(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {args.config} (backend {config.backend}, seed {config.seed})")
        return EXIT_OK

    out = Path(args.out or f"runs/{args.command}-seed{config.seed}")
    start = time.perf_counter()
    try:
        if args.command == "run":
            record = execute(config, out)
            best = record.best
            print(
                f"{len(record.months)} months ({record.stop_reason}); best month {record.best_index}: "
                f"PC={best.mechanism.price_cap:.1f} {settlement_name(best.mechanism.settlement)} "
                f"P={best.mechanism.penalty_coeff:.3f} SW={best.metrics.social_welfare:,.0f}"
            )
        else:
            rows = compare(config, out)
            print(format_comparison(rows))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {out} in {time.perf_counter() - start:.1f}s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
