"""Command-line interface.

Subcommands: simulate, reward, ledger, check, params, experiment. Exit codes:
0 on success (all requested assertions pass), 1 on an assertion or check
failure, 2 on usage or configuration errors. Structured outputs are JSON
(sorted keys) or CSV; identical inputs produce byte-identical artifacts.
The default output directory can be set with the BLOCKDAG_OUT environment
variable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .analysis import (
    check_desiderata,
    check_safe,
    utility_closed_form,
)
from .dag import DagError
from .ledgers import extended_ledger, ledger
from .params import (
    AlphaOutOfRange,
    InvalidTuple,
    NoSolution,
    ParamTuple,
    check_suitability,
    solve_min_nl,
)
from .rewards import reward_all, utility
from .serialize import dag_from_jsonl, history_from_jsonl, history_to_jsonl
from .sim import InvalidConfig, MinerConfig, SchedulerConfig, generate_schedule, run
from .strategies import make_strategy


class ConfigError(Exception):
    """A configuration document violates its schema; the message names the field."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_atomic(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


# -- config parsing -----------------------------------------------------------


def parse_scheduler_config(obj: dict) -> SchedulerConfig:
    try:
        miners = tuple(
            MinerConfig(
                power=m["power"],
                t_start=m.get("t_start", 1),
                t_end=m.get("t_end"),
            )
            for m in obj["miners"]
        )
        cfg = SchedulerConfig(
            t_max=obj["t_max"],
            delta=obj["delta"],
            n_colors=obj["n_colors"],
            miners=miners,
            delivery=obj.get("delivery", "uniform"),
            fixed_delay=obj.get("fixed_delay", 1),
            seed=obj.get("seed", 0),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"scheduler config field missing or malformed: {exc}") from exc
    try:
        return cfg.validated()
    except InvalidConfig as exc:
        raise ConfigError(str(exc)) from exc


def parse_strategies(specs, n_miners: int):
    if len(specs) != n_miners:
        raise ConfigError(
            f"strategies: expected {n_miners} entries (one per miner), got {len(specs)}"
        )
    factories = []
    for idx, spec in enumerate(specs):
        if isinstance(spec, str):
            name, params = spec, {}
        elif isinstance(spec, dict):
            name = spec.get("name")
            params = {k: v for k, v in spec.items() if k != "name"}
        else:
            raise ConfigError(f"strategies[{idx}] must be a name or an object")
        try:
            make_strategy(name, **params)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"strategies[{idx}]: {exc}") from exc
        factories.append((name, params))
    return factories


def parse_param_tuple(obj: dict) -> ParamTuple:
    try:
        tup = ParamTuple(
            n_colors=obj["n_colors"],
            n_ell=obj["n_ell"],
            delta=obj["delta"],
            delta_c=obj["delta_c"],
            t_max=obj["t_max"],
            alpha=obj["alpha"],
            delta_net=obj["delta_net"],
            epsilon=obj["epsilon"],
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"params field missing or malformed: {exc}") from exc
    try:
        return tup.validated()
    except InvalidTuple as exc:
        raise ConfigError(str(exc)) from exc


def parse_seeds(spec) -> list[int]:
    if isinstance(spec, str):
        lo, _, hi = spec.partition("..")
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError as exc:
            raise ConfigError(f"seeds: expected 'a..b', got {spec!r}") from exc
    if isinstance(spec, list):
        return [int(s) for s in spec]
    raise ConfigError("seeds must be a 'a..b' string or a list of integers")


# -- subcommands --------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg_doc = json.loads(Path(args.config).read_text())
    cfg = parse_scheduler_config(cfg_doc)
    factories = parse_strategies(cfg_doc.get("strategies", ["honest"] * len(cfg.miners)), len(cfg.miners))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for seed in parse_seeds(args.seeds):
        run_cfg = replace(cfg, seed=seed)
        strategies = [make_strategy(name, **params) for name, params in factories]
        history = run(run_cfg, strategies)
        _write_atomic(out_dir / f"history-{seed:05d}.jsonl", history_to_jsonl(history))
    return 0


def _cmd_reward(args) -> int:
    dag = dag_from_jsonl(Path(args.dag).read_text())
    reports = reward_all(dag, args.nl)
    lines = []
    for bid, rep in reports.items():
        lines.append(
            _dumps(
                {
                    "block": bid,
                    "acceptable": rep.acceptable,
                    "forked": rep.forked,
                    "reward": rep.reward,
                    "witness": list(rep.witness) if rep.witness is not None else None,
                }
            )
        )
    out = "\n".join(lines) + "\n"
    if args.out:
        _write_atomic(Path(args.out), out)
    else:
        sys.stdout.write(out)
    return 0


def _cmd_ledger(args) -> int:
    dag = dag_from_jsonl(Path(args.dag).read_text())
    if args.extended:
        if args.nl is None:
            raise ConfigError("--extended requires --nl")
        seq = list(extended_ledger(dag, args.color, args.nl).blocks)
    else:
        seq = list(ledger(dag, args.color).blocks)
    sys.stdout.write(_dumps({"color": args.color, "blocks": seq}) + "\n")
    return 0


def _cmd_check(args) -> int:
    history = history_from_jsonl(Path(args.history).read_text())
    params_doc = json.loads(Path(args.params).read_text())
    params = parse_param_tuple(params_doc)
    c_hat = params_doc.get("c_hat", 0)
    honest = params_doc.get("honest")
    safety = check_safe(history, params)
    desiderata = check_desiderata(history, params, c_hat, honest=honest)
    doc = {"safety": safety.as_dict(), "desiderata": desiderata.as_dict()}
    out = _dumps(doc) + "\n"
    if args.out:
        _write_atomic(Path(args.out), out)
    else:
        sys.stdout.write(out)
    return 0 if safety.passed and desiderata.passed else 1


def _cmd_params(args) -> int:
    if args.params_cmd == "check":
        tup = ParamTuple(
            n_colors=args.nc,
            n_ell=args.nl,
            delta=args.delta if args.delta is not None else (0.5 - args.alpha) / 2,
            delta_c=args.deltac,
            t_max=args.tmax if args.tmax is not None else args.nl**2,
            alpha=args.alpha,
            delta_net=args.delta_net,
            epsilon=args.epsilon,
        )
        try:
            verdict = check_suitability(tup)
        except InvalidTuple as exc:
            raise ConfigError(str(exc)) from exc
        sys.stdout.write(_dumps(verdict.as_dict()) + "\n")
        return 0 if verdict.passed else 1
    if args.params_cmd == "solve":
        try:
            n_ell, tup = solve_min_nl(
                alpha=args.alpha,
                epsilon=args.epsilon,
                delta_net=args.delta_net,
                n_colors=args.nc,
                delta_c=args.deltac,
            )
        except (NoSolution, InvalidTuple, AlphaOutOfRange) as exc:
            sys.stdout.write(_dumps({"error": str(exc)}) + "\n")
            return 1
        sys.stdout.write(
            _dumps(
                {
                    "n_ell": n_ell,
                    "tuple": {
                        "n_colors": tup.n_colors,
                        "n_ell": tup.n_ell,
                        "delta": tup.delta,
                        "delta_c": tup.delta_c,
                        "t_max": tup.t_max,
                        "alpha": tup.alpha,
                        "delta_net": tup.delta_net,
                        "epsilon": tup.epsilon,
                    },
                }
            )
            + "\n"
        )
        return 0
    raise ConfigError(f"unknown params subcommand {args.params_cmd!r}")


def _experiment_seed(payload: tuple) -> dict:
    """Worker: simulate one seed of an experiment and return its artifacts."""
    spec, seed = payload
    cfg = parse_scheduler_config(spec["scheduler"])
    cfg = replace(cfg, seed=seed)
    factories = parse_strategies(
        spec["scheduler"].get("strategies", ["honest"] * len(cfg.miners)), len(cfg.miners)
    )
    params = parse_param_tuple(spec["params"]) if "params" in spec else None
    c_hat = spec.get("c_hat", spec.get("params", {}).get("c_hat", 0))
    n_ell = spec.get("n_ell", params.n_ell if params else 1)
    outputs = set(spec.get("outputs", []))

    schedule = generate_schedule(cfg)
    strategies = [make_strategy(name, **kw) for name, kw in factories]
    history = run(cfg, strategies, schedule)

    result: dict = {"seed": seed}
    if "histories" in outputs:
        result["history_jsonl"] = history_to_jsonl(history)
    if "safety" in outputs:
        if params is None:
            raise ConfigError("outputs.safety requires a params tuple")
        result["safety"] = check_safe(history, params).as_dict()
    if "desiderata" in outputs:
        if params is None:
            raise ConfigError("outputs.desiderata requires a params tuple")
        result["desiderata"] = check_desiderata(history, params, c_hat).as_dict()
    if "utilities" in outputs:
        rows = []
        for miner in range(len(cfg.miners)):
            rep = utility(history, miner, cfg.t_max, n_ell)
            rows.append(
                {
                    "miner": miner,
                    "numerator": rep.numerator,
                    "denominator": rep.denominator,
                    "utility": rep.utility,
                }
            )
        result["utilities"] = rows
    if "ledgers" in outputs:
        result["ledger"] = list(ledger(history.global_view(), c_hat).blocks)
    if "rewards" in outputs:
        reports = reward_all(history.global_view(), n_ell)
        result["rewards"] = [
            {"block": bid, "reward": rep.reward, "acceptable": rep.acceptable, "forked": rep.forked}
            for bid, rep in reports.items()
        ]
    if "baseline_strategies" in spec:
        adv_idx = spec.get("adversary_index", 0)
        base_factories = parse_strategies(spec["baseline_strategies"], len(cfg.miners))
        base_strategies = [make_strategy(name, **kw) for name, kw in base_factories]
        base_history = run(cfg, base_strategies, schedule)
        u_base = utility(base_history, adv_idx, cfg.t_max, n_ell).utility or 0.0
        u_dev = utility(history, adv_idx, cfg.t_max, n_ell).utility or 0.0
        result["comparison"] = {
            "seed": seed,
            "baseline_utility": u_base,
            "deviant_utility": u_dev,
            "delta": u_dev - u_base,
        }
    return result


def run_experiment(spec: dict, out_dir: Path, workers: int = 1) -> int:
    """Simulate every seed, write artifacts, evaluate assertions.

    Returns the process exit code: 0 when all requested assertions hold.
    """
    seeds = parse_seeds(spec.get("seeds", [0]))
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads = [(spec, seed) for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_experiment_seed, payloads))
    else:
        results = [_experiment_seed(p) for p in payloads]
    results.sort(key=lambda r: r["seed"])

    for res in results:
        if "history_jsonl" in res:
            _write_atomic(out_dir / f"history-{res['seed']:05d}.jsonl", res.pop("history_jsonl"))

    summary: dict = {"seeds": seeds, "name": spec.get("name", "experiment")}

    if any("safety" in r for r in results):
        _write_atomic(
            out_dir / "safety.json",
            _dumps([{"seed": r["seed"], **r["safety"]} for r in results]) + "\n",
        )
        safe_count = sum(1 for r in results if r["safety"]["passed"])
        summary["safe_fraction"] = safe_count / len(results)
    if any("desiderata" in r for r in results):
        _write_atomic(
            out_dir / "desiderata.json",
            _dumps([{"seed": r["seed"], **r["desiderata"]} for r in results]) + "\n",
        )
        summary["desiderata_ok"] = all(r["desiderata"]["desiderata_ok"] for r in results)
    if any("utilities" in r for r in results):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seed", "miner", "numerator", "denominator", "utility"])
        for r in results:
            for row in r["utilities"]:
                writer.writerow(
                    [
                        r["seed"],
                        row["miner"],
                        row["numerator"],
                        row["denominator"],
                        "" if row["utility"] is None else repr(row["utility"]),
                    ]
                )
        _write_atomic(out_dir / "utilities.csv", buf.getvalue())
    if any("ledger" in r for r in results):
        _write_atomic(
            out_dir / "ledgers.json",
            _dumps([{"seed": r["seed"], "ledger": r["ledger"]} for r in results]) + "\n",
        )
    for r in results:
        if "rewards" in r:
            _write_atomic(
                out_dir / f"rewards-{r['seed']:05d}.jsonl",
                "\n".join(_dumps(row) for row in r["rewards"]) + "\n",
            )
    if any("comparison" in r for r in results):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seed", "baseline_utility", "deviant_utility", "delta"])
        deltas = []
        for r in results:
            c = r["comparison"]
            deltas.append(c["delta"])
            writer.writerow(
                [c["seed"], repr(c["baseline_utility"]), repr(c["deviant_utility"]), repr(c["delta"])]
            )
        _write_atomic(out_dir / "comparison.csv", buf.getvalue())
        summary["mean_delta"] = sum(deltas) / len(deltas)

    failures = []
    asserts = spec.get("assertions", {})
    if "min_safe_fraction" in asserts and summary.get("safe_fraction", 0.0) < asserts["min_safe_fraction"]:
        failures.append(
            f"safe_fraction {summary.get('safe_fraction')} < {asserts['min_safe_fraction']}"
        )
    if asserts.get("require_desiderata") and not summary.get("desiderata_ok", False):
        failures.append("desiderata violations present")
    if "max_mean_delta" in asserts and summary.get("mean_delta", 0.0) > asserts["max_mean_delta"]:
        failures.append(f"mean_delta {summary.get('mean_delta')} > {asserts['max_mean_delta']}")
    summary["failures"] = failures
    summary["passed"] = not failures
    _write_atomic(out_dir / "summary.json", _dumps(summary) + "\n")
    return 0 if not failures else 1


def _cmd_experiment(args) -> int:
    spec = json.loads(Path(args.config).read_text())
    out_dir = Path(args.out)
    return run_experiment(spec, out_dir, workers=args.workers)


# -- argument parsing ----------------------------------------------------------


def _default_out() -> str:
    return os.environ.get("BLOCKDAG_OUT", "out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockdag",
        description="Simulate, score, and check color-partitioned blockdags.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="run seeded simulations and write history files")
    p.add_argument("--config", required=True, help="scheduler config JSON")
    p.add_argument("--seeds", required=True, help="seed range a..b")
    p.add_argument("--out", default=_default_out(), help="output directory")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("reward", help="emit one reward report JSON line per block")
    p.add_argument("--dag", required=True, help="dag JSONL file")
    p.add_argument("--nl", required=True, type=int, help="acceptability window n_ell")
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(fn=_cmd_reward)

    p = sub.add_parser("ledger", help="emit the ledger block-id sequence")
    p.add_argument("--dag", required=True, help="dag JSONL file")
    p.add_argument("--color", required=True, type=int, help="designated ledger color")
    p.add_argument("--extended", action="store_true", help="emit the all-colors ordering")
    p.add_argument("--nl", type=int, help="n_ell for the extended ordering")
    p.set_defaults(fn=_cmd_ledger)

    p = sub.add_parser("check", help="run safety and desiderata checks on a history")
    p.add_argument("--history", required=True, help="history JSONL file")
    p.add_argument("--params", required=True, help="parameter tuple JSON file")
    p.add_argument("--out", help="write the verdict JSON to a file")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("params", help="evaluate or solve the suitability constraints")
    psub = p.add_subparsers(dest="params_cmd", required=True)
    for name in ("check", "solve"):
        pp = psub.add_parser(name)
        pp.add_argument("--alpha", required=True, type=float)
        pp.add_argument("--epsilon", required=True, type=float)
        pp.add_argument("--delta-net", dest="delta_net", required=True, type=int)
        pp.add_argument("--nc", required=True, type=int)
        pp.add_argument("--deltac", required=True, type=float)
        if name == "check":
            pp.add_argument("--nl", required=True, type=int)
            pp.add_argument("--tmax", type=int)
            pp.add_argument("--delta", type=float)
        pp.set_defaults(fn=_cmd_params)

    p = sub.add_parser("experiment", help="orchestrate simulations, checks, and reports")
    p.add_argument("--config", required=True, help="experiment spec JSON")
    p.add_argument("--out", default=_default_out(), help="output directory")
    p.add_argument("--workers", type=int, default=1, help="seed worker processes")
    p.set_defaults(fn=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidConfig, InvalidTuple, AlphaOutOfRange, DagError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
