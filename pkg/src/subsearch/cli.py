"""Command-line entry point.

Subcommands: solve, sweep, ksweep, table4, gen-data,
analyze {delta,value-errors,monotonicity}, serve-check.

Every experiment flag can instead come from a JSON config file (--config);
flags given on the command line override file values, and anything left
unset falls back to the ExperimentConfig defaults. The documented config
keys are exactly the ExperimentConfig field names.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import bridge as bridge_mod
from .harness import (
    ENVIRONMENTS,
    KSWEEP_FIELDS,
    PLANNERS,
    PROVIDERS,
    SWEEP_FIELDS,
    ExperimentConfig,
    analyze_delta,
    analyze_monotonicity,
    analyze_value_errors,
    gen_data,
    run_k_sweep,
    run_sweep,
    run_table4_rows,
    solve_report,
    write_csv,
)

_CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))

TABLE4_FIELDS = ("sigma", "method", "success_rate", "trials", "seed")
DELTA_FIELDS = ("delta", "count", "fraction")
VALUE_ERROR_FIELDS = (
    "sigma",
    "mean_std",
    "std_samples",
    "mean_one_step_improvement",
    "improvement_pairs",
    "over_neighbor_probability",
    "over_neighbor_samples",
    "over_step_probability",
    "over_step_samples",
)
MONOTONICITY_FIELDS = ("step", "decrease_probability", "comparisons", "expected_gaussian")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints: {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text!r}") from exc


def _read_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")
    if not isinstance(data, dict):
        raise SystemExit(f"config {path} must hold a JSON object")
    return data


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        data.update(_read_config(args.config))
    for name in _CONFIG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"bad configuration: {exc}")


def _emit(rows: list[dict], fieldnames: tuple[str, ...], out: str | None) -> None:
    if out:
        write_csv(out, fieldnames, rows)
        print(f"wrote {len(rows)} row(s) to {out}")
    else:
        print(",".join(fieldnames))
        for row in rows:
            print(",".join(str(row[name]) for name in fieldnames))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (keys = config fields)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="parallel worker processes")
    parser.add_argument("--out", help="output path (CSV or dataset)")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--env", choices=ENVIRONMENTS)
    parser.add_argument("--planner", choices=PLANNERS)
    parser.add_argument("--provider", choices=PROVIDERS)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--budgets", type=_int_list, help="comma-separated budget list")
    parser.add_argument("--k", type=int)
    parser.add_argument("--c2", type=int, help="low-level step limit (default: k)")
    parser.add_argument("--c3", type=int, help="max proposals per generator call")
    parser.add_argument("--c4", type=float, help="cumulative-probability cutoff")
    parser.add_argument("--grid-m", type=int, dest="grid_m")
    parser.add_argument("--grid-n", type=int, dest="grid_n")
    parser.add_argument("--sigma", type=float, help="value noise std")
    parser.add_argument("--scramble-len", type=int, dest="scramble_len")
    parser.add_argument("--corpus", help="sokoban board file (default: bundled)")
    parser.add_argument("--graph-cap", type=int, dest="graph_cap")
    parser.add_argument("--dataset", help="trajectory file for the tabular provider")
    parser.add_argument("--table-radius", type=int, dest="table_radius")
    parser.add_argument("--bridge-cmd", dest="bridge_command", help="server command (stdio)")
    parser.add_argument("--host", dest="bridge_host", help="server host (TCP)")
    parser.add_argument("--port", type=int, dest="bridge_port", help="server port (TCP)")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--c-puct", type=float, dest="c_puct")
    parser.add_argument("--tau", type=float)
    parser.add_argument("--action-limit", type=int, dest="action_limit")
    parser.add_argument("--planner-call-limit", type=int, dest="planner_call_limit")
    parser.add_argument("--num-chains", type=int, dest="num_chains")
    parser.add_argument("--chain-length", type=int, dest="chain_length")


def _cmd_solve(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    report = solve_report(cfg, trial=args.trial, budget=args.budget)
    print(json.dumps(report, indent=2))
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    _emit(run_sweep(cfg), SWEEP_FIELDS, args.out)
    return 0


def _cmd_ksweep(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    _emit(run_k_sweep(cfg, args.ks), KSWEEP_FIELDS, args.out)
    return 0


def _cmd_table4(args: argparse.Namespace) -> int:
    rows = run_table4_rows(
        trials=args.trials if args.trials is not None else 1000,
        budget=args.budget,
        seed=args.seed if args.seed is not None else 0,
        m=args.grid_m if args.grid_m is not None else 6,
        n=args.grid_n if args.grid_n is not None else 10,
        k=args.k if args.k is not None else 4,
        c3=args.c3 if args.c3 is not None else 4,
        sigmas=tuple(args.sigmas),
    )
    _emit(rows, TABLE4_FIELDS, args.out)
    return 0


def _cmd_gen_data(args: argparse.Namespace) -> int:
    if not args.out:
        raise SystemExit("gen-data requires --out")
    count = gen_data(
        args.env or "rubik",
        args.out,
        count=args.count,
        scramble_len=args.scramble_len if args.scramble_len is not None else 8,
        seed=args.seed if args.seed is not None else 0,
    )
    print(f"wrote {count} records to {args.out}")
    return 0


def _cmd_analyze_delta(args: argparse.Namespace) -> int:
    rows = analyze_delta(
        args.corpus,
        k=args.k if args.k is not None else 4,
        num_subgoals=args.c3 if args.c3 is not None else 4,
        samples_per_board=args.samples,
        seed=args.seed if args.seed is not None else 0,
        cap=args.graph_cap if args.graph_cap is not None else 200_000,
    )
    _emit(rows, DELTA_FIELDS, args.out)
    return 0


def _cmd_analyze_value_errors(args: argparse.Namespace) -> int:
    rows = analyze_value_errors(
        args.corpus,
        sigma=args.sigma if args.sigma is not None else 0.0,
        radius=args.radius,
        min_set_size=args.min_set_size,
        improvement_step=args.improvement_step,
        repetitions=args.repetitions,
        seed=args.seed if args.seed is not None else 0,
        cap=args.graph_cap if args.graph_cap is not None else 200_000,
    )
    _emit(rows, VALUE_ERROR_FIELDS, args.out)
    return 0


def _cmd_analyze_monotonicity(args: argparse.Namespace) -> int:
    rows = analyze_monotonicity(
        args.corpus,
        sigma=args.sigma if args.sigma is not None else 0.0,
        steps=tuple(args.steps),
        seed=args.seed if args.seed is not None else 0,
        cap=args.graph_cap if args.graph_cap is not None else 200_000,
    )
    _emit(rows, MONOTONICITY_FIELDS, args.out)
    return 0


def _cmd_serve_check(args: argparse.Namespace) -> int:
    env_name = args.env or "rubik"
    try:
        if args.bridge_command:
            client = bridge_mod.stdio_client(args.bridge_command, env_name)
        elif args.bridge_host:
            client = bridge_mod.tcp_client(args.bridge_host, args.bridge_port or 0, env_name)
        else:
            raise SystemExit("serve-check requires --bridge-cmd or --host/--port")
        try:
            client.handshake()
            if args.probe_state:
                value = client.value(args.probe_state)
                print(f"probe value({args.probe_state!r}) = {value}")
        finally:
            client.close()
    except bridge_mod.BridgeError as exc:
        print(f"handshake failed: {exc}", file=sys.stderr)
        return 1
    print(f"handshake ok: protocol version {client.version}, env {env_name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subsearch",
        description="Subgoal-graph search planners and benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one seeded trial and print a JSON report")
    _add_common(p)
    _add_experiment_flags(p)
    p.add_argument("--trial", type=int, default=0, help="trial index (seeds derive from it)")
    p.add_argument("--budget", type=int, help="budget point (default: first of --budgets)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="success rate vs budget, CSV")
    _add_common(p)
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("ksweep", help="sweep repeated for each k, CSV")
    _add_common(p)
    _add_experiment_flags(p)
    p.add_argument("--ks", type=_int_list, required=True, help="comma-separated k list")
    p.set_defaults(func=_cmd_ksweep)

    p = sub.add_parser("table4", help="grid-world noise table (two planners x sigmas)")
    _add_common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--grid-m", type=int, dest="grid_m")
    p.add_argument("--grid-n", type=int, dest="grid_n")
    p.add_argument("--k", type=int)
    p.add_argument("--c3", type=int)
    p.add_argument("--sigmas", type=_float_list, default=[3.0, 10.0, 20.0])
    p.set_defaults(func=_cmd_table4)

    p = sub.add_parser("gen-data", help="write a trajectory dataset (TSV)")
    _add_common(p)
    p.add_argument("--env", choices=ENVIRONMENTS)
    p.add_argument("--count", type=int, required=True, help="trajectory count")
    p.add_argument("--scramble-len", type=int, dest="scramble_len")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("analyze", help="corpus diagnostics, CSV")
    asub = p.add_subparsers(dest="analysis", required=True)

    pa = asub.add_parser("delta", help="distance-improvement histogram of the generator")
    _add_common(pa)
    pa.add_argument("--corpus")
    pa.add_argument("--k", type=int)
    pa.add_argument("--c3", type=int, help="proposals per generator call")
    pa.add_argument("--samples", type=int, default=20, help="sampled states per board")
    pa.add_argument("--graph-cap", type=int, dest="graph_cap")
    pa.set_defaults(func=_cmd_analyze_delta)

    pa = asub.add_parser("value-errors", help="value-noise statistics along solutions")
    _add_common(pa)
    pa.add_argument("--corpus")
    pa.add_argument("--sigma", type=float)
    pa.add_argument("--radius", type=int, default=3)
    pa.add_argument("--min-set-size", type=int, dest="min_set_size", default=5)
    pa.add_argument("--improvement-step", type=int, dest="improvement_step", default=4)
    pa.add_argument("--repetitions", type=int, default=1)
    pa.add_argument("--graph-cap", type=int, dest="graph_cap")
    pa.set_defaults(func=_cmd_analyze_value_errors)

    pa = asub.add_parser("monotonicity", help="value decrease along solution paths")
    _add_common(pa)
    pa.add_argument("--corpus")
    pa.add_argument("--sigma", type=float)
    pa.add_argument("--steps", type=_int_list, default=[1, 2, 3, 4])
    pa.add_argument("--graph-cap", type=int, dest="graph_cap")
    pa.set_defaults(func=_cmd_analyze_monotonicity)

    p = sub.add_parser("serve-check", help="bridge handshake test")
    p.add_argument("--env", choices=ENVIRONMENTS)
    p.add_argument("--bridge-cmd", dest="bridge_command")
    p.add_argument("--host", dest="bridge_host")
    p.add_argument("--port", type=int, dest="bridge_port")
    p.add_argument("--probe-state", dest="probe_state", help="also issue one value query")
    p.set_defaults(func=_cmd_serve_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
