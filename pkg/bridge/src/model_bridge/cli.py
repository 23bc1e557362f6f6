"""Command line front end: fit a model from a dataset, serve a fitted model."""

from __future__ import annotations

import argparse
import sys

from .model import fit, load_model, save_model
from .records import read_records
from .server import serve_stdio, serve_tcp


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="model-bridge",
        description="Tabular model server for the subgoal search wire protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit_p = sub.add_parser("fit", help="fit a tabular model from a trajectory dataset")
    fit_p.add_argument("--dataset", required=True, help="trajectory record file (TSV)")
    fit_p.add_argument("--k", type=int, required=True, help="subgoal horizon")
    fit_p.add_argument(
        "--default-value",
        type=float,
        default=None,
        help="value for unseen states (default: -2 x longest trajectory)",
    )
    fit_p.add_argument("--out", required=True, help="where to write the model file")

    serve_p = sub.add_parser("serve", help="serve a fitted model over the wire protocol")
    serve_p.add_argument("--model", required=True, help="model file written by fit")
    serve_p.add_argument("--env", required=True, help="environment name to accept in hello")
    serve_p.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=None)

    args = parser.parse_args(argv)

    if args.command == "fit":
        if args.k < 1:
            parser.error("--k must be at least 1")
        try:
            records = read_records(args.dataset)
            model = fit(records, args.k, args.default_value)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        save_model(model, args.out)
        print(
            f"fitted k={model.k}: {len(model.subgoal_table)} states, "
            f"{len(model.policy_table)} policy pairs -> {args.out}"
        )
        return 0

    try:
        model = load_model(args.model)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.transport == "stdio":
        serve_stdio(model, args.env)
    else:
        if args.port is None:
            parser.error("--port is required with --transport tcp")
        serve_tcp(model, args.env, args.host, args.port)
    return 0
