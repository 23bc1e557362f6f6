"""Experiment runner: budget sweeps, k sweeps, datasets, analysis, CSV.

A run is described by an ExperimentConfig built from primitives only, so a
config round-trips through JSON and fully determines its outputs (modulo the
timestamp comment heading each CSV). Every trial derives its own seed from
the master seed and the trial index, and aggregation sorts results by trial
index, which makes results independent of worker count and scheduling.

Budget semantics differ by planner: the best-first planners and the chain
sampler sweep the node budget (seen-set size), while the tree-search
planners sweep passes per planner call. Reported graph sizes use the
environment's counting convention (the cube environment includes low-level
path nodes; the others count subgoal nodes only).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from random import Random
from typing import Iterable, Sequence

from . import bridge as bridge_mod
from .datasets import read_dataset, write_dataset
from .envs import grid as grid_mod
from .envs import rubik as rubik_mod
from .envs import sokoban as sokoban_mod
from .envs import sokoban_analysis as analysis_mod
from .mcts import MctsConfig, mcts_solve
from .providers import (
    fit_tabular,
    make_tabular_bundle,
    oracle_bundle,
    with_noisy_value,
)
from .search import bf_ksubs_solve, chain_sampler_solve, graph_size
from .seeds import derive_seed
from .types import (
    CountingPolicy,
    Environment,
    ProviderBundle,
    SearchConfig,
    SearchResult,
)

__all__ = [
    "ExperimentConfig",
    "ENVIRONMENTS",
    "PLANNERS",
    "PROVIDERS",
    "solve_one",
    "solve_report",
    "run_sweep",
    "run_k_sweep",
    "run_table4_rows",
    "gen_data",
    "analyze_delta",
    "analyze_value_errors",
    "analyze_monotonicity",
    "write_csv",
    "SWEEP_FIELDS",
    "KSWEEP_FIELDS",
]

ENVIRONMENTS = ("grid", "rubik", "sokoban")
PLANNERS = (
    "bf-ksubs",
    "bestfs-baseline",
    "mcts-ksubs",
    "mcts-baseline",
    "chain-sampler",
)
PROVIDERS = ("oracle", "synthetic", "tabular", "bridge")

SWEEP_FIELDS = (
    "budget",
    "method",
    "success_rate",
    "mean_graph_size",
    "mean_path_length",
    "trials",
    "seed",
)
KSWEEP_FIELDS = ("k",) + SWEEP_FIELDS

_COUNTING = {
    "grid": CountingPolicy.SUBGOALS_ONLY,
    "rubik": CountingPolicy.SUBGOALS_PLUS_POLICY_NODES,
    "sokoban": CountingPolicy.SUBGOALS_ONLY,
}


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    Environment-specific fields are ignored by the other environments;
    provider fields likewise. `budgets` is the sweep axis: node budget for
    best-first/chain planners, passes per planner call for tree search.
    """

    env: str = "rubik"
    planner: str = "bf-ksubs"
    provider: str = "oracle"
    trials: int = 100
    budgets: tuple[int, ...] = (1500,)
    seed: int = 0
    workers: int = 1
    # search knobs
    k: int = 4
    c2: int | None = None  # low-level step limit; defaults to k
    c3: int = 4
    c4: float = 1.0
    detect_solved_on_path: bool = False
    # environment parameters
    grid_m: int = 6
    grid_n: int = 10
    sigma: float = 0.0
    scramble_len: int = 5
    corpus: str | None = None  # sokoban board file; None selects the bundled set
    graph_cap: int = 200_000
    # provider parameters
    dataset: str | None = None
    table_radius: int = 5
    bridge_command: str | None = None
    bridge_host: str | None = None
    bridge_port: int = 0
    # tree-search knobs
    gamma: float = 0.99
    c_puct: float = 1.0
    tau: float = 1.0
    action_limit: int = 24
    planner_call_limit: int = 8
    # chain-sampler knobs
    num_chains: int = 64
    chain_length: int = 16

    def __post_init__(self) -> None:
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown env {self.env!r}; expected one of {ENVIRONMENTS}")
        if self.planner not in PLANNERS:
            raise ValueError(
                f"unknown planner {self.planner!r}; expected one of {PLANNERS}"
            )
        if self.provider not in PROVIDERS:
            raise ValueError(
                f"unknown provider {self.provider!r}; expected one of {PROVIDERS}"
            )
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        self.budgets = tuple(int(b) for b in self.budgets)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["budgets"] = list(self.budgets)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# ---------- per-process context (bundles are closures, so workers rebuild
# them from the config instead of unpickling them)

_CONTEXTS: dict = {}


class _Context:
    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.env: Environment
        self.boards: list | None = None
        if cfg.env == "grid":
            self.env = grid_mod.GridModel(cfg.grid_m, cfg.grid_n)
        elif cfg.env == "rubik":
            self.env = rubik_mod.RubikModel()
        else:
            self.env = sokoban_mod.SokobanModel()
            self.boards = _load_boards(cfg.corpus)
        self._tabular: dict[int, object] = {}
        self._client = None

    def instance(self, trial: int):
        cfg = self.cfg
        if cfg.env == "grid":
            return self.env.start()
        if cfg.env == "rubik":
            state, _ = rubik_mod.scramble(
                cfg.scramble_len, Random(derive_seed(cfg.seed, trial))
            )
            return state
        boards = self.boards or []
        if not boards:
            raise ValueError("sokoban corpus is empty")
        return boards[trial % len(boards)]

    def bundle(self, instance, k: int, trial_seed: int) -> ProviderBundle:
        cfg = self.cfg
        if cfg.provider == "synthetic":
            if cfg.env != "grid":
                raise ValueError("the synthetic provider exists only for grid")
            grid_cfg = grid_mod.GridConfig(
                m=cfg.grid_m, n=cfg.grid_n, sigma=cfg.sigma, k=k, c3=cfg.c3,
                seed=trial_seed,
            )
            return grid_mod.make_grid_bundle(self.env, grid_cfg)
        if cfg.provider == "oracle":
            bundle = oracle_bundle(
                self.env,
                k,
                instance=instance if cfg.env == "sokoban" else None,
                table_radius=cfg.table_radius,
                cap=cfg.graph_cap,
            )
            if cfg.sigma > 0:
                bundle = with_noisy_value(bundle, cfg.sigma, seed=trial_seed)
            return bundle
        if cfg.provider == "tabular":
            if cfg.dataset is None:
                raise ValueError("tabular provider needs a dataset path")
            model = self._tabular.get(k)
            if model is None:
                model = fit_tabular(read_dataset(cfg.dataset), k)
                self._tabular[k] = model
            return make_tabular_bundle(model, self.env)
        # bridge: one connection per worker process, opened lazily
        if self._client is None:
            self._client = _open_client(cfg)
        return bridge_mod.make_bridge_bundle(self._client, self.env, k)


def _open_client(cfg: ExperimentConfig) -> bridge_mod.BridgeClient:
    if cfg.bridge_command:
        client = bridge_mod.stdio_client(cfg.bridge_command, cfg.env)
    elif cfg.bridge_host:
        client = bridge_mod.tcp_client(cfg.bridge_host, cfg.bridge_port, cfg.env)
    else:
        raise ValueError("bridge provider needs bridge_command or bridge_host/port")
    client.handshake()
    return client


def _load_boards(corpus: str | None) -> list:
    if corpus is None:
        return sokoban_mod.load_micro_corpus()
    return sokoban_mod.load_board_file(corpus)


def _context(cfg_dict: dict) -> _Context:
    fp = json.dumps(cfg_dict, sort_keys=True)
    ctx = _CONTEXTS.get(fp)
    if ctx is None:
        ctx = _Context(ExperimentConfig.from_dict(cfg_dict))
        _CONTEXTS[fp] = ctx
    return ctx


# ---------- single solves

def solve_one(cfg: ExperimentConfig, trial: int, budget: int, k: int | None = None) -> SearchResult:
    """Runs one seeded trial at one budget point. Deterministic."""
    return _run_trial(_context(cfg.to_dict()), trial, budget, k or cfg.k)


def _run_trial(ctx: _Context, trial: int, budget: int, k: int) -> SearchResult:
    cfg = ctx.cfg
    planner = cfg.planner
    k_eff = 1 if planner == "bestfs-baseline" else k
    trial_seed = derive_seed(cfg.seed, trial)
    instance = ctx.instance(trial)
    bundle = ctx.bundle(instance, k_eff, trial_seed)
    node_budget = budget if planner in ("bf-ksubs", "bestfs-baseline", "chain-sampler") else max(budget, 1)
    search_cfg = SearchConfig(
        k=k_eff,
        c1_max_nodes=node_budget,
        c2_step_limit=cfg.c2 if cfg.c2 is not None else max(k_eff, 1),
        c3_num_subgoals=cfg.c3,
        c4_target_prob=cfg.c4,
        counting_policy=_COUNTING[cfg.env],
        rng_seed=trial_seed,
        detect_solved_on_path=cfg.detect_solved_on_path,
    )
    if planner in ("bf-ksubs", "bestfs-baseline"):
        return bf_ksubs_solve(instance, ctx.env, bundle, search_cfg)
    if planner == "chain-sampler":
        return chain_sampler_solve(
            instance, ctx.env, bundle, search_cfg,
            num_chains=cfg.num_chains, chain_length=cfg.chain_length, budget=budget,
        )
    mcts_cfg = MctsConfig(
        passes_per_call=budget,
        gamma=cfg.gamma,
        c_puct=cfg.c_puct,
        tau=cfg.tau,
        action_limit=cfg.action_limit,
        planner_call_limit=cfg.planner_call_limit,
        rng_seed=trial_seed,
    )
    children = "ksubs" if planner == "mcts-ksubs" else "baseline"
    return mcts_solve(instance, ctx.env, bundle, children, mcts_cfg, search_cfg)


def _solve_task(payload: tuple) -> dict:
    """Worker entry: returns a plain-dict trial record (pickle-friendly)."""
    cfg_dict, trial, budget, k = payload
    ctx = _context(cfg_dict)
    try:
        result = _run_trial(ctx, trial, budget, k)
    except bridge_mod.BridgeHandshakeError:
        raise  # provider handshake failures abort the sweep
    except Exception as exc:  # per-trial solver errors are data, not crashes
        return {
            "trial": trial, "budget": budget, "k": k, "solved": False,
            "graph": 0, "path_len": 0, "error": f"{type(exc).__name__}: {exc}",
        }
    return {
        "trial": trial,
        "budget": budget,
        "k": k,
        "solved": result.solved,
        "graph": graph_size(result.metrics, _COUNTING[cfg_dict["env"]]),
        "path_len": len(result.actions),
        "error": None,
    }


def solve_report(cfg: ExperimentConfig, trial: int = 0, budget: int | None = None) -> dict:
    """One trial, reported as a JSON-ready summary with action tokens."""
    ctx = _context(cfg.to_dict())
    point = budget if budget is not None else cfg.budgets[0]
    result = _run_trial(ctx, trial, point, cfg.k)
    return {
        "env": cfg.env,
        "planner": cfg.planner,
        "provider": cfg.provider,
        "trial": trial,
        "budget": point,
        "status": result.status.value,
        "solved": result.solved,
        "actions": [ctx.env.action_token(a) for a in result.actions],
        "graph_size": graph_size(result.metrics, _COUNTING[cfg.env]),
        "metrics": dataclasses.asdict(result.metrics),
    }


# ---------- sweeps

def _run_tasks(cfg: ExperimentConfig, tasks: list[tuple]) -> list[dict]:
    if cfg.workers <= 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_solve_task, tasks, chunksize=8))


def _aggregate(cfg: ExperimentConfig, records: list[dict], include_k: bool) -> list[dict]:
    rows = []
    by_point: dict[tuple, list[dict]] = {}
    for rec in records:
        by_point.setdefault((rec["k"], rec["budget"]), []).append(rec)
    for (k_val, budget) in sorted(by_point):
        recs = sorted(by_point[(k_val, budget)], key=lambda r: r["trial"])
        errors = [r["error"] for r in recs if r["error"]]
        for msg in errors[:5]:
            print(f"warning: trial error at budget {budget}: {msg}", file=sys.stderr)
        n = len(recs)
        solved = [r for r in recs if r["solved"]]
        row = {
            "budget": budget,
            "method": cfg.planner,
            "success_rate": len(solved) / n if n else 0.0,
            "mean_graph_size": sum(r["graph"] for r in recs) / n if n else 0.0,
            "mean_path_length": (
                sum(r["path_len"] for r in solved) / len(solved) if solved else 0.0
            ),
            "trials": n,
            "seed": cfg.seed,
        }
        if include_k:
            row = {"k": k_val, **row}
        rows.append(row)
    return rows


def run_sweep(cfg: ExperimentConfig) -> list[dict]:
    """One row per budget point, aggregated over per-trial seeded solves."""
    cfg_dict = cfg.to_dict()
    tasks = [
        (cfg_dict, trial, budget, cfg.k)
        for budget in cfg.budgets
        for trial in range(cfg.trials)
    ]
    return _aggregate(cfg, _run_tasks(cfg, tasks), include_k=False)


def run_k_sweep(cfg: ExperimentConfig, k_values: Sequence[int]) -> list[dict]:
    """run_sweep iterated over k, providers rebuilt per k."""
    cfg_dict = cfg.to_dict()
    tasks = [
        (cfg_dict, trial, budget, k)
        for k in k_values
        for budget in cfg.budgets
        for trial in range(cfg.trials)
    ]
    return _aggregate(cfg, _run_tasks(cfg, tasks), include_k=True)


def run_table4_rows(
    trials: int = 1000,
    budget: int = 500,
    seed: int = 0,
    m: int = 6,
    n: int = 10,
    k: int = 4,
    c3: int = 4,
    sigmas: Sequence[float] = (3.0, 10.0, 20.0),
) -> list[dict]:
    return grid_mod.run_table4(
        m=m, n=n, k=k, c3=c3, budget=budget, trials=trials,
        sigmas=sigmas, master_seed=seed,
    )


# ---------- datasets

def gen_data(env: str, out: str | Path, count: int, scramble_len: int, seed: int) -> int:
    """Writes a trajectory dataset; returns the record count."""
    if env != "rubik":
        raise ValueError(f"dataset generation is not available for env {env!r}")
    records = rubik_mod.generate_dataset(count, scramble_len, Random(seed))
    write_dataset(out, records)
    return len(records)


# ---------- analysis

def _live_boards(boards: Iterable, cap: int) -> tuple[list, list["sokoban_mod.DistanceMap"], int]:
    """Filters boards whose forward graph exceeds the cap; reports skips."""
    kept, dmaps, skipped = [], [], 0
    for board in boards:
        try:
            dmaps.append(sokoban_mod.dijkstra_all(board, cap))
        except sokoban_mod.GraphCapExceeded:
            skipped += 1
            continue
        kept.append(board)
    if skipped:
        print(f"warning: skipped {skipped} over-cap board(s)", file=sys.stderr)
    return kept, dmaps, skipped


def analyze_delta(
    corpus: str | None,
    k: int = 4,
    num_subgoals: int = 4,
    samples_per_board: int = 20,
    seed: int = 0,
    cap: int = 200_000,
) -> list[dict]:
    """Distance-improvement histogram of the exact generator over a corpus."""
    boards, dmaps, _ = _live_boards(_load_boards(corpus), cap)
    env = sokoban_mod.SokobanModel()
    route: dict = {}
    for board, dmap in zip(boards, dmaps):
        bundle = oracle_bundle(env, k, instance=board, cap=cap)
        for state in dmap.adjacency:
            route.setdefault(state, bundle.generator)

    def generator(state, count):
        gen = route.get(state)
        return gen(state, count) if gen is not None else []

    stats = analysis_mod.delta_stats(
        boards,
        generator,
        cap=cap,
        num_subgoals=num_subgoals,
        samples_per_board=samples_per_board,
        seed=seed,
    )
    rows = [
        {"delta": delta, "count": count, "fraction": stats.fraction(delta)}
        for delta, count in sorted(stats.histogram.items())
    ]
    rows.append({"delta": "dead", "count": stats.dead, "fraction": stats.dead_fraction})
    return rows


def analyze_value_errors(
    corpus: str | None,
    sigma: float = 0.0,
    radius: int = 3,
    min_set_size: int = 5,
    improvement_step: int = 4,
    repetitions: int = 1,
    seed: int = 0,
    cap: int = 200_000,
) -> list[dict]:
    boards, _, _ = _live_boards(_load_boards(corpus), cap)
    if sigma > 0:
        factory = analysis_mod.noisy_distance_factory(sigma)
    else:
        def factory(dmap, _seed):
            return lambda state: float(-dmap.distances[state])
    stats = analysis_mod.value_error_stats(
        boards,
        factory,
        cap=cap,
        radius=radius,
        min_set_size=min_set_size,
        improvement_step=improvement_step,
        repetitions=repetitions,
        seed=seed,
    )
    row = {"sigma": sigma, **dataclasses.asdict(stats)}
    return [row]


def analyze_monotonicity(
    corpus: str | None,
    sigma: float = 0.0,
    steps: Sequence[int] = (1, 2, 3, 4),
    seed: int = 0,
    cap: int = 200_000,
) -> list[dict]:
    boards, dmaps, _ = _live_boards(_load_boards(corpus), cap)
    paths = [
        sokoban_mod.shortest_solving_path(board, dmap)
        for board, dmap in zip(boards, dmaps)
    ]
    value_of: dict = {}
    for idx, dmap in enumerate(dmaps):
        if sigma > 0:
            fn = analysis_mod.noisy_distance_factory(sigma)(dmap, derive_seed(seed, idx))
        else:
            fn = lambda state, _d=dmap: float(-_d.distances[state])
        for state in dmap.distances:
            value_of.setdefault(state, fn)

    def value(state):
        return value_of[state](state)

    rows = []
    for step in steps:
        stats = analysis_mod.monotonicity_stats(paths, value, step)
        rows.append(
            {
                "step": stats.step,
                "decrease_probability": stats.decrease_probability,
                "comparisons": stats.comparisons,
                "expected_gaussian": analysis_mod.expected_gaussian_decrease(step, sigma),
            }
        )
    return rows


# ---------- CSV emission

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, fieldnames: Sequence[str], rows: Iterable[dict]) -> None:
    """Timestamp comment line, then header, then deterministic rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# generated {datetime.now(timezone.utc).isoformat()}\n")
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[name]) for name in fieldnames])
