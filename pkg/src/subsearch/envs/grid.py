"""Deterministic hypercube grid world with a synthetic subgoal generator.

States are m-tuples over {0..n}; the agent starts at the origin and the goal
is the opposite corner (n,...,n). One action adjusts one coordinate by +-1
(out-of-bounds moves are no-ops). The synthetic generator mixes uniform
random states from the k-ball around s with one guaranteed-good subgoal, and
the value function is the negated true distance plus optional Gaussian noise,
memoized per state so one solve sees a consistent landscape.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Sequence

from ..types import (
    Environment,
    ProviderBundle,
    SearchConfig,
    SearchResult,
    SubgoalProposal,
)
from ..search import bf_ksubs_solve
from ..seeds import derive_seed

GridState = tuple    # m ints, each in [0, n]
GridAction = tuple   # (dim index, +1 | -1)


@dataclass
class GridConfig:
    m: int = 6
    n: int = 10
    sigma: float = 0.0
    k: int = 4
    c3: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.k < 1 or self.c3 < 1:
            raise ValueError("k and c3 must be >= 1")


class GridModel(Environment):
    def __init__(self, m: int, n: int) -> None:
        self.m = m
        self.n = n
        self.goal: GridState = (n,) * m
        self._actions = tuple(
            (j, d) for j in range(m) for d in (1, -1)
        )

    def start(self) -> GridState:
        return (0,) * self.m

    def next_state(self, state: GridState, action: GridAction) -> GridState:
        j, d = action
        v = state[j] + d
        if 0 <= v <= self.n:
            return state[:j] + (v,) + state[j + 1 :]
        return state

    def is_solved(self, state: GridState) -> bool:
        return state == self.goal

    def actions(self, state: GridState) -> Sequence[GridAction]:
        return self._actions

    def serialize(self, state: GridState) -> str:
        return ",".join(map(str, state))

    def parse(self, text: str) -> GridState:
        parts = text.split(",")
        if len(parts) != self.m:
            raise ValueError(f"expected {self.m} coordinates, got {len(parts)}")
        coords = tuple(int(p) for p in parts)
        for v in coords:
            if not 0 <= v <= self.n:
                raise ValueError(f"coordinate {v} out of [0, {self.n}]")
        return coords

    def action_token(self, action: GridAction) -> str:
        j, d = action
        return f"{'+' if d > 0 else '-'}{j}"

    def parse_action(self, token: str) -> GridAction:
        if len(token) < 2 or token[0] not in "+-":
            raise ValueError(f"bad grid action token: {token!r}")
        return (int(token[1:]), 1 if token[0] == "+" else -1)


def true_dist(state: GridState, n: int) -> int:
    """Exact action distance to the goal corner: sum of per-axis deficits."""
    return sum(n - v for v in state)


def noisy_value(state: GridState, n: int, sigma: float, rng: Random) -> float:
    """-true_dist plus one fresh Gaussian draw (callers memoize per state)."""
    v = float(-true_dist(state, n))
    if sigma > 0:
        v += rng.gauss(0.0, sigma)
    return v


def grid_get_path(state: GridState, subgoal: GridState, limit: int) -> list[GridAction]:
    """Canonical shortest path: fix coordinates in index order.

    Empty list if the L1 distance exceeds `limit`.
    """
    dist = sum(abs(a - b) for a, b in zip(state, subgoal))
    if dist > limit:
        return []
    path: list[GridAction] = []
    for j, (a, b) in enumerate(zip(state, subgoal)):
        step = 1 if b > a else -1
        path.extend((j, step) for _ in range(abs(b - a)))
    return path


# ---------- uniform sampling over the bounded L1 ball

# Counting tables are cached by the per-axis offset bounds, which collapse to
# a handful of shapes once coordinates are more than k from a wall.
_BALL_CACHE: dict = {}
_MINIMIZER_CACHE: dict = {}


def _suffix_counts(bounds: tuple, k: int) -> list[list[int]]:
    """W[j][c] = number of offset vectors for axes j.. with total |.| <= c."""
    m = len(bounds)
    table = [[1] * (k + 1)]
    for j in range(m - 1, -1, -1):
        lo, hi = bounds[j]
        prev = table[0]
        row = [0] * (k + 1)
        for c in range(k + 1):
            t = 0
            for d in range(lo, hi + 1):
                ad = -d if d < 0 else d
                if ad <= c:
                    t += prev[c - ad]
            row[c] = t
        table.insert(0, row)
    return table


def _offset_bounds(state: GridState, n: int, k: int) -> tuple:
    return tuple((-min(k, v), min(k, n - v)) for v in state)


def ball_size(state: GridState, n: int, k: int) -> int:
    """|B_k(state)|: in-bounds states at L1 distance in [1, k]."""
    bounds = _offset_bounds(state, n, k)
    cache_key = (k, bounds)
    table = _BALL_CACHE.get(cache_key)
    if table is None:
        table = _suffix_counts(bounds, k)
        _BALL_CACHE[cache_key] = table
    return table[0][k] - 1  # drop the zero offset


def sample_ball(state: GridState, n: int, k: int, rng: Random) -> GridState:
    """Uniform sample from B_k(state), excluding state itself."""
    bounds = _offset_bounds(state, n, k)
    cache_key = (k, bounds)
    table = _BALL_CACHE.get(cache_key)
    if table is None:
        table = _suffix_counts(bounds, k)
        _BALL_CACHE[cache_key] = table
    if table[0][k] <= 1:
        raise ValueError("ball is empty")
    m = len(state)
    while True:
        budget = k
        out = []
        nonzero = False
        for j in range(m):
            lo, hi = bounds[j]
            nxt = table[j + 1]
            r = rng.random() * table[j][budget]
            acc = 0
            pick = 0
            for d in range(lo, hi + 1):
                ad = -d if d < 0 else d
                if ad <= budget:
                    acc += nxt[budget - ad]
                    if r < acc:
                        pick = d
                        break
            out.append(pick)
            budget -= -pick if pick < 0 else pick
            if pick:
                nonzero = True
        if nonzero:
            return tuple(v + d for v, d in zip(state, out))


def _composition_counts(caps: tuple, t: int) -> list[list[int]]:
    """M[j][r] = ways to split budget r over axes j.. with 0 <= d_i <= caps[i]."""
    m = len(caps)
    table = [[1 if r == 0 else 0 for r in range(t + 1)]]
    for j in range(m - 1, -1, -1):
        prev = table[0]
        cap = caps[j]
        row = [0] * (t + 1)
        for r in range(t + 1):
            row[r] = sum(prev[r - d] for d in range(0, min(cap, r) + 1))
        table.insert(0, row)
    return table


def sample_good_subgoal(state: GridState, n: int, k: int, rng: Random) -> GridState:
    """Uniform sample among the true-distance minimizers inside B_k(state).

    Minimizers push total budget min(k, dist) toward the goal, split any way
    the per-axis headroom allows. At the goal itself the minimizers are the
    m distance-1 neighbors.
    """
    caps = tuple(n - v for v in state)
    t = min(k, sum(caps))
    if t == 0:
        j = rng.randrange(len(state))
        return state[:j] + (state[j] - 1,) + state[j + 1 :]
    eff = tuple(min(c, t) for c in caps)
    cache_key = (t, eff)
    table = _MINIMIZER_CACHE.get(cache_key)
    if table is None:
        table = _composition_counts(eff, t)
        _MINIMIZER_CACHE[cache_key] = table
    out = []
    r = t
    for j in range(len(state)):
        nxt = table[j + 1]
        total = table[j][r]
        u = rng.random() * total
        acc = 0
        pick = 0
        for d in range(0, min(eff[j], r) + 1):
            acc += nxt[r - d]
            if u < acc:
                pick = d
                break
        out.append(pick)
        r -= pick
    return tuple(v + d for v, d in zip(state, out))


def synthetic_sub_generate(
    state: GridState, n: int, k: int, c3: int, rng: Random
) -> list[SubgoalProposal]:
    """(c3 - 1) uniform ball samples plus one good subgoal, probs 1/c3 each.

    Proposals may repeat (samples are independent); equal probabilities sort
    by state serialization.
    """
    prob = 1.0 / c3
    states = [sample_ball(state, n, k, rng) for _ in range(c3 - 1)]
    states.append(sample_good_subgoal(state, n, k, rng))
    states.sort(key=lambda s: ",".join(map(str, s)))
    return [SubgoalProposal(s, prob) for s in states]


# ---------- provider bundle

def make_grid_bundle(model: GridModel, cfg: GridConfig) -> ProviderBundle:
    """Synthetic generator + memoized noisy value + coordinate-fixing policy."""
    n = model.n
    rng = Random(cfg.seed)
    memo: dict = {}

    def generator(state: GridState, c3: int) -> list[SubgoalProposal]:
        return synthetic_sub_generate(state, n, cfg.k, c3, rng)

    if cfg.sigma > 0:
        sigma = cfg.sigma

        def value(state: GridState) -> float:
            v = memo.get(state)
            if v is None:
                v = float(-true_dist(state, n)) + rng.gauss(0.0, sigma)
                memo[state] = v
            return v

    else:

        def value(state: GridState) -> float:
            return float(-true_dist(state, n))

    def policy(state: GridState, subgoal: GridState):
        for j in range(len(state)):
            a, b = state[j], subgoal[j]
            if a < b:
                return (j, 1)
            if a > b:
                return (j, -1)
        return None

    def reset(seed: int) -> None:
        rng.seed(seed)
        memo.clear()

    return ProviderBundle(
        generator=generator, value=value, policy=policy, reset=reset
    )


def solve_grid_once(
    model: GridModel, grid_cfg: GridConfig, search_cfg: SearchConfig
) -> SearchResult:
    bundle = make_grid_bundle(model, grid_cfg)
    return bf_ksubs_solve(model.start(), model, bundle, search_cfg)


def run_table4(
    m: int = 6,
    n: int = 10,
    k: int = 4,
    c3: int = 4,
    budget: int = 500,
    trials: int = 1000,
    sigmas: Sequence[float] = (3.0, 10.0, 20.0),
    master_seed: int = 0,
) -> list[dict]:
    """Success rates of the k-subgoal planner vs the k=1 best-first baseline.

    One row per (sigma, method). Per-trial seeds derive from the master seed
    and the trial index, so the two methods and all sigmas see paired trials.
    """
    model = GridModel(m, n)
    rows: list[dict] = []
    for sigma in sigmas:
        for method, k_eff in (("bf-ksubs", k), ("bestfs-baseline", 1)):
            solved = 0
            for i in range(trials):
                seed = derive_seed(master_seed, i)
                cfg = SearchConfig(
                    k=k_eff,
                    c1_max_nodes=budget,
                    c2_step_limit=max(k_eff, 1),
                    c3_num_subgoals=c3,
                    c4_target_prob=1.0,
                    rng_seed=seed,
                )
                grid_cfg = GridConfig(m=m, n=n, sigma=sigma, k=k_eff, c3=c3, seed=seed)
                if solve_grid_once(model, grid_cfg, cfg).solved:
                    solved += 1
            rows.append(
                {
                    "sigma": sigma,
                    "method": method,
                    "success_rate": solved / trials,
                    "trials": trials,
                    "seed": master_seed,
                }
            )
    return rows
