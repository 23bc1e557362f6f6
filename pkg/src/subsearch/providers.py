"""Concrete provider bundles: exact oracles, tabular fits, and wrappers.

An oracle bundle answers generator/value/policy queries from brute-force
distances, so planners can be exercised at full strength without any trained
model: the generator returns the lowest-distance states in the k-step
neighborhood (uniform probabilities), the value is the negated exact
distance, and the policy follows a shortest path. Tabular bundles memorize a
trajectory dataset instead. Wrapper bundles degrade an existing bundle with
value noise or corrupted proposals for robustness studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from random import Random
from typing import Iterable, Sequence

import numpy as np

from .datasets import DatasetRecord, group_trajectories
from .envs import rubik
from .envs.grid import GridModel, GridState, grid_get_path, true_dist
from .envs.rubik import RubikModel, shortest_path_between
from .envs.sokoban import (
    Board,
    DistanceMap,
    SokobanModel,
    bfs_get_path,
    dijkstra_all,
    serialize_board,
)
from .types import Environment, ProviderBundle, SubgoalProposal

__all__ = [
    "TabularModel",
    "fit_tabular",
    "make_tabular_bundle",
    "oracle_bundle",
    "with_noisy_value",
    "with_corrupted_generator",
]


# ---------- tabular model fit from trajectory datasets

@dataclass
class TabularModel:
    """Empirical subgoal / value / policy tables over serialized states.

    subgoal_table rows are sorted by count descending, ties by target
    serialization ascending, with probabilities count/total. Policy entries
    are the modal action for a (state, subgoal) pair, ties by token
    ascending. Queries for unseen keys degrade in band: no proposals, the
    default (pessimistic) value, no action.
    """

    k: int
    subgoal_table: dict[str, list[tuple[str, float]]]
    value_table: dict[str, float]
    policy_table: dict[tuple[str, str], str]
    default_value: float

    def subgoals(self, state: str, count: int) -> list[tuple[str, float]]:
        rows = self.subgoal_table.get(state)
        return rows[:count] if rows else []

    def value(self, state: str) -> float:
        return self.value_table.get(state, self.default_value)

    def policy(self, state: str, subgoal: str) -> str | None:
        return self.policy_table.get((state, subgoal))


def fit_tabular(
    records: Iterable[DatasetRecord], k: int, default_value: float | None = None
) -> TabularModel:
    """Count k-step successors, mean values, and modal actions.

    From each trajectory state s_l the subgoal label is s_min(l+k, n) (the
    final state labels itself), the value label is the record's own, and for
    every i in 1..k the action a_l is credited to the pair
    (s_l, s_min(l+i, n)) -- clamped duplicates included, so near-end states
    weight their actions accordingly. The default value for unseen states is
    -2 x the longest trajectory unless given.
    """
    sub_counts: dict[str, dict[str, int]] = {}
    value_sum: dict[str, float] = {}
    value_n: dict[str, int] = {}
    act_counts: dict[tuple[str, str], dict[str, int]] = {}
    max_len = 0
    for traj in group_trajectories(list(records)):
        n = len(traj) - 1
        max_len = max(max_len, n)
        states = [r.state for r in traj]
        for l, rec in enumerate(traj):
            s = states[l]
            target = states[min(l + k, n)]
            sub_counts.setdefault(s, {})
            sub_counts[s][target] = sub_counts[s].get(target, 0) + 1
            value_sum[s] = value_sum.get(s, 0.0) + float(rec.value)
            value_n[s] = value_n.get(s, 0) + 1
            if l < n:
                for i in range(1, k + 1):
                    pair = (s, states[min(l + i, n)])
                    bucket = act_counts.setdefault(pair, {})
                    bucket[rec.action] = bucket.get(rec.action, 0) + 1

    subgoal_table: dict[str, list[tuple[str, float]]] = {}
    for s, counts in sub_counts.items():
        total = sum(counts.values())
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        subgoal_table[s] = [(tgt, cnt / total) for tgt, cnt in rows]
    value_table = {s: value_sum[s] / value_n[s] for s in value_sum}
    policy_table = {
        pair: sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        for pair, counts in act_counts.items()
    }
    if default_value is None:
        default_value = -2.0 * max_len
    return TabularModel(
        k=k,
        subgoal_table=subgoal_table,
        value_table=value_table,
        policy_table=policy_table,
        default_value=default_value,
    )


def make_tabular_bundle(model: TabularModel, env: Environment) -> ProviderBundle:
    """Adapt a TabularModel (string-keyed) to live environment states."""

    def generator(state, count: int) -> list[SubgoalProposal]:
        rows = model.subgoals(env.serialize(state), count)
        return [SubgoalProposal(env.parse(t), p) for t, p in rows]

    def value(state) -> float:
        return model.value(env.serialize(state))

    def policy(state, subgoal):
        token = model.policy(env.serialize(state), env.serialize(subgoal))
        return None if token is None else env.parse_action(token)

    return ProviderBundle(generator=generator, value=value, policy=policy)


# ---------- exact oracles

@lru_cache(maxsize=None)
def _rubik_distances(radius: int) -> dict[bytes, int]:
    return rubik.distance_table(radius)


@lru_cache(maxsize=None)
def _rubik_ball(radius: int) -> tuple[np.ndarray, tuple[tuple[str, ...], ...]]:
    perms, words = rubik.group_ball_words(radius)
    return perms, tuple(words)


class RubikOracle:
    """Exact-distance providers for cube states near solved.

    Distances come from a precomputed table of radius table_radius; states
    beyond it all take a value one k-ball below the table floor, which keeps
    them ranked behind every known state. The conditional policy replays the
    shortest move word recorded when the subgoal was generated (or falls
    back to a fresh bidirectional search), so connecting a proposal costs
    one cached word, not one search per step.
    """

    def __init__(self, k: int, table_radius: int = 5) -> None:
        self.k = k
        self.table_radius = table_radius
        self.distances = _rubik_distances(table_radius)
        self.perms, self.words = _rubik_ball(k)
        self.value_floor = -float(table_radius + k + 1)
        self._suffix: dict[tuple[bytes, bytes], tuple[str, ...]] = {}

    def reset(self, seed: int) -> None:
        self._suffix.clear()

    def value(self, state: bytes) -> float:
        d = self.distances.get(state)
        return self.value_floor if d is None else float(-d)

    def distance(self, state: bytes) -> int:
        """Table distance; states beyond the table report radius + 1."""
        return self.distances.get(state, self.table_radius + 1)

    def generator(self, state: bytes, count: int) -> list[SubgoalProposal]:
        arr = np.frombuffer(state, dtype=np.uint8)
        cand = arr[self.perms[1:]]
        blob = cand.tobytes()
        n = cand.shape[0]
        unknown = self.table_radius + 1
        table = self.distances
        dists = [
            table.get(blob[i * 54 : (i + 1) * 54], unknown) for i in range(n)
        ]
        take = min(count, n)
        counts = [0] * (unknown + 1)
        for d in dists:
            counts[d] += 1
        cum = 0
        cutoff = unknown
        for d in range(unknown + 1):
            cum += counts[d]
            if cum >= take:
                cutoff = d
                break
        below = [i for i, d in enumerate(dists) if d < cutoff]
        below.sort(key=lambda i: (dists[i], blob[i * 54 : (i + 1) * 54]))
        at = [i for i, d in enumerate(dists) if d == cutoff]
        at.sort(key=lambda i: blob[i * 54 : (i + 1) * 54])
        chosen = below + at[: take - len(below)]
        prob = 1.0 / len(chosen)
        out = []
        for i in chosen:
            sub = blob[i * 54 : (i + 1) * 54]
            self._remember(state, sub, self.words[i + 1])
            out.append(SubgoalProposal(sub, prob))
        return out

    def policy(self, state: bytes, subgoal: bytes) -> str | None:
        suffix = self._suffix.get((state, subgoal))
        if suffix is None:
            path = shortest_path_between(state, subgoal, max_depth=self.k)
            if path is None:
                return None
            suffix = tuple(path)
            self._remember(state, subgoal, suffix)
        return suffix[0] if suffix else None

    def action_policy(self, state: bytes) -> list[tuple[str, float]]:
        """Uniform mass on the moves that minimize table distance."""
        child_d = [
            self.distance(rubik.apply_move(state, m)) for m in rubik.MOVES
        ]
        best = min(child_d)
        hits = child_d.count(best)
        return [
            (m, 1.0 / hits if d == best else 0.0)
            for m, d in zip(rubik.MOVES, child_d)
        ]

    def _remember(self, state: bytes, subgoal: bytes, word: tuple[str, ...]) -> None:
        s = state
        for i, move in enumerate(word):
            self._suffix[(s, subgoal)] = word[i:]
            s = rubik.apply_move(s, move)


def _grid_ball_states(state: GridState, n: int, k: int) -> list[GridState]:
    """All in-bounds states within L1 distance k of state, including it."""
    m = len(state)
    out: list[GridState] = []
    acc = list(state)

    def rec(j: int, slack: int) -> None:
        if j == m:
            out.append(tuple(acc))
            return
        base = state[j]
        lo = max(-base, -slack)
        hi = min(n - base, slack)
        for delta in range(lo, hi + 1):
            acc[j] = base + delta
            rec(j + 1, slack - abs(delta))
        acc[j] = base

    rec(0, k)
    return out


def _grid_oracle_bundle(env: GridModel, k: int) -> ProviderBundle:
    n = env.n

    def generator(state: GridState, count: int) -> list[SubgoalProposal]:
        ball = [s for s in _grid_ball_states(state, n, k) if s != state]
        ball.sort(key=lambda s: (true_dist(s, n), env.serialize(s)))
        chosen = ball[:count]
        prob = 1.0 / len(chosen)
        return [SubgoalProposal(s, prob) for s in chosen]

    def value(state: GridState) -> float:
        return float(-true_dist(state, n))

    def policy(state: GridState, subgoal: GridState):
        path = grid_get_path(state, subgoal, limit=len(state) * n)
        return path[0] if path else None

    def action_policy(state: GridState) -> list[tuple]:
        moves = env.actions(state)
        child_d = [true_dist(env.next_state(state, a), n) for a in moves]
        best = min(child_d)
        hits = child_d.count(best)
        return [
            (a, 1.0 / hits if d == best else 0.0)
            for a, d in zip(moves, child_d)
        ]

    return ProviderBundle(
        generator=generator, value=value, policy=policy, action_policy=action_policy
    )


def _rubik_oracle_bundle(env: RubikModel, k: int, table_radius: int) -> ProviderBundle:
    oracle = RubikOracle(k, table_radius)
    return ProviderBundle(
        generator=oracle.generator,
        value=oracle.value,
        policy=oracle.policy,
        action_policy=oracle.action_policy,
        reset=oracle.reset,
    )


def _sokoban_oracle_bundle(
    env: SokobanModel, k: int, instance: Board, cap: int
) -> ProviderBundle:
    dmap: DistanceMap = dijkstra_all(instance, cap)
    max_dist = max(dmap.distances.values(), default=0)
    dead_value = -float(max_dist + k + 1)

    def dist_of(state: Board) -> int:
        d = dmap.distances.get(state)
        return max_dist + k + 1 if d is None else d

    def generator(state: Board, count: int) -> list[SubgoalProposal]:
        frontier = [state]
        seen = {state}
        reached: list[Board] = []
        for _ in range(k):
            nxt: list[Board] = []
            for s in frontier:
                for child in dmap.adjacency[s]:
                    if child not in seen:
                        seen.add(child)
                        nxt.append(child)
                        reached.append(child)
            frontier = nxt
        reached.sort(key=lambda s: (dist_of(s), serialize_board(s)))
        chosen = reached[:count]
        if not chosen:
            return []
        prob = 1.0 / len(chosen)
        return [SubgoalProposal(s, prob) for s in chosen]

    def value(state: Board) -> float:
        d = dmap.distances.get(state)
        return dead_value if d is None else float(-d)

    def path_finder(model, s: Board, subgoal: Board, limit: int) -> list[str]:
        return bfs_get_path(s, subgoal, limit, model=model)

    def action_policy(state: Board) -> list[tuple]:
        moves = env.actions(state)
        child_d = [dist_of(env.next_state(state, a)) for a in moves]
        best = min(child_d)
        hits = child_d.count(best)
        return [
            (a, 1.0 / hits if d == best else 0.0)
            for a, d in zip(moves, child_d)
        ]

    return ProviderBundle(
        generator=generator,
        value=value,
        path_finder=path_finder,
        action_policy=action_policy,
    )


def oracle_bundle(
    env: Environment,
    k: int,
    *,
    instance=None,
    table_radius: int = 5,
    cap: int = 200_000,
) -> ProviderBundle:
    """Exact-distance provider bundle for the given environment.

    The generator returns minimal-true-distance states from the k-step
    neighborhood with uniform probabilities (the planner's C3 caps how many),
    the value is the negated true distance, and connections follow shortest
    paths. Sokoban needs `instance` (the start board): its distances are
    per-board. Rubik distances are exact within table_radius and floored
    below it. Raises GraphCapExceeded if a Sokoban instance's graph outgrows
    `cap`.
    """
    if isinstance(env, GridModel):
        return _grid_oracle_bundle(env, k)
    if isinstance(env, RubikModel):
        return _rubik_oracle_bundle(env, k, table_radius)
    if isinstance(env, SokobanModel):
        if instance is None:
            raise ValueError("sokoban oracle bundle requires the start board")
        return _sokoban_oracle_bundle(env, k, instance, cap)
    raise TypeError(f"no oracle bundle for environment {type(env).__name__}")


# ---------- degrading wrappers

def with_noisy_value(
    bundle: ProviderBundle, sigma: float, seed: int = 0
) -> ProviderBundle:
    """Add memoized N(0, sigma^2) noise to a bundle's value function.

    The memo makes one solve see a consistent landscape; reset reseeds the
    noise and clears it (and forwards to the wrapped bundle's reset).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = Random(seed)
    memo: dict = {}
    inner = bundle.value

    def value(state) -> float:
        v = memo.get(state)
        if v is None:
            v = inner(state) + rng.gauss(0.0, sigma)
            memo[state] = v
        return v

    def reset(new_seed: int) -> None:
        if bundle.reset is not None:
            bundle.reset(new_seed)
        rng.seed(new_seed)
        memo.clear()

    return ProviderBundle(
        generator=bundle.generator,
        value=value,
        policy=bundle.policy,
        path_finder=bundle.path_finder,
        action_policy=bundle.action_policy,
        reset=reset,
    )


def with_corrupted_generator(
    bundle: ProviderBundle,
    env: Environment,
    rate: float,
    k: int,
    seed: int = 0,
) -> ProviderBundle:
    """Replace each proposal, with probability `rate`, by a random state.

    The stand-in is the endpoint of a k-step uniform random walk from the
    query state (probability field kept), modeling a generator that
    sometimes emits plausible-looking but unhelpful subgoals.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    rng = Random(seed)

    def generator(state, count: int) -> list[SubgoalProposal]:
        out = []
        for prop in bundle.generator(state, count):
            if rng.random() < rate:
                s = state
                for _ in range(k):
                    moves = env.actions(s)
                    s = env.next_state(s, moves[rng.randrange(len(moves))])
                out.append(SubgoalProposal(s, prop.prob))
            else:
                out.append(prop)
        return out

    def reset(new_seed: int) -> None:
        if bundle.reset is not None:
            bundle.reset(new_seed)
        rng.seed(new_seed)

    return ProviderBundle(
        generator=generator,
        value=bundle.value,
        policy=bundle.policy,
        path_finder=bundle.path_finder,
        action_policy=bundle.action_policy,
        reset=reset,
    )
