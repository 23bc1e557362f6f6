"""Diagnostics for subgoal generators and value estimates on Sokoban.

Three instruments, all built on exact distance maps:

- delta_stats histograms how much closer to the solution a generator's
  proposals land (distance drop Delta, with a distinguished dead bucket).
- value_error_stats measures how noisy a value estimate is across states of
  equal difficulty, and how often that noise makes some equally-hard state
  look better than genuinely closer ones (over-optimism).
- monotonicity_stats measures how often the value fails to increase when
  jumping `step` states ahead along a solution path.

Comparison sets are restricted to live states: exact distance, and hence a
distance-based value, is undefined on dead ones.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass
from random import Random
from typing import Callable, Iterable, Sequence

from ..seeds import derive_seed
from ..types import GeneratorFn, ValueFn
from .sokoban import (
    Board,
    DistanceMap,
    dijkstra_all,
    serialize_board,
    shortest_solving_path,
)

# Builds a value function for one analysis repetition. Receives the board's
# distance map (for synthetic distance-based values; learned ones ignore it)
# and a repetition seed.
ValueFactory = Callable[[DistanceMap, int], ValueFn]


def plain_value_factory(value: ValueFn) -> ValueFactory:
    """Wrap a fixed value function as a repetition-independent factory."""
    return lambda dmap, seed: value


def noisy_distance_factory(sigma: float) -> ValueFactory:
    """Synthetic value: negative exact distance plus N(0, sigma^2) noise.

    Noise is drawn once per state per repetition (memoized), so repeated
    queries within one repetition agree.
    """

    def factory(dmap: DistanceMap, seed: int) -> ValueFn:
        rng = Random(seed)
        memo: dict[Board, float] = {}

        def value(state: Board) -> float:
            got = memo.get(state)
            if got is None:
                dist = dmap.dist(state)
                if dist is None:
                    raise ValueError("value requested for a dead state")
                got = float(-dist)
                if sigma > 0:
                    got += rng.gauss(0.0, sigma)
                memo[state] = got
            return got

        return value

    return factory


def solving_paths(boards: Iterable[Board], cap: int = 200_000) -> list[list[Board]]:
    """One deterministic minimal solving path per board."""
    return [shortest_solving_path(b, dijkstra_all(b, cap)) for b in boards]


# ---------- distance-delta histogram

@dataclass(frozen=True)
class DeltaStats:
    """Distance drops dist(s1) - dist(s2) over generated subgoals s2."""

    histogram: dict[int, int]
    dead: int
    total: int

    def fraction(self, delta: int) -> float:
        return self.histogram.get(delta, 0) / self.total if self.total else 0.0

    @property
    def dead_fraction(self) -> float:
        return self.dead / self.total if self.total else 0.0


def delta_stats(
    boards: Iterable[Board],
    generator: GeneratorFn,
    cap: int = 200_000,
    num_subgoals: int = 4,
    samples_per_board: int = 20,
    seed: int = 0,
) -> DeltaStats:
    """Histogram of distance improvement for sampled (state, subgoal) pairs.

    For each board, up to samples_per_board live states are drawn uniformly
    (seeded) and the generator is asked for proposals from each. Proposals
    outside the board's forward graph get their own distance computation;
    unsolvable or malformed ones land in the dead bucket.
    """
    rng = Random(seed)
    histogram: Counter[int] = Counter()
    dead = 0
    total = 0
    for board in boards:
        dmap = dijkstra_all(board, cap)
        live = sorted(dmap.distances, key=serialize_board)
        picks = rng.sample(live, min(samples_per_board, len(live)))
        for s1 in picks:
            d1 = dmap.distances[s1]
            for proposal in generator(s1, num_subgoals):
                s2 = proposal.state
                if s2 in dmap.distances:
                    d2: int | None = dmap.distances[s2]
                elif s2 in dmap.dead:
                    d2 = None
                else:
                    try:
                        d2 = dijkstra_all(s2, cap).dist(s2)
                    except ValueError:
                        d2 = None  # board breaks play invariants
                total += 1
                if d2 is None:
                    dead += 1
                else:
                    histogram[d1 - d2] += 1
    return DeltaStats(histogram=dict(histogram), dead=dead, total=total)


# ---------- value-error statistics

@dataclass(frozen=True)
class ValueErrorStats:
    """Aggregated value-noise diagnostics along shortest solving paths.

    mean_std: mean, over qualifying path states, of the sample standard
        deviation of V across each state's same-distance peer set.
    mean_one_step_improvement: mean V increase between consecutive path
        states.
    over_neighbor_probability: fraction of qualifying states where some
        same-distance peer outvalues every immediate live successor.
    over_step_probability: same, against states a full subgoal step closer.
    """

    mean_std: float
    std_samples: int
    mean_one_step_improvement: float
    improvement_pairs: int
    over_neighbor_probability: float
    over_neighbor_samples: int
    over_step_probability: float
    over_step_samples: int


def peer_set(state: Board, dmap: DistanceMap, radius: int) -> list[Board]:
    """Live states within `radius` moves of state sharing its exact distance.

    Includes the state itself. Deterministic order (breadth-first, action
    order, dedup).
    """
    want = dmap.distances[state]
    peers = [state]
    frontier = [state]
    seen = {state}
    for _ in range(radius):
        nxt: list[Board] = []
        for s in frontier:
            for child in dmap.adjacency[s]:
                if child in seen:
                    continue
                seen.add(child)
                nxt.append(child)
                if dmap.distances.get(child) == want:
                    peers.append(child)
        frontier = nxt
    return peers


def states_ahead(state: Board, dmap: DistanceMap, steps: int) -> list[Board]:
    """Reachable states exactly `steps` moves away and `steps` units closer."""
    want = dmap.distances[state] - steps
    frontier = [state]
    seen = {state}
    for _ in range(steps):
        nxt: list[Board] = []
        for s in frontier:
            for child in dmap.adjacency[s]:
                if child not in seen:
                    seen.add(child)
                    nxt.append(child)
        frontier = nxt
    return [s for s in frontier if dmap.distances.get(s) == want]


def value_error_stats(
    boards: Iterable[Board],
    value_factory: ValueFactory,
    cap: int = 200_000,
    radius: int = 3,
    min_set_size: int = 5,
    improvement_step: int = 4,
    repetitions: int = 1,
    seed: int = 0,
) -> ValueErrorStats:
    """Value-noise diagnostics along each board's shortest solving path.

    Peer-set statistics only use path states whose peer set has at least
    min_set_size members. Over-optimism comparisons additionally require the
    state to be at least 1 (respectively improvement_step) moves from
    solved. With repetitions > 1 the factory is invoked that many times per
    board with distinct seeds, pooling samples, which lets noisy synthetic
    values reach a target sample count on a small corpus.
    """
    if min_set_size < 2:
        raise ValueError("min_set_size must be >= 2 to take a std")
    stds: list[float] = []
    improvements: list[float] = []
    neighbor_hits = neighbor_total = 0
    step_hits = step_total = 0
    for board_idx, board in enumerate(boards):
        dmap = dijkstra_all(board, cap)
        path = shortest_solving_path(board, dmap)
        rows = []
        for s in path:
            peers = peer_set(s, dmap, radius)
            if len(peers) < min_set_size:
                continue
            dist = dmap.distances[s]
            neighbors = [c for c in dmap.adjacency[s] if c in dmap.distances]
            ahead = (
                states_ahead(s, dmap, improvement_step)
                if dist >= improvement_step
                else []
            )
            rows.append((peers, neighbors if dist >= 1 else [], ahead))
        for rep in range(repetitions):
            value = value_factory(dmap, derive_seed(seed, board_idx * repetitions + rep))
            improvements.extend(
                value(b) - value(a) for a, b in zip(path, path[1:])
            )
            for peers, neighbors, ahead in rows:
                peak = max(value(x) for x in peers)
                stds.append(statistics.stdev(value(x) for x in peers))
                if neighbors:
                    neighbor_total += 1
                    if peak > max(value(x) for x in neighbors):
                        neighbor_hits += 1
                if ahead:
                    step_total += 1
                    if peak > max(value(x) for x in ahead):
                        step_hits += 1
    return ValueErrorStats(
        mean_std=statistics.fmean(stds) if stds else 0.0,
        std_samples=len(stds),
        mean_one_step_improvement=(
            statistics.fmean(improvements) if improvements else 0.0
        ),
        improvement_pairs=len(improvements),
        over_neighbor_probability=(
            neighbor_hits / neighbor_total if neighbor_total else 0.0
        ),
        over_neighbor_samples=neighbor_total,
        over_step_probability=step_hits / step_total if step_total else 0.0,
        over_step_samples=step_total,
    )


# ---------- monotonicity along solution paths

@dataclass(frozen=True)
class MonotonicityStats:
    step: int
    decrease_probability: float
    comparisons: int


def monotonicity_stats(
    paths: Sequence[Sequence[Board]], value: ValueFn, step: int
) -> MonotonicityStats:
    """Fraction of path indices i with V(s_{i+step}) < V(s_i)."""
    if step < 1:
        raise ValueError("step must be >= 1")
    hits = total = 0
    for path in paths:
        for i in range(len(path) - step):
            total += 1
            if value(path[i + step]) < value(path[i]):
                hits += 1
    return MonotonicityStats(
        step=step,
        decrease_probability=hits / total if total else 0.0,
        comparisons=total,
    )


def expected_gaussian_decrease(step: int, sigma: float) -> float:
    """Decrease probability for V = -dist + N(0, sigma^2) noise on a
    strictly improving path: Phi(-step / (sigma * sqrt(2)))."""
    if sigma <= 0:
        return 0.0
    return statistics.NormalDist().cdf(-step / (sigma * math.sqrt(2.0)))
