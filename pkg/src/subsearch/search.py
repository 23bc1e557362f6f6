"""Best-first search over a subgoal graph, plus the chain-sampling ablation.

The planner expands the highest-value frontier state, asks the generator for
up to C3 subgoal proposals, prunes them by cumulative probability (C4), and
tries to connect each unseen proposal with a low-level path of at most C2
steps. Unreachable proposals still occupy seen-set slots: the budget pays for
every proposal the planner commits to, not just the ones that connect.
"""

from __future__ import annotations

import heapq
from random import Random
from typing import Callable, Sequence

from .types import (
    Action,
    CountingPolicy,
    Environment,
    ProviderBundle,
    SearchConfig,
    SearchMetrics,
    SearchResult,
    SearchStatus,
    State,
    SubgoalProposal,
)

__all__ = [
    "prune_by_total_probability",
    "get_path_learned",
    "bf_ksubs_solve",
    "chain_sampler_solve",
    "graph_size",
]


def prune_by_total_probability(
    proposals: Sequence[SubgoalProposal], c4: float
) -> list[SubgoalProposal]:
    """Keep a prefix of probability-sorted proposals.

    A proposal is included iff the cumulative probability of the proposals
    already included is <= c4, so the kept mass may overshoot c4 by one
    proposal. Input must already be sorted descending by probability.
    """
    kept: list[SubgoalProposal] = []
    total = 0.0
    for prop in proposals:
        if total > c4:
            break
        kept.append(prop)
        total += prop.prob
    return kept


def get_path_learned(
    s0: State,
    subgoal: State,
    policy: Callable[[State, State], Action | None],
    model: Environment,
    c2: int,
    on_step: Callable[[State], None] | None = None,
) -> list[Action]:
    """Walk the conditional policy toward `subgoal` for at most c2 steps.

    Returns the action prefix on an exact state match, or the empty list if
    the walk does not reach the subgoal (the in-band "unreachable" signal;
    callers discard the proposal). A policy returning None aborts the walk.
    `on_step` observes every intermediate state, in order.
    """
    s = s0
    path: list[Action] = []
    for _ in range(c2):
        action = policy(s, subgoal)
        if action is None:
            break
        path.append(action)
        s = model.next_state(s, action)
        if on_step is not None:
            on_step(s)
        if s == subgoal:
            return path
    return []


def graph_size(metrics: SearchMetrics, policy: CountingPolicy | str) -> int:
    """Search-graph size under the given counting policy."""
    if isinstance(policy, str):
        policy = CountingPolicy(policy)
    if policy is CountingPolicy.SUBGOALS_ONLY:
        return metrics.seen_count
    return metrics.seen_count + metrics.policy_transition_nodes


def _make_path_runner(env, providers, cfg, metrics):
    """Bind the GET_PATH realization for this solve, with call accounting."""
    c2 = cfg.c2_step_limit
    if providers.path_finder is not None:
        finder = providers.path_finder
        counting = _CountingModel(env, metrics)

        def run(s: State, subgoal: State) -> list[Action]:
            return finder(counting, s, subgoal, c2)

        return run

    policy = providers.policy
    if policy is None:
        raise ValueError("provider bundle has neither policy nor path_finder")

    def counted_policy(s: State, g: State) -> Action | None:
        metrics.policy_calls += 1
        return policy(s, g)

    def on_step(_s: State) -> None:
        metrics.policy_transition_nodes += 1

    def run(s: State, subgoal: State) -> list[Action]:
        return get_path_learned(s, subgoal, counted_policy, env, c2, on_step)

    return run


class _CountingModel:
    """Model proxy that counts transition evaluations for graph accounting."""

    __slots__ = ("_env", "_metrics")

    def __init__(self, env: Environment, metrics: SearchMetrics) -> None:
        self._env = env
        self._metrics = metrics

    def next_state(self, state: State, action: Action) -> State:
        self._metrics.policy_transition_nodes += 1
        return self._env.next_state(state, action)

    def __getattr__(self, name: str):
        return getattr(self._env, name)


def _detect_solved_prefix(env, s, actions):
    """Index of the first solved intermediate state along `actions`, or -1."""
    cur = s
    for i, a in enumerate(actions):
        cur = env.next_state(cur, a)
        if env.is_solved(cur):
            return i
    return -1


def bf_ksubs_solve(
    s0: State,
    env: Environment,
    providers: ProviderBundle,
    cfg: SearchConfig,
) -> SearchResult:
    """Best-first search over the subgoal graph.

    Frontier states are popped by descending value (FIFO on ties). Every
    proposal not yet seen is added to the seen set before its connection is
    attempted, so unreachable proposals count toward the node budget. The
    solved test applies to subgoal states as they are connected; the first
    solved one wins. Deterministic given (s0, cfg, providers).
    """
    if providers.reset is not None:
        providers.reset(cfg.rng_seed)

    metrics = SearchMetrics()
    key = env.state_key
    seen = {key(s0)}
    metrics.seen_count = 1
    if env.is_solved(s0):
        return SearchResult(SearchStatus.SOLVED, [], metrics)

    run_path = _make_path_runner(env, providers, cfg, metrics)
    generator = providers.generator
    value = providers.value
    is_solved = env.is_solved
    c1 = cfg.c1_max_nodes
    c3 = cfg.c3_num_subgoals
    c4 = cfg.c4_target_prob
    detect = cfg.detect_solved_on_path

    metrics.value_calls += 1
    heap: list[tuple[float, int, State]] = [(-value(s0), 0, s0)]
    tick = 1
    paths: dict = {key(s0): []}

    while heap and metrics.seen_count < c1:
        _, _, s = heapq.heappop(heap)
        metrics.generator_calls += 1
        proposals = prune_by_total_probability(generator(s, c3), c4)
        metrics.subgoals_generated += len(proposals)
        base_path = paths[key(s)]
        for prop in proposals:
            sub = prop.state
            sub_key = key(sub)
            if sub_key in seen:
                continue
            seen.add(sub_key)
            metrics.seen_count += 1
            actions = run_path(s, sub)
            if not actions:
                continue
            if detect:
                hit = _detect_solved_prefix(env, s, actions)
                if hit >= 0:
                    return SearchResult(
                        SearchStatus.SOLVED, base_path + actions[: hit + 1], metrics
                    )
            metrics.value_calls += 1
            heapq.heappush(heap, (-value(sub), tick, sub))
            tick += 1
            paths[sub_key] = base_path + actions
            if is_solved(sub):
                return SearchResult(SearchStatus.SOLVED, paths[sub_key], metrics)

    status = SearchStatus.FRONTIER_EMPTY if not heap else SearchStatus.BUDGET_EXHAUSTED
    return SearchResult(status, [], metrics)


def chain_sampler_solve(
    s0: State,
    env: Environment,
    providers: ProviderBundle,
    cfg: SearchConfig,
    num_chains: int,
    chain_length: int,
    budget: int | None = None,
) -> SearchResult:
    """Ablation: sample independent subgoal chains instead of searching.

    Each chain repeatedly samples one proposal proportionally to its
    probability and connects it; an unreachable sample abandons the chain.
    Node accounting mirrors the best-first planner (start state plus every
    sampled subgoal), and the same budget stops everything mid-chain. On
    failure, returns the final state of the best-valued chain in
    `best_state` with empty actions.
    """
    if providers.reset is not None:
        providers.reset(cfg.rng_seed)
    if budget is None:
        budget = cfg.c1_max_nodes

    rng = Random(cfg.rng_seed)
    metrics = SearchMetrics()
    metrics.seen_count = 1
    if env.is_solved(s0):
        return SearchResult(SearchStatus.SOLVED, [], metrics)

    run_path = _make_path_runner(env, providers, cfg, metrics)
    key = env.state_key
    best_v = float("-inf")
    best_state: State | None = None

    def chain_done(state: State) -> None:
        nonlocal best_v, best_state
        metrics.value_calls += 1
        v = providers.value(state)
        if v > best_v:
            best_v = v
            best_state = state

    for _ in range(num_chains):
        s = s0
        chain_actions: list[Action] = []
        for _ in range(chain_length):
            if metrics.seen_count >= budget:
                chain_done(s)
                return SearchResult(
                    SearchStatus.BUDGET_EXHAUSTED, [], metrics, best_state=best_state
                )
            metrics.generator_calls += 1
            proposals = prune_by_total_probability(
                providers.generator(s, cfg.c3_num_subgoals), cfg.c4_target_prob
            )
            metrics.subgoals_generated += len(proposals)
            s_key = key(s)
            proposals = [p for p in proposals if key(p.state) != s_key]
            if not proposals:
                break
            pick = _weighted_choice(proposals, rng)
            metrics.seen_count += 1
            actions = run_path(s, pick.state)
            if not actions:
                break
            chain_actions.extend(actions)
            s = pick.state
            if env.is_solved(s):
                return SearchResult(SearchStatus.SOLVED, chain_actions, metrics)
        chain_done(s)

    return SearchResult(
        SearchStatus.BUDGET_EXHAUSTED, [], metrics, best_state=best_state
    )


def _weighted_choice(proposals: list[SubgoalProposal], rng: Random) -> SubgoalProposal:
    total = sum(p.prob for p in proposals)
    if total <= 0.0:
        return proposals[rng.randrange(len(proposals))]
    r = rng.random() * total
    acc = 0.0
    for p in proposals:
        acc += p.prob
        if r < acc:
            return p
    return proposals[-1]
