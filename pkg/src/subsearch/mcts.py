"""Single-player PUCT tree search over subgoal or primitive-action edges.

The solver alternates planning and acting: each planner call runs P
select/expand/update passes on a persistent tree, then samples one root edge
by visit count and executes its stored actions in the environment. Edges
come from a pluggable child generator: the subgoal variant connects
generator proposals with the low-level path runner (multi-action edges), the
baseline variant takes the top actions of a behavioral policy (single-action
edges).

Node statistics follow the AlphaZero shape: per child, N visits, W total
value, Q = W/N, and a prior from the generation probabilities. Selection
maximizes Q + c_puct * prior * sqrt(sum N) / (1 + N).

Two graph realities the textbook loop ignores are handled explicitly: a
state revisited within one pass ends that pass's descent (the graphs here
have cycles), and a node whose expansion yields zero children stays in the
tree as a dead end that is never descended into, only re-evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Any, Callable, Hashable, Sequence

from .search import _make_path_runner, prune_by_total_probability
from .types import (
    Action,
    Environment,
    GeneratorFn,
    ProviderBundle,
    SearchConfig,
    SearchMetrics,
    SearchResult,
    SearchStatus,
    State,
)

__all__ = [
    "MctsConfig",
    "TreeEdge",
    "PassEvent",
    "select_child",
    "choose_actions",
    "gen_children_ksubs",
    "gen_children_baseline",
    "mcts_solve",
    "replay_tree_stats",
]


@dataclass
class MctsConfig:
    """Tree-search knobs.

    passes_per_call: select/expand/update passes per planner call (the
        budget metric reported for this planner).
    tau: root sampling temperature; 0 means deterministic argmax by visits.
    action_limit / planner_call_limit: per-solve caps on executed actions
        and planner calls.
    """

    passes_per_call: int = 5
    gamma: float = 0.99
    c_puct: float = 1.0
    tau: float = 1.0
    action_limit: int = 24
    planner_call_limit: int = 8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.passes_per_call < 1:
            raise ValueError("passes_per_call must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.c_puct < 0:
            raise ValueError("c_puct must be >= 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0 (0 selects argmax)")
        if self.action_limit < 1:
            raise ValueError("action_limit must be >= 1")
        if self.planner_call_limit < 1:
            raise ValueError("planner_call_limit must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass
class TreeEdge:
    """One tree edge: the child state with the actions that realize it."""

    child: State
    reward: float
    actions: list[Action]


@dataclass
class _Node:
    edges: list[TreeEdge]
    priors: list[float]
    n: list[int]
    w: list[float]
    q: list[float]


@dataclass(frozen=True)
class PassEvent:
    """One pass's effect on the statistics, for replay verification.

    path holds (node key, child index, edge reward) from root to leaf;
    expanded_w holds the initial W values of a freshly expanded leaf (None
    when the leaf was already known: a dead end or a revisited state).
    """

    path: tuple[tuple[Hashable, int, float], ...]
    leaf_key: Hashable
    leaf_value: float
    expanded_w: tuple[float, ...] | None


def select_child(node_q, node_n, priors, c_puct: float) -> int:
    """Index maximizing Q + c_puct * prior * sqrt(sum N)/(1 + N); first wins ties."""
    if not node_q:
        raise ValueError("cannot select from a node with zero children")
    root_total = math.sqrt(sum(node_n))
    best_i = 0
    best_score = -math.inf
    for i, (q, n, p) in enumerate(zip(node_q, node_n, priors)):
        score = q + c_puct * p * root_total / (1 + n)
        if score > best_score:
            best_score = score
            best_i = i
    return best_i


def choose_actions(node: _Node, tau: float, rng: Random) -> list[Action]:
    """Sample a root edge with probability proportional to N^(1/tau).

    tau == 0 picks the most-visited edge (lowest index on ties).
    """
    if not node.edges:
        raise ValueError("cannot choose actions at a node with zero children")
    if tau == 0:
        best = max(node.n)
        i = node.n.index(best)
    else:
        weights = [float(n) ** (1.0 / tau) for n in node.n]
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        i = len(weights) - 1
        for j, wgt in enumerate(weights):
            acc += wgt
            if r < acc:
                i = j
                break
    return list(node.edges[i].actions)


def gen_children_ksubs(
    state: State,
    generator: GeneratorFn,
    run_path: Callable[[State, State], list[Action]],
    env: Environment,
    c3: int,
    c4: float,
    metrics: SearchMetrics | None = None,
) -> tuple[list[TreeEdge], list[float]]:
    """Subgoal edges: pruned proposals connected by the path runner.

    Identity proposals and proposals the runner cannot reach are skipped;
    edge rewards replay the model along the connecting actions. Priors are
    the proposals' generation probabilities.
    """
    if metrics is not None:
        metrics.generator_calls += 1
    proposals = prune_by_total_probability(generator(state, c3), c4)
    if metrics is not None:
        metrics.subgoals_generated += len(proposals)
    key = env.state_key
    state_key = key(state)
    edges: list[TreeEdge] = []
    priors: list[float] = []
    for prop in proposals:
        if key(prop.state) == state_key:
            continue
        actions = run_path(state, prop.state)
        if not actions:
            continue
        reward = env.reward_sum(state, actions)
        edges.append(TreeEdge(child=prop.state, reward=reward, actions=list(actions)))
        priors.append(prop.prob)
    return edges, priors


def gen_children_baseline(
    state: State,
    action_policy: Callable[[State], Sequence[tuple[Action, float]]],
    env: Environment,
    c3: int,
    metrics: SearchMetrics | None = None,
) -> tuple[list[TreeEdge], list[float]]:
    """Primitive-action edges: top-c3 actions of the behavioral policy.

    Ranked by probability descending, ties by action token; every edge is a
    single action with its literal step reward.
    """
    if metrics is not None:
        metrics.generator_calls += 1
    ranked = sorted(
        action_policy(state), key=lambda ap: (-ap[1], env.action_token(ap[0]))
    )
    edges: list[TreeEdge] = []
    priors: list[float] = []
    for action, prob in ranked[:c3]:
        child = env.next_state(state, action)
        reward = env.step_reward(state, action, child)
        edges.append(TreeEdge(child=child, reward=reward, actions=[action]))
        priors.append(prob)
    return edges, priors


def replay_tree_stats(
    events: Sequence[PassEvent], gamma: float
) -> dict[Hashable, tuple[list[int], list[float]]]:
    """Naive (N, W) recomputation from pass events, for exactness checks."""
    stats: dict[Hashable, tuple[list[int], list[float]]] = {}
    for ev in events:
        if ev.expanded_w is not None:
            stats[ev.leaf_key] = ([1] * len(ev.expanded_w), list(ev.expanded_w))
        quality = ev.leaf_value
        for key, i, reward in reversed(ev.path):
            quality = reward + gamma * quality
            n, w = stats[key]
            w[i] += quality
            n[i] += 1
    return stats


def mcts_solve(
    s0: State,
    env: Environment,
    providers: ProviderBundle,
    child_generator: str | Callable[[State], tuple[list[TreeEdge], list[float]]],
    cfg: MctsConfig,
    search_cfg: SearchConfig | None = None,
    trace_sink: list | None = None,
) -> SearchResult:
    """Plan-act loop: up to planner_call_limit calls, each P passes deep.

    child_generator is "ksubs", "baseline", or a callable
    state -> (edges, priors). The string modes need search_cfg for the
    generator knobs (k, c2, c3, c4) and wire SearchMetrics accounting
    through the bundle. The tree persists across planner calls; executed
    actions just move the root. Exceeding action_limit fails the solve even
    if the final action landed on a solved state (the limit is checked
    first). Pass trace_sink=[] to capture per-pass PassEvents.
    """
    if providers.reset is not None:
        providers.reset(cfg.rng_seed)

    metrics = SearchMetrics()
    metrics.seen_count = 1
    if env.is_solved(s0):
        return SearchResult(SearchStatus.SOLVED, [], metrics)

    gen = _bind_child_generator(child_generator, env, providers, search_cfg, metrics)

    def value(state: State) -> float:
        metrics.value_calls += 1
        return providers.value(state)

    rng = Random(cfg.rng_seed)
    key = env.state_key
    tree: dict[Hashable, _Node] = {}

    def run_pass(root: State) -> None:
        # SELECT: descend until an unexpanded state, a dead end, or a
        # within-pass revisit (cycle guard).
        path: list[tuple[Hashable, int, float]] = []
        s = root
        on_pass = {key(root)}
        while True:
            node = tree.get(key(s))
            if node is None or not node.edges:
                break
            i = select_child(node.q, node.n, node.priors, cfg.c_puct)
            edge = node.edges[i]
            path.append((key(s), i, edge.reward))
            s = edge.child
            s_key = key(s)
            if s_key in on_pass:
                break
            on_pass.add(s_key)
        leaf = s
        leaf_key = key(leaf)

        # EXPAND, unless the leaf is a known node (dead end or revisit).
        expanded_w: tuple[float, ...] | None = None
        if leaf_key not in tree:
            edges, priors = gen(leaf)
            w0 = [e.reward + cfg.gamma * value(e.child) for e in edges]
            tree[leaf_key] = _Node(
                edges=edges, priors=priors, n=[1] * len(edges), w=list(w0), q=list(w0)
            )
            expanded_w = tuple(w0)

        # UPDATE: back one quality up the selection path.
        quality = value(leaf)
        if trace_sink is not None:
            trace_sink.append(
                PassEvent(tuple(path), leaf_key, quality, expanded_w)
            )
        for node_key, i, reward in reversed(path):
            quality = reward + cfg.gamma * quality
            node = tree[node_key]
            node.w[i] += quality
            node.n[i] += 1
            node.q[i] = node.w[i] / node.n[i]
        metrics.mcts_passes += 1

    s = s0
    solution: list[Action] = []
    status = SearchStatus.BUDGET_EXHAUSTED
    for _ in range(cfg.planner_call_limit):
        for _ in range(cfg.passes_per_call):
            run_pass(s)
        root_node = tree[key(s)]
        if not root_node.edges:
            status = SearchStatus.FRONTIER_EMPTY
            break
        actions = choose_actions(root_node, cfg.tau, rng)
        for a in actions:
            s = env.next_state(s, a)
            solution.append(a)
        if len(solution) > cfg.action_limit:
            status = SearchStatus.ACTION_LIMIT
            break
        if env.is_solved(s):
            metrics.seen_count = len(tree)
            return SearchResult(SearchStatus.SOLVED, solution, metrics)

    metrics.seen_count = len(tree)
    return SearchResult(status, [], metrics, best_state=s)


def _bind_child_generator(
    child_generator, env, providers, search_cfg, metrics
) -> Callable[[State], tuple[list[TreeEdge], list[float]]]:
    if callable(child_generator):
        return child_generator
    if search_cfg is None:
        raise ValueError(f"child generator {child_generator!r} needs a search_cfg")
    if child_generator == "ksubs":
        run_path = _make_path_runner(env, providers, search_cfg, metrics)

        def gen(state: State):
            return gen_children_ksubs(
                state,
                providers.generator,
                run_path,
                env,
                search_cfg.c3_num_subgoals,
                search_cfg.c4_target_prob,
                metrics,
            )

        return gen
    if child_generator == "baseline":
        if providers.action_policy is None:
            raise ValueError("baseline child generator needs bundle.action_policy")

        def gen(state: State):
            return gen_children_baseline(
                state,
                providers.action_policy,
                env,
                search_cfg.c3_num_subgoals,
                metrics,
            )

        return gen
    raise ValueError(f"unknown child generator: {child_generator!r}")
