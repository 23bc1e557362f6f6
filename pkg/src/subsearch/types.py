"""Shared types for subgoal-graph search.

A planner sees an environment only through a deterministic model (state
transitions, solved test, rewards, serialization) and a provider bundle
(subgoal generator, state value, conditional low-level policy). Everything
here is deliberately environment-agnostic; states and actions are opaque.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

State = Any
Action = Any


class CountingPolicy(enum.Enum):
    """How search-graph size is accounted.

    SUBGOALS_ONLY counts only subgoal nodes (the seen set).
    SUBGOALS_PLUS_POLICY_NODES also counts states visited by the low-level
    path executor, for environments where those visits are the dominant cost.
    """

    SUBGOALS_ONLY = "subgoals-only"
    SUBGOALS_PLUS_POLICY_NODES = "subgoals-plus-policy-nodes"


class SearchStatus(enum.Enum):
    SOLVED = "solved"
    BUDGET_EXHAUSTED = "budget-exhausted"
    FRONTIER_EMPTY = "frontier-empty"
    ACTION_LIMIT = "action-limit"


@dataclass
class SearchConfig:
    """Knobs shared by the subgoal planners.

    k: subgoal distance the generator was built for.
    c1_max_nodes: node budget; the expansion loop stops once the seen set
        reaches this size (checked at loop top, so it may overshoot by one
        proposal batch).
    c2_step_limit: max low-level steps when connecting a subgoal.
    c3_num_subgoals: max proposals requested per generator call.
    c4_target_prob: cumulative-probability cutoff for proposal pruning.
    detect_solved_on_path: also report solutions whose final state is passed
        through mid-connection rather than proposed as a subgoal. Off by
        default: a solved state inside a connecting path is not detected.
    """

    k: int = 4
    c1_max_nodes: int = 1000
    c2_step_limit: int = 4
    c3_num_subgoals: int = 4
    c4_target_prob: float = 1.0
    counting_policy: CountingPolicy = CountingPolicy.SUBGOALS_ONLY
    rng_seed: int = 0
    detect_solved_on_path: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.counting_policy, str):
            self.counting_policy = CountingPolicy(self.counting_policy)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.c1_max_nodes < 1:
            raise ValueError("c1_max_nodes must be >= 1")
        if self.c2_step_limit < 1:
            raise ValueError("c2_step_limit must be >= 1")
        if self.c3_num_subgoals < 1:
            raise ValueError("c3_num_subgoals must be >= 1")
        if not 0.0 <= self.c4_target_prob <= 1.0:
            raise ValueError("c4_target_prob must be in [0, 1]")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SubgoalProposal:
    """A candidate subgoal state with the generator's probability for it."""

    state: State
    prob: float


@dataclass
class SearchMetrics:
    """Planner-side call and node accounting.

    seen_count: states in the dedup set (subgoal nodes, including the start).
    subgoals_generated: proposals the planner iterated (after cumulative-
        probability pruning).
    policy_transition_nodes: states visited by path connection attempts.
    mcts_passes: completed select/expand/update passes (MCTS only).
    """

    seen_count: int = 0
    subgoals_generated: int = 0
    policy_transition_nodes: int = 0
    generator_calls: int = 0
    value_calls: int = 0
    policy_calls: int = 0
    mcts_passes: int = 0


@dataclass
class SearchResult:
    """Outcome of one solve. `actions` is empty unless status is SOLVED."""

    status: SearchStatus
    actions: list[Action]
    metrics: SearchMetrics
    best_state: State | None = None

    @property
    def solved(self) -> bool:
        return self.status is SearchStatus.SOLVED


GeneratorFn = Callable[[State, int], list[SubgoalProposal]]
ValueFn = Callable[[State], float]
PolicyFn = Callable[[State, State], "Action | None"]
# (model, state, subgoal, step_limit) -> action list, replacing the learned
# per-step executor for environments that connect subgoals by direct search.
PathFinderFn = Callable[[Any, State, State, int], "list[Action]"]
ActionPolicyFn = Callable[[State], Sequence[tuple[Action, float]]]


@dataclass
class ProviderBundle:
    """The three learned/oracle components a planner consumes, plus hooks.

    policy may be None when path_finder is set. action_policy feeds the
    single-action baseline child generator only. reset, when present, is
    called by planners at solve start with the config seed so stateful
    providers (noise memos, corruption RNGs) reproduce exactly.
    """

    generator: GeneratorFn
    value: ValueFn
    policy: PolicyFn | None = None
    path_finder: PathFinderFn | None = None
    action_policy: ActionPolicyFn | None = None
    reset: Callable[[int], None] | None = None


class Environment:
    """Base for deterministic, fully observable environment models.

    Subclasses define next_state/is_solved/actions/serialize/parse and the
    action token mapping. Defaults: sparse reward (+1 on entering a solved
    state, 0 otherwise) and state_key == the state itself (states must then
    be hashable and canonical).
    """

    def next_state(self, state: State, action: Action) -> State:
        raise NotImplementedError

    def is_solved(self, state: State) -> bool:
        raise NotImplementedError

    def actions(self, state: State) -> Sequence[Action]:
        raise NotImplementedError

    def serialize(self, state: State) -> str:
        raise NotImplementedError

    def parse(self, text: str) -> State:
        raise NotImplementedError

    def action_token(self, action: Action) -> str:
        raise NotImplementedError

    def parse_action(self, token: str) -> Action:
        raise NotImplementedError

    def step_reward(self, state: State, action: Action, next_state: State) -> float:
        if self.is_solved(next_state) and not self.is_solved(state):
            return 1.0
        return 0.0

    def state_key(self, state: State) -> Hashable:
        return state

    def reward_sum(self, state: State, actions: Sequence[Action]) -> float:
        """Total step reward along `actions` replayed from `state`."""
        total = 0.0
        s = state
        for a in actions:
            nxt = self.next_state(s, a)
            total += self.step_reward(s, a, nxt)
            s = nxt
        return total

    def replay(self, state: State, actions: Sequence[Action]) -> State:
        s = state
        for a in actions:
            s = self.next_state(s, a)
        return s


def sort_proposals(
    proposals: Sequence[SubgoalProposal], serialize: Callable[[State], str]
) -> list[SubgoalProposal]:
    """Descending by probability; ties broken by state serialization."""
    return sorted(proposals, key=lambda p: (-p.prob, serialize(p.state)))
