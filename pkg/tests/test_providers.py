"""Provider bundles: tabular fitting, exact oracles, degrading wrappers."""

from __future__ import annotations

import itertools
from random import Random

import pytest

from subsearch.datasets import DatasetRecord
from subsearch.envs.grid import GridModel, true_dist
from subsearch.envs.rubik import (
    SOLVED,
    RubikModel,
    apply_move,
    distance_table,
    scramble,
)
from subsearch.envs.sokoban import SokobanModel, dijkstra_all, parse_board, serialize_board
from subsearch.providers import (
    RubikOracle,
    TabularModel,
    fit_tabular,
    make_tabular_bundle,
    oracle_bundle,
    with_corrupted_generator,
    with_noisy_value,
)
from subsearch.search import bf_ksubs_solve, get_path_learned
from subsearch.types import ProviderBundle, SearchConfig, SearchStatus, SubgoalProposal


def traj(traj_id: int, states: list[str], actions: list[str]) -> list[DatasetRecord]:
    n = len(states) - 1
    return [
        DatasetRecord(
            traj_id, i, s, actions[i] if i < n else None, i - n
        )
        for i, s in enumerate(states)
    ]


def brute_ball(state: tuple, n: int, k: int) -> set:
    m = len(state)
    ranges = [range(max(0, v - k), min(n, v + k) + 1) for v in state]
    return {
        cand
        for cand in itertools.product(*ranges)
        if 1 <= sum(abs(a - b) for a, b in zip(cand, state)) <= k
    }


# ---------------------------------------------------------------- tabular


def test_fit_single_trajectory_maps_to_k_step_successor():
    records = traj(0, ["a", "b", "c", "d"], ["x", "y", "z"])
    model = fit_tabular(records, k=2)
    assert model.subgoals("a", 4) == [("c", 1.0)]
    assert model.subgoals("b", 4) == [("d", 1.0)]
    assert model.subgoals("c", 4) == [("d", 1.0)], "clamped to the final state"
    assert model.subgoals("d", 4) == [("d", 1.0)], "final state labels itself"


def test_fit_value_labels():
    records = traj(0, ["a", "b", "c", "d"], ["x", "y", "z"])
    model = fit_tabular(records, k=2)
    assert model.value("a") == -3.0
    assert model.value("d") == 0.0


def test_fit_value_averages_across_trajectories():
    records = traj(0, ["x", "a"], ["go"]) + traj(1, ["x"], [])
    model = fit_tabular(records, k=1)
    assert model.value("x") == -0.5  # labels -1 and 0


def test_fit_empirical_split_three_to_one():
    records = []
    for i in range(3):
        records += traj(i, ["x", "p"], ["go"])
    records += traj(3, ["x", "q"], ["go"])
    model = fit_tabular(records, k=1)
    assert model.subgoals("x", 4) == [("p", 0.75), ("q", 0.25)]
    assert model.subgoals("x", 1) == [("p", 0.75)], "count caps the rows"


def test_fit_subgoal_tie_breaks_by_target_ascending():
    records = traj(0, ["x", "b"], ["go"]) + traj(1, ["x", "a"], ["go"])
    model = fit_tabular(records, k=1)
    assert model.subgoals("x", 4) == [("a", 0.5), ("b", 0.5)]


def test_fit_policy_credits_all_clamped_offsets():
    records = traj(0, ["s", "t", "u"], ["A0", "A1"])
    model = fit_tabular(records, k=2)
    assert model.policy("s", "t") == "A0"
    assert model.policy("s", "u") == "A0"
    assert model.policy("t", "u") == "A1"
    assert model.policy("u", "u") is None
    assert model.policy("nope", "t") is None


def test_fit_policy_modal_tie_breaks_by_token():
    records = traj(0, ["s", "t"], ["north"]) + traj(1, ["s", "t"], ["east"])
    model = fit_tabular(records, k=1)
    assert model.policy("s", "t") == "east"


def test_fit_policy_modal_majority_wins():
    records = (
        traj(0, ["s", "t"], ["north"])
        + traj(1, ["s", "t"], ["north"])
        + traj(2, ["s", "t"], ["east"])
    )
    model = fit_tabular(records, k=1)
    assert model.policy("s", "t") == "north"


def test_fit_default_value():
    records = traj(0, ["a", "b", "c", "d"], ["x", "y", "z"]) + traj(1, ["e"], [])
    model = fit_tabular(records, k=1)
    assert model.default_value == -6.0  # -2 x longest trajectory (3)
    assert model.value("unseen") == -6.0
    override = fit_tabular(records, k=1, default_value=-99.0)
    assert override.value("unseen") == -99.0


def test_fit_unseen_state_degrades_in_band():
    model = fit_tabular(traj(0, ["a", "b"], ["x"]), k=1)
    assert model.subgoals("zzz", 3) == []
    assert model.policy("zzz", "a") is None


def test_fit_probabilities_sum_to_one():
    records = []
    rng = Random(0)
    for i in range(20):
        states = [f"s{rng.randrange(4)}" for _ in range(4)]
        records += traj(i, states, ["a", "b", "c"])
    model = fit_tabular(records, k=2)
    for state, rows in model.subgoal_table.items():
        assert sum(p for _, p in rows) == pytest.approx(1.0)
        probs = [p for _, p in rows]
        assert probs == sorted(probs, reverse=True)


def test_tabular_bundle_adapts_environment_states():
    env = GridModel(1, 9)
    records = traj(0, ["0", "1", "2"], ["+0", "+0"])
    bundle = make_tabular_bundle(fit_tabular(records, k=1), env)
    assert bundle.generator((0,), 4) == [SubgoalProposal((1,), 1.0)]
    assert bundle.value((0,)) == -2.0
    assert bundle.policy((0,), (1,)) == (0, 1)
    assert bundle.generator((5,), 4) == []
    assert bundle.value((5,)) == -4.0
    assert bundle.policy((5,), (6,)) is None


def test_tabular_bundle_solves_grid_line():
    env = GridModel(1, 4)
    states = [str(i) for i in range(5)]
    records = traj(0, states, ["+0"] * 4)
    bundle = make_tabular_bundle(fit_tabular(records, k=2), env)
    result = bf_ksubs_solve((0,), env, bundle, SearchConfig(k=2, c2_step_limit=2))
    assert result.status is SearchStatus.SOLVED
    assert env.replay((0,), result.actions) == (4,)


# ---------------------------------------------------------------- grid oracle


def test_grid_oracle_generator_matches_brute_force():
    env = GridModel(2, 5)
    bundle = oracle_bundle(env, k=2)
    for state in [(0, 0), (3, 2), (5, 4)]:
        ball = brute_ball(state, 5, 2)
        expected = sorted(ball, key=lambda s: (true_dist(s, 5), env.serialize(s)))[:3]
        got = bundle.generator(state, 3)
        assert [p.state for p in got] == expected
        assert all(p.prob == pytest.approx(1 / 3) for p in got)


def test_grid_oracle_top_proposal_is_minimizer():
    env = GridModel(3, 6)
    bundle = oracle_bundle(env, k=3)
    for state in [(0, 0, 0), (4, 5, 2), (6, 6, 5)]:
        d = true_dist(state, 6)
        props = bundle.generator(state, 4)
        assert min(true_dist(p.state, 6) for p in props) == max(d - 3, 0)
        assert true_dist(props[0].state, 6) == max(d - 3, 0)


def test_grid_oracle_value_and_policy():
    env = GridModel(2, 5)
    bundle = oracle_bundle(env, k=2)
    assert bundle.value((5, 5)) == 0.0
    assert bundle.value((0, 0)) == -10.0
    assert bundle.policy((0, 0), (2, 1)) == (0, 1), "first leg of the canonical path"
    assert bundle.policy((3, 3), (3, 3)) is None


def test_grid_oracle_action_policy_mass():
    env = GridModel(2, 5)
    bundle = oracle_bundle(env, k=2)
    dist = dict(bundle.action_policy((0, 0)))
    assert sum(dist.values()) == pytest.approx(1.0)
    assert dist[(0, 1)] == dist[(1, 1)] == 0.5
    assert dist[(0, -1)] == dist[(1, -1)] == 0.0


def test_grid_oracle_solves():
    env = GridModel(3, 3)
    bundle = oracle_bundle(env, k=2)
    cfg = SearchConfig(k=2, c1_max_nodes=300, c2_step_limit=2, c3_num_subgoals=3)
    result = bf_ksubs_solve(env.start(), env, bundle, cfg)
    assert result.status is SearchStatus.SOLVED
    assert env.is_solved(env.replay(env.start(), result.actions))


# ---------------------------------------------------------------- rubik oracle


def test_rubik_oracle_values_and_floor():
    oracle = RubikOracle(k=2, table_radius=2)
    assert oracle.value(SOLVED) == 0.0
    assert oracle.value(apply_move(SOLVED, "U")) == -1.0
    table = distance_table(3)
    far = next(s for s, d in table.items() if d == 3)
    assert oracle.value(far) == -(2 + 2 + 1)
    assert oracle.distance(far) == 3  # radius + 1 reported for unknowns
    assert oracle.distance(SOLVED) == 0


def test_rubik_oracle_generator_reaches_solved_from_distance_k():
    oracle = RubikOracle(k=4, table_radius=5)
    table = distance_table(4)
    state = next(s for s, d in table.items() if d == 4)
    props = oracle.generator(state, 3)
    assert len(props) == 3
    assert all(p.prob == pytest.approx(1 / 3) for p in props)
    assert props[0].state == SOLVED, "top proposal has distance 0"


def test_rubik_oracle_generator_distances_sorted():
    oracle = RubikOracle(k=2, table_radius=5)
    state, _ = scramble(5, Random(3))
    props = oracle.generator(state, 4)
    dists = [oracle.distance(p.state) for p in props]
    assert dists == sorted(dists)
    # Every proposal is within the k-ball of the query state.
    for p in props:
        path = get_path_learned(
            state, p.state, oracle.policy, RubikModel(), 2
        )
        assert path, "cached policy word reconnects each proposal"


def test_rubik_oracle_generator_deterministic():
    oracle = RubikOracle(k=3, table_radius=4)
    state, _ = scramble(4, Random(5))
    assert oracle.generator(state, 3) == oracle.generator(state, 3)


def test_rubik_oracle_policy_fresh_search_and_unreachable():
    oracle = RubikOracle(k=2, table_radius=3)
    oracle.reset(0)
    near = apply_move(apply_move(SOLVED, "U"), "F")
    move = oracle.policy(near, SOLVED)
    assert move is not None
    walked = get_path_learned(near, SOLVED, oracle.policy, RubikModel(), 2)
    assert walked and RubikModel().replay(near, walked) == SOLVED
    table = distance_table(3)
    far = next(s for s, d in table.items() if d == 3)
    assert oracle.policy(far, SOLVED) is None, "beyond k moves"


def test_rubik_oracle_action_policy():
    oracle = RubikOracle(k=2, table_radius=2)
    state = apply_move(SOLVED, "U")
    dist = dict(oracle.action_policy(state))
    assert sum(dist.values()) == pytest.approx(1.0)
    assert dist["U'"] == 1.0, "only the inverse move reaches solved"


def test_rubik_oracle_bundle_solves_shallow():
    env = RubikModel()
    bundle = oracle_bundle(env, k=4, table_radius=5)
    for i in range(10):
        state, _ = scramble(4, Random(100 + i))
        cfg = SearchConfig(
            k=4, c1_max_nodes=500, c2_step_limit=7, c3_num_subgoals=3, rng_seed=i
        )
        result = bf_ksubs_solve(state, env, bundle, cfg)
        assert result.status is SearchStatus.SOLVED
        assert env.replay(state, result.actions) == SOLVED


# -------------------------------------------------------------- sokoban oracle


def test_sokoban_oracle_requires_instance():
    with pytest.raises(ValueError, match="requires the start board"):
        oracle_bundle(SokobanModel(), k=4)


def test_sokoban_oracle_generator_and_value():
    env = SokobanModel()
    board = parse_board("#####|#@  #|# $ #|# . #|#####")
    bundle = oracle_bundle(env, k=2, instance=board)
    dmap = dijkstra_all(board)
    assert bundle.value(board) == -2.0
    dead = next(iter(dmap.dead))
    max_dist = max(dmap.distances.values())
    assert bundle.value(dead) == -(max_dist + 2 + 1)
    props = bundle.generator(board, 3)
    assert len(props) == 3
    assert all(p.prob == pytest.approx(1 / 3) for p in props)
    dists = [dmap.distances.get(p.state) for p in props]
    assert dists[0] == 0, "k=2 neighborhood contains the solved state"
    # Proposals are the distance-minimal members of the 2-step neighborhood.
    serialized = [serialize_board(p.state) for p in props]
    assert len(set(serialized)) == 3


def test_sokoban_oracle_empty_neighborhood():
    env = SokobanModel()
    board = parse_board("###|#@#|###")
    bundle = oracle_bundle(env, k=3, instance=board)
    assert bundle.generator(board, 4) == []


def test_sokoban_oracle_path_finder_counts_transitions():
    env = SokobanModel()
    board = parse_board("#####|#@  #|# $ #|# . #|#####")
    bundle = oracle_bundle(env, k=4, instance=board)
    assert bundle.policy is None and bundle.path_finder is not None
    cfg = SearchConfig(k=4, c1_max_nodes=200, c2_step_limit=4, c3_num_subgoals=3)
    result = bf_ksubs_solve(board, env, bundle, cfg)
    assert result.status is SearchStatus.SOLVED
    assert env.is_solved(env.replay(board, result.actions))
    assert result.metrics.policy_transition_nodes > 0


def test_sokoban_oracle_action_policy_mass():
    env = SokobanModel()
    board = parse_board("#####|#@  #|# $ #|# . #|#####")
    bundle = oracle_bundle(env, k=2, instance=board)
    dist = dict(bundle.action_policy(board))
    assert sum(dist.values()) == pytest.approx(1.0)


def test_oracle_bundle_rejects_unknown_env():
    class Weird:
        pass

    with pytest.raises(TypeError, match="no oracle bundle"):
        oracle_bundle(Weird(), k=2)


# ---------------------------------------------------------------- wrappers


def line_bundle() -> tuple[ProviderBundle, list[int]]:
    def generator(state, count):
        return [SubgoalProposal(state + 1, 1.0)]

    resets = []
    bundle = ProviderBundle(
        generator=generator,
        value=lambda s: float(-abs(10 - s)),
        policy=lambda s, g: 1 if g > s else None,
        reset=resets.append,
    )
    return bundle, resets


def test_noisy_value_validation():
    bundle, _ = line_bundle()
    with pytest.raises(ValueError, match="sigma"):
        with_noisy_value(bundle, -0.5)


def test_noisy_value_memoizes_and_resets():
    bundle, resets = line_bundle()
    noisy = with_noisy_value(bundle, 2.0, seed=3)
    first = noisy.value(4)
    assert noisy.value(4) == first
    noisy.reset(3)
    assert resets == [3], "reset forwards to the wrapped bundle"
    assert noisy.value(4) == first, "same seed, same landscape"
    noisy.reset(4)
    assert noisy.value(4) != first


def test_noisy_value_sigma_zero_identity():
    bundle, _ = line_bundle()
    noisy = with_noisy_value(bundle, 0.0, seed=1)
    assert noisy.value(7) == bundle.value(7)


def test_corrupted_generator_validation():
    bundle, _ = line_bundle()
    env = GridModel(1, 9)
    with pytest.raises(ValueError, match="rate"):
        with_corrupted_generator(bundle, env, 1.5, k=2)


def test_corrupted_generator_rate_zero_passthrough():
    env = GridModel(2, 6)
    bundle = oracle_bundle(env, k=2)
    wrapped = with_corrupted_generator(bundle, env, 0.0, k=2, seed=5)
    for state in [(0, 0), (3, 2)]:
        assert wrapped.generator(state, 3) == bundle.generator(state, 3)


def test_corrupted_generator_rate_one_replaces_all():
    env = GridModel(2, 6)
    bundle = oracle_bundle(env, k=2)
    wrapped = with_corrupted_generator(bundle, env, 1.0, k=2, seed=5)
    state = (2, 2)
    original = bundle.generator(state, 3)
    corrupted = wrapped.generator(state, 3)
    assert len(corrupted) == len(original)
    assert [p.prob for p in corrupted] == [p.prob for p in original], "probs kept"
    for prop in corrupted:
        # A 2-step random walk stays within L1 distance 2 of the state.
        assert sum(abs(a - b) for a, b in zip(prop.state, state)) <= 2


def test_corrupted_generator_reset_reproduces():
    env = GridModel(2, 6)
    bundle = oracle_bundle(env, k=2)
    wrapped = with_corrupted_generator(bundle, env, 0.5, k=2, seed=9)
    wrapped.reset(9)
    a = [wrapped.generator((2, 2), 3) for _ in range(4)]
    wrapped.reset(9)
    b = [wrapped.generator((2, 2), 3) for _ in range(4)]
    assert a == b
