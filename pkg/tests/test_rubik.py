"""Cube engine: move-table group laws, serialization, exact distances, data.

The move tables are checked against pure group-theoretic laws (order four,
inverses, opposite-face commutation) and against the published quarter-turn
neighborhood counts around the solved state: 1, 12, 114, 1068, 10011 states
at distances 0 through 4. Those constants are frozen here as an independent
cross-check of the geometric table construction.
"""

from __future__ import annotations

from collections import Counter
from random import Random

import numpy as np
import pytest

from subsearch.datasets import group_trajectories
from subsearch.envs.rubik import (
    FACES,
    MOVES,
    SOLVED,
    TOKENS,
    RubikModel,
    apply_move,
    brute_distance,
    distance_table,
    generate_dataset,
    group_ball,
    group_ball_words,
    inverse_move,
    neighborhood_sizes,
    parse_cube,
    scramble,
    serialize_cube,
    shortest_path_between,
)

LAYER_COUNTS = [1, 12, 114, 1068, 10011]  # quarter-turn metric, distances 0..4


def apply_word(state: bytes, word) -> bytes:
    for mv in word:
        state = apply_move(state, mv)
    return state


def apply_perm(state: bytes, perm: np.ndarray) -> bytes:
    return np.frombuffer(state, dtype=np.uint8)[perm].tobytes()


# ---------------------------------------------------------------- group laws


def test_move_roster():
    assert len(MOVES) == 12
    assert set(MOVES) == {f for f in FACES} | {f + "'" for f in FACES}


@pytest.mark.parametrize("move", MOVES)
def test_each_move_is_a_permutation(move):
    image = apply_move(bytes(range(54)), move)
    assert sorted(image) == list(range(54))


@pytest.mark.parametrize("move", MOVES)
def test_each_move_displaces_twenty_stickers(move):
    ident = bytes(range(54))
    image = apply_move(ident, move)
    moved = sum(1 for a, b in zip(ident, image) if a != b)
    assert moved == 20  # 8 face stickers + 12 rim stickers; centers fixed


@pytest.mark.parametrize("move", MOVES)
def test_each_move_has_order_four(move):
    s = bytes(range(54))
    for i in range(1, 4):
        s = apply_move(s, move)
        assert s != bytes(range(54)), f"{move}^{i} must not be identity"
    assert apply_move(s, move) == bytes(range(54))


@pytest.mark.parametrize("face", FACES)
def test_inverse_move_cancels(face):
    s, _ = scramble(6, Random(0))
    assert apply_move(apply_move(s, face), inverse_move(face)) == s
    assert apply_move(apply_move(s, face + "'"), face) == s
    assert inverse_move(face) == face + "'"
    assert inverse_move(face + "'") == face


@pytest.mark.parametrize("a,b", [("U", "D"), ("L", "R"), ("F", "B")])
def test_opposite_faces_commute(a, b):
    s, _ = scramble(5, Random(1))
    assert apply_move(apply_move(s, a), b) == apply_move(apply_move(s, b), a)


def test_adjacent_faces_do_not_commute():
    s = SOLVED
    assert apply_move(apply_move(s, "U"), "F") != apply_move(apply_move(s, "F"), "U")


def test_moves_preserve_sticker_counts():
    s, _ = scramble(10, Random(2))
    for color in range(6):
        assert s.count(color) == 9


# ---------------------------------------------------------------- strings


def test_solved_serialization():
    assert serialize_cube(SOLVED) == "".join(t * 9 for t in TOKENS)


def test_serialize_parse_round_trip():
    for seed in range(5):
        s, _ = scramble(12, Random(seed))
        assert parse_cube(serialize_cube(s)) == s


def test_parse_rejects_wrong_length():
    with pytest.raises(ValueError, match="54 tokens"):
        parse_cube("w" * 53)


def test_parse_rejects_bad_token():
    text = serialize_cube(SOLVED)
    with pytest.raises(ValueError, match="bad sticker token 'x'"):
        parse_cube("x" + text[1:])


def test_parse_rejects_bad_counts():
    # Swap a non-center w sticker for y: counts become 8 and 10.
    text = list(serialize_cube(SOLVED))
    text[0] = "y"
    with pytest.raises(ValueError, match="sticker count"):
        parse_cube("".join(text))


def test_parse_rejects_moved_center():
    # Swapping a center with a same-face corner keeps counts but breaks the
    # fixed-center layout.
    text = list(serialize_cube(SOLVED))
    text[4], text[9 + 4] = text[9 + 4], text[4]
    with pytest.raises(ValueError, match="center of face"):
        parse_cube("".join(text))


# ---------------------------------------------------------------- model


def test_model_contract():
    model = RubikModel()
    s, moves = scramble(4, Random(3))
    assert model.actions(s) == MOVES
    assert model.replay(SOLVED, moves) == s
    assert model.is_solved(SOLVED)
    assert not model.is_solved(apply_move(SOLVED, "U"))
    assert model.parse(model.serialize(s)) == s
    assert model.parse_action("U'") == "U'"
    with pytest.raises(ValueError, match="bad move token"):
        model.parse_action("U2")


def test_scramble_deterministic_and_replayable():
    s1, m1 = scramble(8, Random(42))
    s2, m2 = scramble(8, Random(42))
    assert (s1, m1) == (s2, m2)
    assert len(m1) == 8
    assert apply_word(SOLVED, m1) == s1


def test_scramble_zero_is_solved():
    s, moves = scramble(0, Random(0))
    assert s == SOLVED
    assert moves == []


# ---------------------------------------------------------------- distances


def test_distance_table_layer_counts():
    table = distance_table(4)
    layers = Counter(table.values())
    assert [layers[d] for d in range(5)] == LAYER_COUNTS


def test_neighborhood_sizes_are_cumulative():
    sizes = neighborhood_sizes(4)
    expected = []
    total = 0
    for c in LAYER_COUNTS:
        total += c
        expected.append(total)
    assert sizes == expected  # [1, 13, 127, 1195, 11206]


def test_brute_distance_matches_table():
    table = distance_table(3)
    rng = Random(4)
    states = rng.sample(sorted(table), 60)
    for s in states:
        assert brute_distance(s, max_depth=3) == table[s]


def test_brute_distance_beyond_depth_is_none():
    table = distance_table(2)
    far = next(s for s, d in table.items() if d == 2)
    assert brute_distance(far, max_depth=1) is None
    assert brute_distance(far, max_depth=2) == 2


def test_shortest_path_between_properties():
    rng = Random(5)
    model = RubikModel()
    for _ in range(15):
        a, _ = scramble(3, rng)
        b, _ = scramble(3, rng)
        path = shortest_path_between(a, b, max_depth=8)
        assert path is not None
        assert model.replay(a, path) == b
        back = shortest_path_between(b, a, max_depth=8)
        assert len(back) == len(path)


def test_shortest_path_same_state_is_empty():
    s, _ = scramble(4, Random(6))
    assert shortest_path_between(s, s) == []


def test_shortest_path_is_minimal():
    # Minimality: no sequence shorter than the table distance exists.
    table = distance_table(3)
    for s, d in list(table.items())[:50]:
        path = shortest_path_between(s, SOLVED, max_depth=3)
        assert len(path) == d


# ---------------------------------------------------------------- group ball


def test_group_ball_row_zero_is_identity():
    perms = group_ball(2)
    assert perms[0].tolist() == list(range(54))


def test_group_ball_matches_distance_table():
    perms = group_ball(3)
    assert perms.shape == (1195, 54)
    reached = {apply_perm(SOLVED, perms[i]) for i in range(perms.shape[0])}
    assert reached == set(distance_table(3))


def test_group_ball_words_align_with_perms():
    perms, words = group_ball_words(2)
    assert perms.shape[0] == len(words) == 127
    rng = Random(7)
    samples = [scramble(6, rng)[0] for _ in range(2)]
    for s in samples:
        for i in range(len(words)):
            assert apply_word(s, words[i]) == apply_perm(s, perms[i])


def test_group_ball_words_are_minimal():
    perms, words = group_ball_words(3)
    table = distance_table(3)
    for i in range(len(words)):
        assert len(words[i]) == table[apply_perm(SOLVED, perms[i])]


# ---------------------------------------------------------------- dataset


def test_generate_dataset_shape_and_labels():
    rng = Random(8)
    count, length = 5, 6
    records = generate_dataset(count, length, rng)
    assert len(records) == count * (length + 1)
    groups = group_trajectories(records)
    assert [g[0].traj_id for g in groups] == list(range(count))
    model = RubikModel()
    for traj in groups:
        assert len(traj) == length + 1
        assert traj[-1].state == serialize_cube(SOLVED)
        assert traj[-1].action is None
        assert traj[-1].value == 0
        assert traj[0].value == -length
        # Replaying the recorded actions from the scrambled start must land
        # on the solved state through exactly the recorded states.
        s = parse_cube(traj[0].state)
        for rec in traj[:-1]:
            assert parse_cube(rec.state) == s
            assert rec.value == rec.step - length
            s = model.next_state(s, rec.action)
        assert s == SOLVED


def test_generate_dataset_deterministic():
    assert generate_dataset(3, 4, Random(9)) == generate_dataset(3, 4, Random(9))
