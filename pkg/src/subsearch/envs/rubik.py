"""3x3x3 cube engine on sticker permutations.

A state is 54 sticker color indices as bytes, faces in U, L, F, R, B, D
order, each face row-major as seen from outside the cube (U read with the F
face at the bottom of the page, D read with F at the top). Face colors are
U=w, L=o, F=g, R=r, B=b, D=y, so the serialized solved cube is 9 w's, then
9 o's, and so on. Centers never move under quarter turns; parse rejects any
string whose centers disagree with that layout.

The twelve quarter-turn move tables are derived geometrically at import:
each sticker gets a 3D position, a face turn rotates the outer layer about
the face normal, and the permutation falls out of matching positions. Move
tokens are the face letter plus an optional apostrophe for the
counterclockwise turn (as seen from outside that face).
"""

from __future__ import annotations

from random import Random
from typing import Sequence

import numpy as np

from ..datasets import DatasetRecord
from ..types import Environment

FACES = "ULFRBD"
TOKENS = "wogrby"  # face color tokens, aligned with FACES
MOVES: tuple[str, ...] = tuple(
    tok for face in FACES for tok in (face, face + "'")
)

_NORMALS = {
    "U": (0, 1, 0),
    "L": (-1, 0, 0),
    "F": (0, 0, 1),
    "R": (1, 0, 0),
    "B": (0, 0, -1),
    "D": (0, -1, 0),
}
_ROW_DIRS = {
    "U": (0, 0, 1),
    "L": (0, -1, 0),
    "F": (0, -1, 0),
    "R": (0, -1, 0),
    "B": (0, -1, 0),
    "D": (0, 0, -1),
}
_COL_DIRS = {
    "U": (1, 0, 0),
    "L": (0, 0, 1),
    "F": (1, 0, 0),
    "R": (0, 0, -1),
    "B": (-1, 0, 0),
    "D": (1, 0, 0),
}


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _build_move_tables() -> dict[str, tuple[int, ...]]:
    # Sticker positions doubled to stay integral: 3*normal + 2*(r-1)*row + 2*(c-1)*col.
    pos_of: list[tuple[int, int, int]] = []
    index_of: dict[tuple[int, int, int], int] = {}
    for f, face in enumerate(FACES):
        nrm, row, col = _NORMALS[face], _ROW_DIRS[face], _COL_DIRS[face]
        for r in range(3):
            for c in range(3):
                p = tuple(
                    3 * nrm[i] + 2 * (r - 1) * row[i] + 2 * (c - 1) * col[i]
                    for i in range(3)
                )
                index_of[p] = f * 9 + r * 3 + c
                pos_of.append(p)

    tables: dict[str, tuple[int, ...]] = {}
    for face in FACES:
        nrm = _NORMALS[face]
        for token, sign in ((face, -1), (face + "'", 1)):
            # sign=-1 is a -90 degree rotation about the outward normal,
            # i.e. clockwise as seen from outside the face.
            perm = list(range(54))
            for i, p in enumerate(pos_of):
                if _dot(p, nrm) < 2:
                    continue  # sticker not in the turning layer
                axial = _dot(p, nrm)
                core = tuple(axial * nrm[j] for j in range(3))
                rim = tuple(p[j] - core[j] for j in range(3))
                spun = _cross(nrm, rim)
                if sign < 0:
                    spun = tuple(-v for v in spun)
                dest = tuple(core[j] + spun[j] for j in range(3))
                perm[index_of[dest]] = i
            tables[token] = tuple(perm)
    return tables


_MOVE_TABLES = _build_move_tables()
_MOVE_ARRAYS = np.array([_MOVE_TABLES[m] for m in MOVES], dtype=np.uint8)
SOLVED: bytes = bytes(f for f in range(6) for _ in range(9))
_TO_TOKENS = bytes.maketrans(bytes(range(6)), TOKENS.encode("ascii"))
_FROM_TOKENS = bytes.maketrans(TOKENS.encode("ascii"), bytes(range(6)))


def apply_move(state: bytes, move: str) -> bytes:
    perm = _MOVE_TABLES[move]
    return bytes([state[p] for p in perm])


def inverse_move(move: str) -> str:
    return move[0] if move.endswith("'") else move + "'"


def serialize_cube(state: bytes) -> str:
    return state.translate(_TO_TOKENS).decode("ascii")


def parse_cube(text: str) -> bytes:
    text = text.strip()
    if len(text) != 54:
        raise ValueError(f"cube string must be 54 tokens, got {len(text)}")
    raw = text.encode("ascii", errors="replace")
    state = raw.translate(_FROM_TOKENS)
    for i, b in enumerate(state):
        if b > 5:
            raise ValueError(f"bad sticker token {text[i]!r} at position {i + 1}")
    for color in range(6):
        count = state.count(color)
        if count != 9:
            raise ValueError(
                f"sticker count for {TOKENS[color]!r} is {count}, expected 9"
            )
    for f in range(6):
        if state[f * 9 + 4] != f:
            raise ValueError(
                f"center of face {FACES[f]} must be {TOKENS[f]!r}, "
                f"got {text[f * 9 + 4]!r}"
            )
    return state


def scramble(length: int, rng: Random) -> tuple[bytes, list[str]]:
    """Random walk of quarter turns from solved; inverse pairs not filtered."""
    moves = [MOVES[rng.randrange(12)] for _ in range(length)]
    s = SOLVED
    for m in moves:
        s = apply_move(s, m)
    return s, moves


class RubikModel(Environment):
    def next_state(self, state: bytes, action: str) -> bytes:
        return apply_move(state, action)

    def is_solved(self, state: bytes) -> bool:
        # Centers are fixed, so a uniform-faced reachable state is SOLVED.
        return state == SOLVED

    def actions(self, state: bytes) -> Sequence[str]:
        return MOVES

    def serialize(self, state: bytes) -> str:
        return serialize_cube(state)

    def parse(self, text: str) -> bytes:
        return parse_cube(text)

    def action_token(self, action: str) -> str:
        return action

    def parse_action(self, token: str) -> str:
        if token not in _MOVE_TABLES:
            raise ValueError(f"bad move token: {token!r}")
        return token


# ---------- exact distances

def shortest_path_between(a: bytes, b: bytes, max_depth: int = 8) -> list[str] | None:
    """Minimal move sequence from a to b via meet-in-the-middle BFS.

    None if the states are farther than max_depth apart.
    """
    if a == b:
        return []
    # parents map state -> (previous state, move applied from the previous)
    fwd: dict[bytes, tuple[bytes, str] | None] = {a: None}
    bwd: dict[bytes, tuple[bytes, str] | None] = {b: None}
    fwd_layer, bwd_layer = [a], [b]
    depth = 0

    def build(meet: bytes) -> list[str]:
        left: list[str] = []
        cur = meet
        while fwd[cur] is not None:
            prev, mv = fwd[cur]
            left.append(mv)
            cur = prev
        left.reverse()
        right: list[str] = []
        cur = meet
        while bwd[cur] is not None:
            prev, mv = bwd[cur]
            right.append(inverse_move(mv))
            cur = prev
        return left + right

    while depth < max_depth and fwd_layer and bwd_layer:
        depth += 1
        if len(fwd_layer) <= len(bwd_layer):
            side, other, layer = fwd, bwd, fwd_layer
        else:
            side, other, layer = bwd, fwd, bwd_layer
        nxt = []
        for s in layer:
            for mv in MOVES:
                t = apply_move(s, mv)
                if t in side:
                    continue
                side[t] = (s, mv)
                if t in other:
                    return build(t)
                nxt.append(t)
        if side is fwd:
            fwd_layer = nxt
        else:
            bwd_layer = nxt
    return None


def brute_distance(state: bytes, max_depth: int = 8) -> int | None:
    """Exact quarter-turn distance to solved, or None beyond max_depth."""
    path = shortest_path_between(state, SOLVED, max_depth)
    return None if path is None else len(path)


def _expand_rows(rows: np.ndarray) -> np.ndarray:
    """All single-move successors of each row: (N, 54) -> (N*12, 54)."""
    return rows[:, _MOVE_ARRAYS].reshape(-1, 54)


def distance_table(radius: int) -> dict[bytes, int]:
    """Exact distances for every state within `radius` of solved."""
    table: dict[bytes, int] = {SOLVED: 0}
    layer = np.frombuffer(SOLVED, dtype=np.uint8).reshape(1, 54)
    for d in range(1, radius + 1):
        cand = _expand_rows(layer)
        blob = cand.tobytes()
        fresh: list[bytes] = []
        for i in range(cand.shape[0]):
            key = blob[i * 54 : (i + 1) * 54]
            if key not in table:
                table[key] = d
                fresh.append(key)
        if not fresh:
            break
        layer = np.frombuffer(b"".join(fresh), dtype=np.uint8).reshape(-1, 54)
    return table


def group_ball(radius: int) -> np.ndarray:
    """Distinct composed move permutations within `radius` turns of identity.

    Returned as a (count, 54) uint8 array; row 0 is the identity. Applying
    row g to a state s is s[g], so one fancy index yields the whole
    neighborhood of s at once.
    """
    identity = np.arange(54, dtype=np.uint8)
    seen = {identity.tobytes()}
    out = [identity.reshape(1, 54)]
    layer = identity.reshape(1, 54)
    for _ in range(radius):
        cand = _expand_rows(layer)
        blob = cand.tobytes()
        fresh_idx = []
        for i in range(cand.shape[0]):
            key = blob[i * 54 : (i + 1) * 54]
            if key not in seen:
                seen.add(key)
                fresh_idx.append(i)
        if not fresh_idx:
            break
        layer = cand[fresh_idx]
        out.append(layer)
    return np.concatenate(out, axis=0)


def group_ball_words(radius: int) -> tuple[np.ndarray, list[tuple[str, ...]]]:
    """group_ball plus one shortest move word per permutation, row-aligned.

    words[i] applied left to right to any state s yields s[perms[i]].
    """
    identity = np.arange(54, dtype=np.uint8)
    seen = {identity.tobytes()}
    out = [identity.reshape(1, 54)]
    words: list[tuple[str, ...]] = [()]
    layer = identity.reshape(1, 54)
    layer_words: list[tuple[str, ...]] = [()]
    for _ in range(radius):
        cand = _expand_rows(layer)
        blob = cand.tobytes()
        fresh_idx = []
        fresh_words = []
        for i in range(cand.shape[0]):
            key = blob[i * 54 : (i + 1) * 54]
            if key not in seen:
                seen.add(key)
                fresh_idx.append(i)
                fresh_words.append(layer_words[i // 12] + (MOVES[i % 12],))
        if not fresh_idx:
            break
        layer = cand[fresh_idx]
        layer_words = fresh_words
        out.append(layer)
        words.extend(fresh_words)
    return np.concatenate(out, axis=0), words


def neighborhood_sizes(max_depth: int) -> list[int]:
    """Cumulative state counts of the balls around solved, for self-tests."""
    table = distance_table(max_depth)
    sizes = [0] * (max_depth + 1)
    for d in table.values():
        sizes[d] += 1
    out = []
    total = 0
    for d in range(max_depth + 1):
        total += sizes[d]
        out.append(total)
    return out


# ---------- training data

def generate_dataset(count: int, scramble_len: int, rng: Random) -> list[DatasetRecord]:
    """Reversed-scramble trajectories: scrambled start, solved end.

    Each trajectory walks a random scramble backward, so step l's action is
    the inverse of the scramble's (n-l)th move and the value label is l - n.
    """
    records: list[DatasetRecord] = []
    for traj in range(count):
        end, moves = scramble(scramble_len, rng)
        states = [SOLVED]
        for mv in moves:
            states.append(apply_move(states[-1], mv))
        n = scramble_len
        for step in range(n + 1):
            state = states[n - step]
            action = inverse_move(moves[n - step - 1]) if step < n else None
            records.append(
                DatasetRecord(
                    traj_id=traj,
                    step=step,
                    state=serialize_cube(state),
                    action=action,
                    value=step - n,
                )
            )
    return records
