"""Sokoban board engine with pixelwise subgoal machinery.

Boards are square d x d grids. Each cell is exactly one of seven channels,
stored as one byte: 0 wall, 1 floor, 2 target, 3 box, 4 box-on-target,
5 agent, 6 agent-on-target. Text form uses the conventional glyphs
'#', ' ', '.', '$', '*', '@', '+' in that channel order.

The subgoal side works on raw pixels: a modification class index in
[1, d*d*7] rewrites one cell to one channel, and class d*d*7 + 1 is the
terminal "this is a complete subgoal" marker. expand_pixelwise turns a
per-pixel prediction provider into weighted subgoal proposals, and
generate_inputs_and_targets produces the training pairs that teach such a
provider to rebuild a subgoal from a state, one cell at a time in scan
order. Intermediate modified boards may violate play invariants (no agent,
two agents); only parse_board enforces them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from random import Random
from typing import Callable, Iterable, Sequence

import numpy as np

from ..search import prune_by_total_probability
from ..types import Environment, SubgoalProposal, sort_proposals

WALL, FLOOR, TARGET, BOX, BOX_ON_TARGET, AGENT, AGENT_ON_TARGET = range(7)
NUM_CHANNELS = 7
GLYPHS = "# .$*@+"  # glyph index == channel index
ACTIONS: tuple[str, ...] = ("up", "down", "left", "right")
_DELTAS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}


@dataclass(frozen=True, eq=False)
class Board:
    """Immutable square board; cells are channel bytes, row-major."""

    d: int
    cells: bytes
    _hash: int = field(init=False, repr=False)
    _agent: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("board side must be >= 1")
        if len(self.cells) != self.d * self.d:
            raise ValueError(
                f"cell count {len(self.cells)} does not match side {self.d}"
            )
        if max(self.cells) >= NUM_CHANNELS:
            raise ValueError("cell channel out of range")
        a = self.cells.find(AGENT)
        b = self.cells.find(AGENT_ON_TARGET)
        agent = a if b < 0 else (b if a < 0 else min(a, b))
        object.__setattr__(self, "_agent", agent)
        object.__setattr__(self, "_hash", hash(self.cells))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Board):
            return NotImplemented
        return self.cells == other.cells

    @property
    def agent_pos(self) -> tuple[int, int]:
        if self._agent < 0:
            raise ValueError("board has no agent")
        return divmod(self._agent, self.d)

    def at(self, row: int, col: int) -> int:
        return self.cells[row * self.d + col]


# ---------- text form

def parse_board(text: str) -> Board:
    """Parse glyph text (rows separated by newlines or '|') into a Board.

    Rejects ragged or non-square layouts, unknown glyphs, boards without
    exactly one agent, and box/target imbalance.
    """
    rows = text.replace("|", "\n").strip("\n").split("\n")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError("board rows have unequal lengths")
    d = widths.pop()
    if d != len(rows):
        raise ValueError(f"board must be square, got {len(rows)}x{d}")
    cells = bytearray()
    for r, row in enumerate(rows):
        for c, glyph in enumerate(row):
            channel = GLYPHS.find(glyph)
            if channel < 0:
                raise ValueError(f"unknown glyph {glyph!r} at row {r}, col {c}")
            cells.append(channel)
    agents = cells.count(AGENT) + cells.count(AGENT_ON_TARGET)
    if agents != 1:
        raise ValueError(f"board must have exactly one agent, found {agents}")
    boxes = cells.count(BOX) + cells.count(BOX_ON_TARGET)
    targets = cells.count(TARGET) + cells.count(BOX_ON_TARGET) + cells.count(
        AGENT_ON_TARGET
    )
    if boxes != targets:
        raise ValueError(f"box count {boxes} does not match target count {targets}")
    return Board(d, bytes(cells))


def render_board(board: Board) -> str:
    rows = []
    for r in range(board.d):
        line = board.cells[r * board.d : (r + 1) * board.d]
        rows.append("".join(GLYPHS[ch] for ch in line))
    return "\n".join(rows)


def serialize_board(board: Board) -> str:
    """Single-line form: rows joined with '|'."""
    return render_board(board).replace("\n", "|")


def parse_corpus(text: str) -> list[Board]:
    """Parse a multi-board text file, boards separated by '---' lines."""
    boards: list[Board] = []
    chunk: list[str] = []

    def flush() -> None:
        while chunk and not chunk[0].strip():
            chunk.pop(0)
        while chunk and not chunk[-1].strip():
            chunk.pop()
        if chunk:
            boards.append(parse_board("\n".join(chunk)))
            chunk.clear()

    for line in text.split("\n"):
        if line.strip() == "---":
            flush()
        else:
            chunk.append(line)
    flush()
    return boards


def load_board_file(path: str) -> list[Board]:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh.read())


def load_micro_corpus() -> list[Board]:
    """The bundled hand-checked small-board corpus."""
    text = resources.files("subsearch").joinpath("data/micro_corpus.txt").read_text()
    return parse_corpus(text)


# ---------- game rules

def step(board: Board, action: str) -> Board:
    """One agent move; pushes a single box; blocked moves return `board`."""
    dr, dc = _DELTAS[action]
    d = board.d
    ar, ac = board.agent_pos
    fr, fc = ar + dr, ac + dc
    if not (0 <= fr < d and 0 <= fc < d):
        return board
    fi = fr * d + fc
    front = board.cells[fi]
    push_to = -1
    if front in (FLOOR, TARGET):
        pass
    elif front in (BOX, BOX_ON_TARGET):
        br, bc = fr + dr, fc + dc
        if not (0 <= br < d and 0 <= bc < d):
            return board
        push_to = br * d + bc
        beyond = board.cells[push_to]
        if beyond not in (FLOOR, TARGET):
            return board
    else:
        return board
    new = bytearray(board.cells)
    ai = ar * d + ac
    new[ai] = TARGET if board.cells[ai] == AGENT_ON_TARGET else FLOOR
    new[fi] = AGENT_ON_TARGET if front in (TARGET, BOX_ON_TARGET) else AGENT
    if push_to >= 0:
        new[push_to] = (
            BOX_ON_TARGET if board.cells[push_to] == TARGET else BOX
        )
    return Board(d, bytes(new))


def is_solved(board: Board) -> bool:
    return board.cells.find(BOX) < 0


def successors(board: Board) -> list[Board]:
    """Distinct boards reachable in one non-blocked move."""
    out: list[Board] = []
    for action in ACTIONS:
        child = step(board, action)
        if child is not board and child not in out:
            out.append(child)
    return out


class SokobanModel(Environment):
    def next_state(self, state: Board, action: str) -> Board:
        return step(state, action)

    def is_solved(self, state: Board) -> bool:
        return is_solved(state)

    def actions(self, state: Board) -> Sequence[str]:
        return ACTIONS

    def serialize(self, state: Board) -> str:
        return serialize_board(state)

    def parse(self, text: str) -> Board:
        return parse_board(text)

    def action_token(self, action: str) -> str:
        if action not in _DELTAS:
            raise ValueError(f"bad action: {action!r}")
        return action

    def parse_action(self, token: str) -> str:
        if token not in _DELTAS:
            raise ValueError(f"bad action token: {token!r}")
        return token


# ---------- low-level conditional policy

def bfs_get_path(
    board: Board, subgoal: Board, k: int, model: object | None = None
) -> list[str]:
    """Shortest action sequence (at most k steps) from board to subgoal.

    Breadth-first over primitive moves; empty list when the subgoal is out
    of range. Each queue entry carries its own path copy. When `model` is
    given its next_state is used instead of step() so callers can observe
    transitions.
    """
    if board == subgoal:
        return []
    advance: Callable[[Board, str], Board] = (
        model.next_state if model is not None else step  # type: ignore[union-attr]
    )
    visited = {board}
    queue: deque[tuple[Board, list[str]]] = deque([(board, [])])
    while queue:
        s, path = queue.popleft()
        for action in ACTIONS:
            child = advance(s, action)
            child_path = path + [action]
            if child == subgoal:
                return child_path
            if len(child_path) < k and child not in visited:
                visited.add(child)
                queue.append((child, child_path))
    return []


# ---------- exact distances

class GraphCapExceeded(RuntimeError):
    """Raised when a board's forward state graph outgrows the cap."""


@dataclass
class DistanceMap:
    """Exact distance-to-solved over one board's forward state graph.

    distances maps every live reachable state to its minimal action count
    to some solved state; dead holds reachable states with no such path;
    adjacency maps every reachable state to its distinct successors.
    """

    distances: dict[Board, int]
    dead: frozenset[Board]
    adjacency: dict[Board, tuple[Board, ...]]

    def dist(self, state: Board) -> int | None:
        """Distance for live states, None for dead ones."""
        return self.distances.get(state)


def dijkstra_all(board: Board, cap: int = 200_000) -> DistanceMap:
    """Distances to the solved set for every state reachable from board.

    Unit edge costs make this plain BFS: forward exploration enumerates the
    reachable graph (raising GraphCapExceeded past `cap` states), then a
    backward pass from all reachable solved states assigns distances.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    adjacency: dict[Board, tuple[Board, ...]] = {}
    frontier = [board]
    discovered = {board}
    while frontier:
        nxt: list[Board] = []
        for s in frontier:
            kids = tuple(successors(s))
            adjacency[s] = kids
            for child in kids:
                if child not in discovered:
                    discovered.add(child)
                    if len(discovered) > cap:
                        raise GraphCapExceeded(
                            f"state graph exceeds cap of {cap} states"
                        )
                    nxt.append(child)
        frontier = nxt

    predecessors: dict[Board, list[Board]] = {s: [] for s in adjacency}
    for s, kids in adjacency.items():
        for child in kids:
            predecessors[child].append(s)

    distances: dict[Board, int] = {s: 0 for s in adjacency if is_solved(s)}
    layer = list(distances)
    depth = 0
    while layer:
        depth += 1
        nxt = []
        for s in layer:
            for prev in predecessors[s]:
                if prev not in distances:
                    distances[prev] = depth
                    nxt.append(prev)
        layer = nxt
    dead = frozenset(s for s in adjacency if s not in distances)
    return DistanceMap(distances=distances, dead=dead, adjacency=adjacency)


def shortest_solving_path(board: Board, dmap: DistanceMap) -> list[Board]:
    """States along one minimal solution, greedy descent over dmap.

    Ties broken by serialized form so the path is deterministic.
    """
    dist = dmap.dist(board)
    if dist is None:
        raise ValueError("board is dead: no solving path exists")
    path = [board]
    s = board
    while dmap.distances[s] > 0:
        want = dmap.distances[s] - 1
        nxt = min(
            (c for c in dmap.adjacency[s] if dmap.distances.get(c) == want),
            key=serialize_board,
        )
        path.append(nxt)
        s = nxt
    return path


# ---------- pixelwise subgoal machinery

def terminal_class(d: int) -> int:
    """The 'complete subgoal' marker class for side length d."""
    return d * d * NUM_CHANNELS + 1


def apply_change(board: Board, class_index: int) -> Board:
    """Rewrite one cell to one channel, addressed by a 1-based class index.

    Index arithmetic is zero-based on class_index - 1 so the last real
    class lands on (d-1, d-1, channel 6) instead of overflowing. The
    terminal class is rejected: it encodes no change.
    """
    d = board.d
    if not 1 <= class_index <= d * d * NUM_CHANNELS:
        raise ValueError(
            f"class index {class_index} out of range [1, {d * d * NUM_CHANNELS}]"
        )
    idx = class_index - 1
    row = idx // (d * NUM_CHANNELS)
    col = (idx % (d * NUM_CHANNELS)) // NUM_CHANNELS
    channel = idx % NUM_CHANNELS
    cell = row * d + col
    if board.cells[cell] == channel:
        return board
    new = bytearray(board.cells)
    new[cell] = channel
    return Board(d, bytes(new))


def class_index_of(d: int, row: int, col: int, channel: int) -> int:
    """Inverse of apply_change's decode."""
    if not (0 <= row < d and 0 <= col < d and 0 <= channel < NUM_CHANNELS):
        raise ValueError("pixel coordinates out of range")
    return row * d * NUM_CHANNELS + col * NUM_CHANNELS + channel + 1


# A provider maps (original state, partially modified state) to predictions
# over modification classes, sorted by probability descending.
ModificationProvider = Callable[[Board, Board], Sequence[tuple[int, float]]]


class ExpansionCapExceeded(RuntimeError):
    """Raised when pixelwise expansion enqueues more nodes than allowed."""


def expand_pixelwise(
    state: Board,
    modification_provider: ModificationProvider,
    internal_cl: float,
    c4: float,
    max_nodes: int = 10_000,
) -> list[SubgoalProposal]:
    """Grow subgoal proposals by iterating per-pixel modifications.

    FIFO over partially modified boards. For each node, predictions are
    consumed in order until their cumulative probability reaches
    internal_cl (checked before adding, so the first prediction always
    counts); the terminal class emits the node as a subgoal weighted by the
    product of branch probabilities, any other class enqueues the modified
    board. The final list is ranked and pruned by cumulative probability c4.
    """
    terminal = terminal_class(state.d)
    found: list[SubgoalProposal] = []
    queue: deque[tuple[Board, float]] = deque([(state, 1.0)])
    popped = 0
    while queue:
        modified, parent_prob = queue.popleft()
        popped += 1
        if popped > max_nodes:
            raise ExpansionCapExceeded(
                f"pixelwise expansion exceeded {max_nodes} nodes"
            )
        predictions = modification_provider(state, modified)
        total = 0.0
        for cls, p in predictions:
            if total >= internal_cl:
                break
            total += p
            if cls == terminal:
                found.append(SubgoalProposal(state=modified, prob=parent_prob * p))
            else:
                queue.append((apply_change(modified, cls), parent_prob * p))
    ranked = sort_proposals(found, serialize_board)
    return prune_by_total_probability(ranked, c4)


def generate_inputs_and_targets(
    state: Board, subgoal: Board
) -> tuple[list[tuple[Board, Board]], list[int]]:
    """Training pairs teaching a provider to rebuild subgoal from state.

    Cells are scanned in (row, col, channel) order; wherever the subgoal
    has a channel the running modified board lacks, the class index is
    emitted as a target and the full cell is overwritten. The final target
    is the terminal class. Inputs pair the original state with each
    successive modified board, so len(inputs) == len(targets).
    """
    if state.d != subgoal.d:
        raise ValueError("state and subgoal sizes differ")
    d = state.d
    modified = state
    inputs: list[tuple[Board, Board]] = [(state, modified)]
    targets: list[int] = []
    class_num = 0
    for row in range(d):
        for col in range(d):
            cell = row * d + col
            for channel in range(NUM_CHANNELS):
                class_num += 1
                if subgoal.cells[cell] == channel and modified.cells[cell] != channel:
                    targets.append(class_num)
                    new = bytearray(modified.cells)
                    new[cell] = subgoal.cells[cell]
                    modified = Board(d, bytes(new))
                    inputs.append((state, modified))
    targets.append(terminal_class(d))
    return inputs, targets


# ---------- one-hot tensor form

def to_onehot(board: Board) -> np.ndarray:
    """(d, d, 7) uint8 one-hot tensor."""
    flat = np.frombuffer(board.cells, dtype=np.uint8)
    arr = np.zeros((board.d * board.d, NUM_CHANNELS), dtype=np.uint8)
    arr[np.arange(flat.size), flat] = 1
    return arr.reshape(board.d, board.d, NUM_CHANNELS)


def from_onehot(arr: np.ndarray) -> Board:
    a = np.asarray(arr)
    if a.ndim != 3 or a.shape[0] != a.shape[1] or a.shape[2] != NUM_CHANNELS:
        raise ValueError(f"expected (d, d, {NUM_CHANNELS}) tensor, got {a.shape}")
    flat = a.reshape(-1, NUM_CHANNELS)
    if not np.array_equal(flat.sum(axis=1), np.ones(flat.shape[0], dtype=a.dtype)):
        raise ValueError("tensor is not one-hot per cell")
    return Board(int(a.shape[0]), bytes(flat.argmax(axis=1).astype(np.uint8)))


# ---------- misc helpers

def random_walk(board: Board, steps: int, rng: Random) -> Board:
    """End state of `steps` uniformly random primitive moves."""
    s = board
    for _ in range(steps):
        s = step(s, ACTIONS[rng.randrange(4)])
    return s


def corner_deadlocked(board: Board) -> bool:
    """Cheap sufficient test: some plain box sits in a non-target corner."""
    d = board.d
    for i, ch in enumerate(board.cells):
        if ch != BOX:
            continue
        r, c = divmod(i, d)
        up = r == 0 or board.cells[i - d] == WALL
        down = r == d - 1 or board.cells[i + d] == WALL
        left = c == 0 or board.cells[i - 1] == WALL
        right = c == d - 1 or board.cells[i + 1] == WALL
        if (up or down) and (left or right):
            return True
    return False
