"""Trajectory record files.

One record per line, five tab-separated fields: trajectory id, step index,
state string, action token, value label. The action field is empty on a
trajectory's final record; value labels are integers (step minus trajectory
length). Malformed lines are rejected with their line number.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence


@dataclass(frozen=True)
class Record:
    traj_id: int
    step: int
    state: str
    action: str | None
    value: int


def read_records(path: str | Path) -> list[Record]:
    records: list[Record] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(
                    f"line {lineno}: expected 5 tab-separated fields, got {len(parts)}"
                )
            traj, step, state, action, value = parts
            try:
                records.append(
                    Record(int(traj), int(step), state, action or None, int(value))
                )
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
    return records


def group_trajectories(records: Sequence[Record]) -> list[list[Record]]:
    """Group by trajectory id, order by step, validate contiguity."""
    by_id: dict[int, list[Record]] = {}
    for r in records:
        by_id.setdefault(r.traj_id, []).append(r)
    out = []
    for traj_id in sorted(by_id):
        steps = sorted(by_id[traj_id], key=lambda r: r.step)
        for i, r in enumerate(steps):
            if r.step != i:
                raise ValueError(f"trajectory {traj_id}: non-contiguous step {r.step}")
        if steps[-1].action is not None:
            raise ValueError(f"trajectory {traj_id}: final record has an action")
        out.append(steps)
    return out
