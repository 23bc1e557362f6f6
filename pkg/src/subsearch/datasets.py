"""Trajectory dataset records: the on-disk training-data format.

One record per line, tab-separated: trajectory id, step index, state string,
action token, value label. The action token is empty on a trajectory's final
record. Value labels run step - length, so the final state labels 0 and the
first state labels minus the trajectory length.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class DatasetRecord:
    traj_id: int
    step: int
    state: str
    action: str | None  # None on the final record of a trajectory
    value: int


def write_dataset(path: str | Path, records: Iterable[DatasetRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            action = r.action if r.action is not None else ""
            fh.write(f"{r.traj_id}\t{r.step}\t{r.state}\t{action}\t{r.value}\n")


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    records: list[DatasetRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
            traj, step, state, action, value = parts
            records.append(
                DatasetRecord(int(traj), int(step), state, action or None, int(value))
            )
    return records


def group_trajectories(records: Sequence[DatasetRecord]) -> list[list[DatasetRecord]]:
    """Group records by trajectory id, each ordered by step index."""
    by_id: dict[int, list[DatasetRecord]] = {}
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
