"""Tabular subgoal/value/policy model fitted from trajectory records.

The fit counts, for each state s_l of a trajectory of length n, the k-step
successor s_min(l+k, n) (the final state labels itself), accumulates the
record's own value label, and credits the step action a_l to every pair
(s_l, s_min(l+i, n)) for i in 1..k, clamped duplicates included. Subgoal
rows are sorted by count descending, ties by target string ascending, with
probabilities count/total; policy entries are the modal action with ties by
token ascending. Unseen states degrade in band: no candidates, the default
(pessimistic) value, no action.

Models serialize to a line-oriented tab-separated text file. Floats are
written with repr so a save/load round trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .records import Record, group_trajectories

FORMAT_TAG = "tabular-model"
FORMAT_VERSION = 1


@dataclass
class TabularModel:
    k: int
    subgoal_table: dict[str, list[tuple[str, float]]]
    value_table: dict[str, float]
    policy_table: dict[tuple[str, str], str]
    default_value: float

    def subgoals(self, state: str, count: int) -> list[tuple[str, float]]:
        rows = self.subgoal_table.get(state)
        return rows[:count] if rows else []

    def value(self, state: str) -> float:
        return self.value_table.get(state, self.default_value)

    def policy(self, state: str, subgoal: str) -> str | None:
        return self.policy_table.get((state, subgoal))


def fit(
    records: Iterable[Record], k: int, default_value: float | None = None
) -> TabularModel:
    """Count k-step successors, mean values, and modal actions."""
    sub_counts: dict[str, dict[str, int]] = {}
    value_sum: dict[str, float] = {}
    value_n: dict[str, int] = {}
    act_counts: dict[tuple[str, str], dict[str, int]] = {}
    max_len = 0
    for traj in group_trajectories(list(records)):
        n = len(traj) - 1
        max_len = max(max_len, n)
        states = [r.state for r in traj]
        for l, rec in enumerate(traj):
            s = states[l]
            target = states[min(l + k, n)]
            sub_counts.setdefault(s, {})
            sub_counts[s][target] = sub_counts[s].get(target, 0) + 1
            value_sum[s] = value_sum.get(s, 0.0) + float(rec.value)
            value_n[s] = value_n.get(s, 0) + 1
            if l < n:
                for i in range(1, k + 1):
                    pair = (s, states[min(l + i, n)])
                    bucket = act_counts.setdefault(pair, {})
                    bucket[rec.action] = bucket.get(rec.action, 0) + 1

    subgoal_table: dict[str, list[tuple[str, float]]] = {}
    for s, counts in sub_counts.items():
        total = sum(counts.values())
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        subgoal_table[s] = [(tgt, cnt / total) for tgt, cnt in rows]
    value_table = {s: value_sum[s] / value_n[s] for s in value_sum}
    policy_table = {
        pair: sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        for pair, counts in act_counts.items()
    }
    if default_value is None:
        default_value = -2.0 * max_len
    return TabularModel(
        k=k,
        subgoal_table=subgoal_table,
        value_table=value_table,
        policy_table=policy_table,
        default_value=default_value,
    )


def save_model(model: TabularModel, path: str | Path) -> None:
    """Write the model as tab-separated lines.

    Layout: a format header, then `k` and `default_value` scalars, then one
    `S` line per subgoal row (states sorted, rows in fitted order), one `V`
    line per value entry, and one `P` line per policy entry.
    """
    lines = [
        f"{FORMAT_TAG}\t{FORMAT_VERSION}",
        f"k\t{model.k}",
        f"default_value\t{model.default_value!r}",
    ]
    for state in sorted(model.subgoal_table):
        for target, prob in model.subgoal_table[state]:
            lines.append(f"S\t{state}\t{target}\t{prob!r}")
    for state in sorted(model.value_table):
        lines.append(f"V\t{state}\t{model.value_table[state]!r}")
    for (state, subgoal) in sorted(model.policy_table):
        lines.append(f"P\t{state}\t{subgoal}\t{model.policy_table[(state, subgoal)]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TabularModel:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].split("\t") != [FORMAT_TAG, str(FORMAT_VERSION)]:
        raise ValueError(f"not a {FORMAT_TAG} v{FORMAT_VERSION} file")
    k: int | None = None
    default_value: float | None = None
    subgoal_table: dict[str, list[tuple[str, float]]] = {}
    value_table: dict[str, float] = {}
    policy_table: dict[tuple[str, str], str] = {}
    for lineno, line in enumerate(lines[1:], 2):
        if not line:
            continue
        parts = line.split("\t")
        tag = parts[0]
        try:
            if tag == "k" and len(parts) == 2:
                k = int(parts[1])
            elif tag == "default_value" and len(parts) == 2:
                default_value = float(parts[1])
            elif tag == "S" and len(parts) == 4:
                subgoal_table.setdefault(parts[1], []).append(
                    (parts[2], float(parts[3]))
                )
            elif tag == "V" and len(parts) == 3:
                value_table[parts[1]] = float(parts[2])
            elif tag == "P" and len(parts) == 4:
                policy_table[(parts[1], parts[2])] = parts[3]
            else:
                raise ValueError(f"unrecognized record {tag!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if k is None or default_value is None:
        raise ValueError("missing k or default_value header")
    return TabularModel(
        k=k,
        subgoal_table=subgoal_table,
        value_table=value_table,
        policy_table=policy_table,
        default_value=default_value,
    )
