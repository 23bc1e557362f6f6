"""Experiment harness: config round trips, sweep invariants, CSV, CLI."""

from __future__ import annotations

import json
import sys

import pytest

from subsearch.cli import main
from subsearch.datasets import read_dataset
from subsearch.envs.grid import GridModel
from subsearch.harness import (
    KSWEEP_FIELDS,
    SWEEP_FIELDS,
    ExperimentConfig,
    analyze_delta,
    analyze_monotonicity,
    analyze_value_errors,
    gen_data,
    run_k_sweep,
    run_sweep,
    run_table4_rows,
    solve_one,
    solve_report,
    write_csv,
)

SMALL_CORPUS = """\
#####
#@$.#
#   #
#   #
#####
---
#####
#@  #
# $ #
# . #
#####
---
######
#@   #
# $$ #
# .. #
#    #
######
"""

HELLO_STUB = """\
import json, sys
hello = json.loads(sys.stdin.readline())
mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
if mode == "reject":
    print(json.dumps({"type": "error", "message": "nope"}), flush=True)
else:
    print(json.dumps({"type": "hello_ok", "version": 1}), flush=True)
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"type": "value_ok", "id": req["id"], "value": -1.5}), flush=True)
"""


def grid_cfg(**overrides) -> ExperimentConfig:
    base = dict(
        env="grid", planner="bf-ksubs", provider="oracle",
        trials=4, budgets=(30,), seed=0, k=2, c3=3, grid_m=2, grid_n=3,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.fixture()
def corpus_file(tmp_path):
    path = tmp_path / "boards.txt"
    path.write_text(SMALL_CORPUS)
    return str(path)


# --------------------------------------------------------------- config


def test_config_round_trips_through_json():
    cfg = grid_cfg(sigma=2.5, budgets=(10, 20))
    data = json.loads(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_dict(data) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys.*typo"):
        ExperimentConfig.from_dict({"env": "grid", "typo": 1})


def test_config_validation():
    with pytest.raises(ValueError, match="unknown env"):
        ExperimentConfig(env="chess")
    with pytest.raises(ValueError, match="unknown planner"):
        ExperimentConfig(planner="dfs")
    with pytest.raises(ValueError, match="unknown provider"):
        ExperimentConfig(provider="magic")
    with pytest.raises(ValueError, match="trials"):
        ExperimentConfig(trials=-1)


def test_config_coerces_budgets_to_int_tuple():
    cfg = grid_cfg(budgets=[10, 20])
    assert cfg.budgets == (10, 20)
    assert all(isinstance(b, int) for b in cfg.budgets)


# ---------------------------------------------------------------- solves


def test_solve_one_grid():
    result = solve_one(grid_cfg(), trial=0, budget=50)
    assert result.solved
    env = GridModel(2, 3)
    assert env.is_solved(env.replay(env.start(), result.actions))


def test_trial_results_do_not_depend_on_trial_count():
    few = grid_cfg(trials=2)
    many = grid_cfg(trials=8)
    for trial in range(2):
        a = solve_one(few, trial, 30)
        b = solve_one(many, trial, 30)
        assert (a.status, a.actions, a.metrics) == (b.status, b.actions, b.metrics)


def test_solve_report_tokens_replay():
    report = solve_report(grid_cfg(), trial=1)
    assert report["solved"] is True
    assert report["status"] == "solved"
    assert report["budget"] == 30
    env = GridModel(2, 3)
    state = env.start()
    for token in report["actions"]:
        state = env.next_state(state, env.parse_action(token))
    assert env.is_solved(state)
    assert report["graph_size"] == report["metrics"]["seen_count"]


def test_solve_report_deterministic():
    assert solve_report(grid_cfg(), trial=2) == solve_report(grid_cfg(), trial=2)


def test_mcts_budget_is_passes_per_call():
    cfg = grid_cfg(planner="mcts-ksubs", budgets=(3,))
    result = solve_one(cfg, trial=0, budget=3)
    assert result.metrics.mcts_passes > 0
    assert result.metrics.mcts_passes % 3 == 0


def test_chain_sampler_runs():
    cfg = grid_cfg(planner="chain-sampler", num_chains=16, chain_length=8)
    result = solve_one(cfg, trial=0, budget=200)
    assert result.solved


def test_sokoban_solve(corpus_file):
    cfg = ExperimentConfig(
        env="sokoban", planner="bf-ksubs", provider="oracle",
        trials=3, budgets=(100,), k=4, c3=4, c4=0.98, corpus=corpus_file,
    )
    for trial in range(3):
        assert solve_one(cfg, trial, 100).solved


def test_rubik_solve():
    cfg = ExperimentConfig(
        env="rubik", planner="bf-ksubs", provider="oracle",
        trials=1, budgets=(200,), k=4, c3=3, scramble_len=4,
    )
    result = solve_one(cfg, trial=0, budget=200)
    assert result.solved


# ---------------------------------------------------------------- sweeps


def test_sweep_rows_shape_and_success():
    rows = run_sweep(grid_cfg(budgets=(5, 30)))
    assert [row["budget"] for row in rows] == [5, 30]
    for row in rows:
        assert tuple(row) == SWEEP_FIELDS
        assert row["method"] == "bf-ksubs"
        assert row["trials"] == 4
        assert row["seed"] == 0
    assert rows[1]["success_rate"] == 1.0
    assert rows[1]["mean_path_length"] > 0


def test_sweep_repeatable():
    assert run_sweep(grid_cfg()) == run_sweep(grid_cfg())


def test_sweep_worker_count_invariant():
    assert run_sweep(grid_cfg(workers=1)) == run_sweep(grid_cfg(workers=2))


def test_sweep_zero_trials_yields_no_rows(tmp_path):
    rows = run_sweep(grid_cfg(trials=0))
    assert rows == []
    out = tmp_path / "empty.csv"
    write_csv(out, SWEEP_FIELDS, rows)
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1] == ",".join(SWEEP_FIELDS)


def test_ksweep_at_k1_matches_baseline_planner():
    ksubs = run_k_sweep(grid_cfg(), [1])
    baseline = run_sweep(grid_cfg(planner="bestfs-baseline"))
    assert len(ksubs) == len(baseline) == 1
    assert ksubs[0]["k"] == 1
    for field in ("success_rate", "mean_graph_size", "mean_path_length", "trials"):
        assert ksubs[0][field] == baseline[0][field]


def test_ksweep_row_order_and_fields():
    rows = run_k_sweep(grid_cfg(budgets=(10, 30)), [2, 1])
    assert [(row["k"], row["budget"]) for row in rows] == [
        (1, 10), (1, 30), (2, 10), (2, 30),
    ]
    assert all(tuple(row) == KSWEEP_FIELDS for row in rows)


def test_trial_errors_become_failed_rows(capsys):
    cfg = grid_cfg(provider="tabular")  # no dataset: every trial errors
    rows = run_sweep(cfg)
    assert rows[0]["success_rate"] == 0.0
    assert rows[0]["mean_graph_size"] == 0.0
    assert rows[0]["trials"] == 4
    assert "warning: trial error" in capsys.readouterr().err


def test_table4_rows_smoke():
    rows = run_table4_rows(
        trials=3, budget=30, seed=0, m=2, n=3, k=2, c3=3, sigmas=(0.0,)
    )
    assert len(rows) == 2
    assert {row["method"] for row in rows} == {"bf-ksubs", "bestfs-baseline"}
    for row in rows:
        assert row["sigma"] == 0.0
        assert row["success_rate"] == 1.0
        assert row["trials"] == 3


# --------------------------------------------------------------- datasets


def test_gen_data_round_trip(tmp_path):
    out = tmp_path / "trajs.tsv"
    count = gen_data("rubik", out, count=3, scramble_len=4, seed=1)
    assert count == 3 * 5
    records = read_dataset(out)
    assert len(records) == count
    assert {rec.traj_id for rec in records} == {0, 1, 2}


def test_gen_data_rejects_other_envs(tmp_path):
    with pytest.raises(ValueError, match="not available"):
        gen_data("grid", tmp_path / "x.tsv", count=1, scramble_len=4, seed=0)


# --------------------------------------------------------------- analysis


def test_analyze_delta(corpus_file):
    rows = analyze_delta(corpus_file, k=4, num_subgoals=4, samples_per_board=4)
    assert rows[-1]["delta"] == "dead"
    assert rows[-1]["count"] == 0, "the exact generator never proposes dead states"
    assert sum(row["fraction"] for row in rows) == pytest.approx(1.0)
    # Improvements of the exact generator stay within one subgoal step.
    assert all(0 <= row["delta"] <= 4 for row in rows[:-1])
    assert any(row["delta"] >= 1 for row in rows[:-1])


def test_analyze_value_errors_noiseless(corpus_file):
    rows = analyze_value_errors(corpus_file, sigma=0.0, radius=2, min_set_size=2)
    (row,) = rows
    assert row["sigma"] == 0.0
    assert row["mean_std"] == 0.0
    assert row["mean_one_step_improvement"] == 1.0
    assert row["over_neighbor_probability"] == 0.0


def test_analyze_monotonicity_noiseless(corpus_file):
    rows = analyze_monotonicity(corpus_file, sigma=0.0, steps=(1, 2))
    assert [row["step"] for row in rows] == [1, 2]
    for row in rows:
        assert row["decrease_probability"] == 0.0
        assert row["expected_gaussian"] == 0.0


def test_analyze_monotonicity_deterministic(corpus_file):
    first = analyze_monotonicity(corpus_file, sigma=2.0, steps=(1,), seed=5)
    second = analyze_monotonicity(corpus_file, sigma=2.0, steps=(1,), seed=5)
    assert first == second


# -------------------------------------------------------------------- csv


def test_write_csv_layout(tmp_path):
    out = tmp_path / "rows.csv"
    write_csv(out, ("a", "b"), [{"a": 1, "b": 1 / 3}, {"a": "x", "b": 0.5}])
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# generated ")
    assert lines[1] == "a,b"
    assert lines[2] == "1,0.3333333333333333"
    assert lines[3] == "x,0.5"


def test_identical_sweeps_identical_csv_bytes(tmp_path):
    rows_a = run_sweep(grid_cfg())
    rows_b = run_sweep(grid_cfg())
    path_a, path_b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(path_a, SWEEP_FIELDS, rows_a)
    write_csv(path_b, SWEEP_FIELDS, rows_b)
    body_a = path_a.read_bytes().split(b"\n", 1)[1]
    body_b = path_b.read_bytes().split(b"\n", 1)[1]
    assert body_a == body_b


# -------------------------------------------------------------------- cli


def test_cli_solve_prints_report(capsys):
    code = main([
        "solve", "--env", "grid", "--grid-m", "2", "--grid-n", "3",
        "--k", "2", "--c3", "3", "--budgets", "30",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["solved"] is True
    assert report["planner"] == "bf-ksubs"


def test_cli_sweep_writes_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--env", "grid", "--grid-m", "2", "--grid-n", "3",
        "--k", "2", "--c3", "3", "--budgets", "10,30", "--trials", "2",
        "--out", str(out),
    ])
    assert code == 0
    assert "wrote 2 row(s)" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[1] == ",".join(SWEEP_FIELDS)
    assert len(lines) == 4


def test_cli_config_file_with_flag_override(tmp_path, capsys):
    config = tmp_path / "exp.json"
    config.write_text(json.dumps(grid_cfg(trials=99).to_dict()))
    code = main(["sweep", "--config", str(config), "--trials", "2"])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == ",".join(SWEEP_FIELDS)
    row = dict(zip(SWEEP_FIELDS, out[1].split(",")))
    assert row["trials"] == "2", "command-line flag wins over the file"
    assert row["success_rate"] == "1.0"


def test_cli_rejects_unknown_config_key(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"env": "grid", "mystery": 1}))
    with pytest.raises(SystemExit, match="bad configuration"):
        main(["sweep", "--config", str(config)])


def test_cli_rejects_unreadable_config(tmp_path):
    config = tmp_path / "broken.json"
    config.write_text("{not json")
    with pytest.raises(SystemExit, match="cannot read config"):
        main(["sweep", "--config", str(config)])


def test_cli_gen_data_requires_out():
    with pytest.raises(SystemExit, match="requires --out"):
        main(["gen-data", "--count", "1"])


def test_cli_gen_data_writes_dataset(tmp_path, capsys):
    out = tmp_path / "data.tsv"
    code = main([
        "gen-data", "--count", "2", "--scramble-len", "3",
        "--seed", "7", "--out", str(out),
    ])
    assert code == 0
    assert "wrote 8 records" in capsys.readouterr().out
    assert len(read_dataset(out)) == 8


def test_cli_table4_csv(tmp_path, capsys):
    out = tmp_path / "t4.csv"
    code = main([
        "table4", "--trials", "2", "--budget", "30", "--grid-m", "2",
        "--grid-n", "3", "--k", "2", "--c3", "3", "--sigmas", "0.0",
        "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "sigma,method,success_rate,trials,seed"
    assert len(lines) == 4


def test_cli_ksweep_requires_ks():
    with pytest.raises(SystemExit):
        main(["ksweep", "--env", "grid"])


def test_cli_analyze_monotonicity_stdout(corpus_file, capsys):
    code = main([
        "analyze", "monotonicity", "--corpus", corpus_file,
        "--sigma", "0.0", "--steps", "1",
    ])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "step,decrease_probability,comparisons,expected_gaussian"
    assert out[1].startswith("1,0.0,")


def test_cli_serve_check(tmp_path, capsys):
    stub = tmp_path / "hello_stub.py"
    stub.write_text(HELLO_STUB)
    code = main([
        "serve-check", "--env", "grid",
        "--bridge-cmd", f"{sys.executable} {stub} ok",
        "--probe-state", "0,0",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "handshake ok" in out
    assert "probe value('0,0') = -1.5" in out


def test_cli_serve_check_rejection(tmp_path, capsys):
    stub = tmp_path / "hello_stub.py"
    stub.write_text(HELLO_STUB)
    code = main([
        "serve-check", "--env", "grid",
        "--bridge-cmd", f"{sys.executable} {stub} reject",
    ])
    assert code == 1
    assert "handshake failed" in capsys.readouterr().err


def test_cli_serve_check_requires_target():
    with pytest.raises(SystemExit, match="serve-check requires"):
        main(["serve-check", "--env", "grid"])
