import pytest

from model_bridge import Record, group_trajectories, read_records


def write(tmp_path, text):
    path = tmp_path / "data.tsv"
    path.write_text(text, encoding="utf-8")
    return path


def test_read_records_parses_fields(tmp_path):
    path = write(tmp_path, "0\t0\tsA\tup\t-2\n0\t1\tsB\tup\t-1\n0\t2\tsC\t\t0\n")
    records = read_records(path)
    assert records == [
        Record(0, 0, "sA", "up", -2),
        Record(0, 1, "sB", "up", -1),
        Record(0, 2, "sC", None, 0),
    ]


def test_read_records_skips_blank_lines(tmp_path):
    path = write(tmp_path, "0\t0\ts\t\t0\n\n")
    assert len(read_records(path)) == 1


def test_read_records_rejects_wrong_field_count_with_line_number(tmp_path):
    path = write(tmp_path, "0\t0\tsA\tup\t-1\n0\t1\tsB\t0\n")
    with pytest.raises(ValueError, match="line 2"):
        read_records(path)


def test_read_records_rejects_non_integer_fields_with_line_number(tmp_path):
    path = write(tmp_path, "0\tzero\tsA\tup\t-1\n")
    with pytest.raises(ValueError, match="line 1"):
        read_records(path)


def test_group_trajectories_orders_by_id_and_step():
    records = [
        Record(5, 1, "b", "x", -1),
        Record(5, 0, "a", "x", -2),
        Record(5, 2, "c", None, 0),
        Record(2, 0, "p", None, 0),
    ]
    groups = group_trajectories(records)
    assert [g[0].traj_id for g in groups] == [2, 5]
    assert [r.state for r in groups[1]] == ["a", "b", "c"]


def test_group_trajectories_rejects_non_contiguous_steps():
    records = [Record(3, 0, "a", "x", -1), Record(3, 2, "b", None, 0)]
    with pytest.raises(ValueError, match="trajectory 3: non-contiguous step 2"):
        group_trajectories(records)


def test_group_trajectories_rejects_action_on_final_record():
    records = [Record(0, 0, "a", "x", -1), Record(0, 1, "b", "x", 0)]
    with pytest.raises(ValueError, match="final record has an action"):
        group_trajectories(records)
