import json

import pytest

from streamplan.metrics import (
    RunRecord,
    read_records_csv,
    summarize,
    summarize_condition,
    wait_reduction,
    write_records_csv,
    write_table,
    write_table_csv,
)
from streamplan.neuroplanner import PlanningOutcome
from streamplan.pddl import Plan
from streamplan.plotting import plot_plan_lengths, plot_planning_times, plot_wait_comparison
from tables import MACRO_ROW, macro_row_log


def test_single_record_has_zero_std():
    s = summarize_condition("c", [RunRecord("c", "valid", 4, 2.5, 0.3)])
    assert (s.t_std, s.ttfa_std, s.validity_pct, s.mean_steps) == (0.0, 0.0, 100.0, 4)


def test_empty_condition_rejected():
    with pytest.raises(ValueError):
        summarize_condition("c", [])


def test_published_row_reproduced():
    r = summarize(macro_row_log())["MACRO"].rounded()
    assert r["validity_pct"] == 95.5
    assert r["mean_steps"] == 10.953
    assert r["t_avg"] == 8.99 and r["t_std"] == 4.77 and r["t_max"] == MACRO_ROW["t_max"]


def test_groups_keep_order():
    recs = [RunRecord("b", "valid", 1, 1.0), RunRecord("a", "invalid", None, 2.0), RunRecord("b", "valid", 3, 3.0)]
    s = summarize(recs)
    assert list(s) == ["b", "a"]
    assert s["b"].mean_steps == 2 and s["a"].mean_steps is None and s["a"].validity_pct == 0.0


def test_wait_reduction():
    stream = [RunRecord("s", "valid", 8, 1.0, 0.1), RunRecord("s", "valid", 8, 1.2, 0.1)]
    e2e = [RunRecord("e", "valid", 8, 0.8), RunRecord("e", "valid", 8, 1.2)]
    c = wait_reduction(stream, e2e)
    assert c.reduction == pytest.approx(0.9)
    assert c.streaming_wait_std == 0 and c.std_reduction == 1.0


def test_wait_reduction_needs_first_actions():
    with pytest.raises(ValueError):
        wait_reduction([RunRecord("s", "invalid", None, 1.0)], [RunRecord("e", "valid", 1, 1.0)])


def test_from_outcome():
    out = PlanningOutcome("truncated", Plan(), None, 0.4)
    r = RunRecord.from_outcome("x", out)
    assert r.plan_length is None and not r.valid


def test_csv_roundtrip(tmp_path):
    recs = [RunRecord("a", "valid", 3, 0.123456, 0.01), RunRecord("a", "invalid", None, 1.5, None)]
    assert read_records_csv(write_records_csv(recs, tmp_path / "r.csv")) == recs


def test_table_files(tmp_path):
    recs = macro_row_log()
    s = summarize(recs)
    comp = wait_reduction([RunRecord("s", "valid", 1, 1.0, 0.5)], [RunRecord("e", "valid", 1, 1.0)])
    doc = json.loads(write_table(s, tmp_path / "t.json", comp).read_text())
    assert doc["conditions"][0]["mean_steps"] == 10.953
    assert doc["wait_comparison"]["reduction"] == pytest.approx(0.5)
    lines = write_table_csv(s, tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("condition,runs,validity_pct") and "95.5" in lines[1]


def test_plots_are_written(tmp_path):
    recs = macro_row_log() + [RunRecord("NO-MACRO", "valid", 20, 12.0)]
    stream = [RunRecord("s", "valid", 8, 1.0, 0.1)] * 3
    for path in (plot_planning_times(recs, tmp_path / "a.png"),
                 plot_plan_lengths(recs, tmp_path / "b.png"),
                 plot_wait_comparison(stream, recs, tmp_path / "c.png")):
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
