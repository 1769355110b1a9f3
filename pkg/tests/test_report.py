import csv

import pytest

from critique_rl.report import ReportError, emit_report
from critique_rl.training import METRIC_COLUMNS


def write(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([r.get(c, "") for c in METRIC_COLUMNS])


def test_two_regimes_three_plots_and_summary(tmp_path):
    for name, base in (("online", 0.5), ("outcome", 0.1)):
        rows = [{"step": s, "outcome_accuracy": 0.7, "mean_similarity_f1": base + s / 1000,
                 "metarm_mae_vs_oracle": 0.1 if name == "online" else "", "mean_argument_count": 2}
                for s in range(1, 101)]
        (tmp_path / name).mkdir()
        write(tmp_path / name / "metrics.csv", rows)
    out = emit_report([tmp_path / "online/metrics.csv", tmp_path / "outcome/metrics.csv"], tmp_path / "rep")
    assert sorted(p.name for p in out) == ["metarm_mae.png", "outcome_accuracy.png", "similarity.png", "summary.csv"]
    summary = list(csv.DictReader(open(tmp_path / "rep/summary.csv")))
    assert [r["regime"] for r in summary] == ["online", "outcome"]
    # mean of base + s/1000 over s = 1..100 is base + 0.0505
    assert float(summary[0]["mean_similarity_f1"]) == pytest.approx(0.5505, abs=1e-12)
    assert summary[1]["metarm_mae_vs_oracle"] == ""


def test_header_only(tmp_path):
    write(tmp_path / "m.csv", [])
    emit_report({"empty": tmp_path / "m.csv"}, tmp_path / "rep")
    assert list(csv.reader(open(tmp_path / "rep/summary.csv")))[1:] == []


def test_missing_columns_named(tmp_path):
    (tmp_path / "m.csv").write_text("step,outcome_accuracy\n1,0.5\n")
    with pytest.raises(ReportError, match="mean_similarity_f1"):
        emit_report([tmp_path / "m.csv"], tmp_path / "rep")


def test_deterministic(tmp_path):
    write(tmp_path / "m.csv", [{"step": 1, "outcome_accuracy": 0.5, "mean_similarity_f1": 0.2,
                                "metarm_mae_vs_oracle": 0.3}])
    emit_report([tmp_path / "m.csv"], tmp_path / "a")
    emit_report([tmp_path / "m.csv"], tmp_path / "b")
    for name in ("similarity.png", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
