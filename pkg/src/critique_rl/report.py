"""Curves and a summary table from training metrics CSVs."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .training import METRIC_COLUMNS  # noqa: E402

REQUIRED_COLUMNS = ("step", "outcome_accuracy", "mean_similarity_f1", "metarm_mae_vs_oracle")
SUMMARY_COLUMNS = tuple(c for c in METRIC_COLUMNS if c != "step")
PLOTS = (
    ("mean_similarity_f1", "similarity.png", "critique F1 vs gold"),
    ("outcome_accuracy", "outcome_accuracy.png", "outcome accuracy"),
    ("metarm_mae_vs_oracle", "metarm_mae.png", "MetaRM MAE vs oracle reward"),
)


class ReportError(ValueError):
    pass


def read_metrics(path) -> dict:
    """Column name -> list of floats (NaN for blank cells)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ReportError(f"{path}: empty file, expected a header row") from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ReportError(f"{path}: missing column(s): {', '.join(missing)}")
        cols = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(float(v) if v != "" else math.nan)
    return cols


def _mean(values):
    vals = [v for v in values if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else None


def _label(path: Path) -> str:
    return path.parent.name if path.name == "metrics.csv" else path.stem


def emit_report(metrics_files, out_dir) -> list[Path]:
    """Write one PNG per tracked metric plus ``summary.csv``.

    ``metrics_files`` is a ``{label: path}`` mapping or a list of paths (the
    label is then the containing directory of a ``metrics.csv``, else the
    file stem). Returns the written paths.
    """
    if isinstance(metrics_files, dict):
        runs = {str(k): Path(v) for k, v in metrics_files.items()}
    else:
        runs = {_label(Path(p)): Path(p) for p in metrics_files}
    data = {label: read_metrics(p) for label, p in runs.items()}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    for column, filename, title in PLOTS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, cols in data.items():
            if cols["step"]:
                ax.plot(cols["step"], cols[column], label=label)
        ax.set_xlabel("step")
        ax.set_ylabel(column)
        ax.set_title(title)
        if any(cols["step"] for cols in data.values()):
            ax.legend()
        path = out / filename
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
        written.append(path)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("regime", "n_steps") + SUMMARY_COLUMNS)
    for label, cols in data.items():
        n = len(cols["step"])
        if n == 0:
            continue
        means = [_mean(cols.get(c, [])) for c in SUMMARY_COLUMNS]
        writer.writerow([label, n] + ["" if m is None else repr(m) for m in means])
    path = out / "summary.csv"
    path.write_text(buf.getvalue(), encoding="utf-8")
    written.append(path)
    return written
