"""Render domain-shift penalty tables (Markdown, CSV) and prediction traces (SVG)."""

from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np

from .metrics import DomainShiftPenalty, EvalResult

CSV_FIELDS = ["lighting", "sensor", "d_rmse", "d_rmse_pct", "d_eva", "d_eva_pct"]


def _signed(v, digits, suffix=""):
    if v is None:
        return "n/a"
    return f"{v:+.{digits}f}{suffix}"


def penalty_markdown(rows: Sequence[DomainShiftPenalty]) -> str:
    lines = [
        "| Lighting | Sensor | RMSE | EVA |",
        "|---|---|---:|---:|",
    ]
    for r in rows:
        rmse_cell = f"{_signed(r.d_rmse, 2)} ({_signed(r.d_rmse_pct, 1, '%')})"
        eva_cell = f"{_signed(r.d_eva, 2)} ({_signed(r.d_eva_pct, 1, '%')})"
        lines.append(f"| {r.lighting} | {r.sensor} | {rmse_cell} | {eva_cell} |")
    return "\n".join(lines) + "\n"


def penalty_csv(rows: Sequence[DomainShiftPenalty]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(["" if getattr(r, f) is None else getattr(r, f) for f in CSV_FIELDS])
    return buf.getvalue()


def trace_svg(results: Sequence[EvalResult]) -> str:
    """Ground truth vs prediction over time, one panel per result carrying a series."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with_series = [r for r in results if r.series]
    n = max(len(with_series), 1)
    plt.rcParams["svg.hashsalt"] = "evgap"
    fig, axes = plt.subplots(n, 1, figsize=(8, 2.4 * n), squeeze=False)
    for ax, r in zip(axes[:, 0], with_series):
        y = np.asarray(r.series["y"])
        y_hat = np.asarray(r.series["y_hat"])
        if "t" in r.series:
            x = (np.asarray(r.series["t"]) - r.series["t"][0]) / 1e6
            ax.set_xlabel("time (s)")
        else:
            x = np.arange(len(y))
            ax.set_xlabel("sample")
        ax.plot(x, y, lw=1.0, label="ground truth")
        ax.plot(x, y_hat, lw=1.0, label="prediction")
        ax.set_ylabel("steering (deg)")
        ax.set_title(f"{r.sensor} / {r.lighting} test / {r.train_bias} train "
                     f"(RMSE {r.rmse:.2f})", fontsize=9)
        ax.legend(fontsize=7, loc="upper right")
    if not with_series:
        axes[0, 0].text(0.5, 0.5, "no prediction series", ha="center")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
