"""Report rendering: delimited tables plus matplotlib figures saved next
to them. Figures are file artifacts of the report path only; nothing here
is interactive."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .matching import ComparisonTable, SweepPoint  # noqa: E402


def write_csv(path: str | Path, fieldnames: Sequence[str],
              rows: Sequence[Mapping]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})


def write_sweep_csv(path: str | Path, sweeps: Mapping[str, Sequence[SweepPoint]]) -> None:
    rows = [
        {
            "method": method,
            "threshold": f"{p.threshold:.6g}",
            "argument_coverage": f"{p.argument_coverage:.6f}",
            "sentence_coverage": f"{p.sentence_coverage:.6f}",
        }
        for method in sorted(sweeps)
        for p in sweeps[method]
    ]
    write_csv(path, ["method", "threshold", "argument_coverage",
                     "sentence_coverage"], rows)


def render_sweep_figure(path: str | Path,
                        sweeps: Mapping[str, Sequence[SweepPoint]]) -> None:
    """Coverage-versus-threshold curves, one pair of lines per method."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method in sorted(sweeps):
        points = sweeps[method]
        thresholds = [p.threshold for p in points]
        ax.plot(thresholds, [p.argument_coverage for p in points],
                marker="o", markersize=3, label=f"{method} (arguments)")
        ax.plot(thresholds, [p.sentence_coverage for p in points],
                marker="s", markersize=3, linestyle="--",
                label=f"{method} (sentences)")
    ax.set_xlabel("match threshold")
    ax.set_ylabel("coverage")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_comparison_csv(path: str | Path, table: ComparisonTable) -> None:
    fields = ["method", "kp_count", "matched_arguments", "mean_per_kp_matches",
              "max_per_kp_matches", "argument_coverage", "sentence_coverage",
              "threshold", "scope"]
    write_csv(path, fields, table.rows)


def render_comparison_figure(path: str | Path, table: ComparisonTable) -> None:
    """Per-method key-point counts and coverages as paired bar panels."""
    methods = [r["method"] for r in table.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.5, 3.8))
    ax1.bar(methods, [r["kp_count"] for r in table.rows], color="#4878d0")
    ax1.set_ylabel("key points")
    ax1.set_title("extracted key points")
    x = range(len(methods))
    width = 0.38
    ax2.bar([i - width / 2 for i in x], [r["argument_coverage"] for r in table.rows],
            width=width, label="arguments", color="#4878d0")
    ax2.bar([i + width / 2 for i in x], [r["sentence_coverage"] for r in table.rows],
            width=width, label="sentences", color="#ee854a")
    ax2.set_xticks(list(x))
    ax2.set_xticklabels(methods)
    ax2.set_ylim(0, 1)
    ax2.set_ylabel("coverage")
    ax2.set_title("coverage at threshold")
    ax2.legend(fontsize=8)
    for ax in (ax1, ax2):
        ax.tick_params(axis="x", rotation=20)
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
