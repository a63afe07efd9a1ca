"""Matplotlib renderers for the benchmark artifacts.

Imported lazily by the CLI so that plain library use never pulls in
matplotlib.  The Agg backend is forced before pyplot loads; there is no
display in the environments these figures are rendered in.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .reporting import PlotSeries
from .toy_bench import RunRecord

__all__ = ["render_sweep_figure", "render_run_figure"]


def render_sweep_figure(path, series: Sequence[PlotSeries], d: int, k: int):
    """Log-log cost-versus-step-size plot, one line per (algo, config) cell.

    Cells that never succeeded have no finite cost and simply leave a gap
    in their line.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for s in series:
        ax.plot(s.x, s.y, marker="o", markersize=3.5, linewidth=1.2, label=s.label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("initial step size for the distribution update")
    ax.set_ylabel("expected runtime (iterations)")
    ax.set_title(f"selective squared error, d={d}, k={k}")
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run_figure(path, records: Sequence[RunRecord], title: str):
    """Histogram of hit iterations for one cell, annotated with the rate."""
    hits = [r.hit_iteration for r in records if r.hit_iteration is not None]
    rate = len(hits) / len(records) if records else 0.0

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    if hits:
        ax.hist(hits, bins=min(30, max(5, len(hits) // 3)), color="#3465a4")
        ax.set_xlabel("iterations to reach the target")
    else:
        ax.text(0.5, 0.5, "no successful runs", ha="center", va="center",
                transform=ax.transAxes)
        ax.set_xlabel("iterations")
    ax.set_ylabel("runs")
    ax.set_title(f"{title}  (success rate {rate:.2f}, n={len(records)})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
