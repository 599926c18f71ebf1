"""Report figures rendered to image files (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import RunRecord  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "figure.dpi": 120,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_planning_times(records: Iterable[RunRecord], path) -> Path:
    """Box plot of total planning time per condition."""
    groups: dict[str, list[float]] = {}
    for r in records:
        groups.setdefault(r.condition, []).append(r.total_time)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        if groups:
            ax.boxplot(list(groups.values()), tick_labels=list(groups))
        ax.set_ylabel("planning time [s]")
        ax.set_title("Planning times per condition")
        return _save(fig, path)


def plot_wait_comparison(streaming: Iterable[RunRecord], end_to_end: Iterable[RunRecord], path) -> Path:
    """Executor wait before the first action: streamed vs whole-plan."""
    s = [r.time_to_first_action for r in streaming if r.time_to_first_action is not None]
    e = [r.total_time for r in end_to_end]
    with plt.rc_context(STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        left.boxplot([e, s], tick_labels=["end-to-end", "streaming"])
        left.set_ylabel("wait before first action [s]")
        bins = 20
        left_max = max(e + s) if e or s else 1.0
        right.hist(e, bins=bins, range=(0, left_max), alpha=0.6, label="end-to-end")
        right.hist(s, bins=bins, range=(0, left_max), alpha=0.6, label="streaming")
        right.set_xlabel("wait [s]")
        right.set_ylabel("runs")
        right.legend()
        return _save(fig, path)


def plot_plan_lengths(records: Iterable[RunRecord], path) -> Path:
    """Histogram of plan lengths per condition."""
    groups: dict[str, list[int]] = {}
    for r in records:
        if r.plan_length is not None:
            groups.setdefault(r.condition, []).append(r.plan_length)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for name, lengths in groups.items():
            ax.hist(lengths, bins=range(0, max(lengths) + 2), alpha=0.6, label=name)
        ax.set_xlabel("plan length [actions]")
        ax.set_ylabel("problems")
        if groups:
            ax.legend()
        return _save(fig, path)
