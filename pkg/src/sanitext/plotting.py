"""Figures rendered next to the JSON report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from sanitext.sanitizer import SanitizationReport  # noqa: E402


def plot_replacements(report: SanitizationReport, path: str | Path, title: str | None = None) -> Path:
    """Bar chart of measured PMI against the threshold for every rewrite."""
    path = Path(path)
    reps = report.replacements
    labels = [" + ".join(r.original) for r in reps]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(reps) + 2), 3.6))
    if reps:
        xs = range(len(reps))
        ax.bar([x - 0.2 for x in xs], [r.pmi for r in reps], width=0.4, label="PMI", color="#c0504d")
        ax.bar([x + 0.2 for x in xs], [r.threshold for r in reps], width=0.4, label="threshold", color="#4f81bd")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
        ax.legend(frameon=False, fontsize=8)
    else:
        ax.text(0.5, 0.5, "no replacements", ha="center", va="center", transform=ax.transAxes)
        ax.set_xticks([])
    ax.set_ylabel("bits")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_ratio_distribution(ratios: list[float], path: str | Path) -> Path:
    """Histogram of greedy/optimal retained-IC ratios."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.hist(ratios, bins=20, range=(0.0, 1.0), color="#4f81bd", edgecolor="white")
    ax.set_xlabel("greedy / optimal retained IC")
    ax.set_ylabel("instances")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
