"""Static SVG renderings of run results.

Every figure is a pure function of the series passed in; the SVG writer is
pinned (fixed hash salt, no date metadata) so re-rendering identical data
produces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .domain import AQ_LABELS, EMITTED_POLLUTANTS, POLLUTANT_ORDER

matplotlib.rcParams["svg.hashsalt"] = "plumegame"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path: str | Path) -> None:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def _index_axis(ax) -> None:
    ax.set_yticks(range(1, 6))
    ax.set_yticklabels([f"{i} {AQ_LABELS[i]}" for i in range(1, 6)], fontsize=8)
    ax.set_ylim(0.5, 5.5)


def plot_aq_series(hours: np.ndarray, aq_index: np.ndarray, predicted: np.ndarray | None,
                   path: str | Path, title: str = "Air quality index") -> None:
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.step(hours, aq_index, where="post", lw=0.9, label="index")
    if predicted is not None:
        ax.step(hours, predicted, where="post", lw=0.7, alpha=0.6, label="forecast")
        ax.legend(loc="upper right", fontsize=8)
    _index_axis(ax)
    ax.set_xlabel("hour")
    ax.set_title(title, fontsize=10)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _finish(fig, path)


def plot_concentrations(hours: np.ndarray, concentrations: np.ndarray,
                        goals: dict[str, float], path: str | Path,
                        title: str = "Mean concentrations") -> None:
    """One panel per pollutant (columns in POLLUTANT_ORDER) with its goal line."""
    fig, axes = plt.subplots(len(POLLUTANT_ORDER), 1, figsize=(8, 9), sharex=True)
    for ax, (column, pollutant) in zip(axes, enumerate(POLLUTANT_ORDER)):
        ax.plot(hours, concentrations[:, column], lw=0.8)
        goal = goals.get(pollutant.value)
        if goal is not None:
            ax.axhline(goal, color="tab:red", lw=0.8, ls="--", label=f"goal {goal:g}")
            ax.legend(loc="upper right", fontsize=8)
        ax.set_ylabel(f"{pollutant.value}\nug/m3", fontsize=8)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("hour")
    axes[0].set_title(title, fontsize=10)
    fig.tight_layout()
    _finish(fig, path)


def plot_cooperation(hours: np.ndarray, coop_all: np.ndarray, coop_by: np.ndarray,
                     path: str | Path, title: str = "Proportion of cooperating agents") -> None:
    fig, ax = plt.subplots(figsize=(8, 3.6))
    ax.plot(hours, coop_all, lw=1.4, color="black", label="all agents")
    for i, pollutant in enumerate(EMITTED_POLLUTANTS):
        ax.plot(hours, coop_by[:, i], lw=0.8, alpha=0.8, label=pollutant.value)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("hour")
    ax.set_ylabel("cooperating proportion")
    ax.set_title(title, fontsize=10)
    ax.legend(loc="lower right", fontsize=8, ncol=3)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _finish(fig, path)


def plot_strategy_comparison(series: dict[str, tuple[np.ndarray, np.ndarray]],
                             histograms: dict[str, np.ndarray], path: str | Path) -> None:
    """Index-over-time overlay plus the occurrence histogram per strategy."""
    fig, (ax_time, ax_hist) = plt.subplots(1, 2, figsize=(11, 3.6), width_ratios=[3, 2])
    for name in sorted(series):
        hours, aq = series[name]
        ax_time.step(hours, aq, where="post", lw=0.9, label=name)
    _index_axis(ax_time)
    ax_time.set_xlabel("hour")
    ax_time.set_title("Air quality index by strategy", fontsize=10)
    ax_time.legend(fontsize=8)
    ax_time.grid(alpha=0.3)

    names = sorted(histograms)
    width = 0.8 / max(len(names), 1)
    centres = np.arange(1, 6)
    for k, name in enumerate(names):
        counts = histograms[name]
        ax_hist.bar(centres + (k - (len(names) - 1) / 2) * width, counts, width=width, label=name)
    ax_hist.set_xticks(centres)
    ax_hist.set_xlabel("air quality index")
    ax_hist.set_ylabel("occurrences")
    ax_hist.set_title("Index occurrences", fontsize=10)
    ax_hist.legend(fontsize=7)
    fig.tight_layout()
    _finish(fig, path)
