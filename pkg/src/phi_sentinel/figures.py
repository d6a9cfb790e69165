"""Matplotlib rendering of evaluation and attribution summaries to image
files, written alongside the delimited/JSON outputs of the CLI report paths.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import METRIC_NAMES
from .pipeline import DETECTORS, CrossValResult

__all__ = ["save_fold_metric_bars", "save_metric_summary", "save_importance_bars",
           "save_probability_bars"]

_COLORS = {"regex": "#d95f02", "ml": "#1b9e77", "ensemble": "#7570b3"}


def save_fold_metric_bars(result: CrossValResult, path) -> Path:
    """Per-fold AUROC and AUPRC bars for each detector."""
    path = Path(path)
    folds = result.folds
    x = np.arange(folds)
    width = 0.27
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, metric in zip(axes, ("auroc", "auprc")):
        for j, detector in enumerate(DETECTORS):
            vals = [getattr(ms, metric) for ms in result.metrics[detector]]
            ax.bar(x + (j - 1) * width, vals, width, label=detector,
                   color=_COLORS[detector])
        ax.set_xticks(x)
        ax.set_xticklabels([f"fold {i + 1}" for i in range(folds)])
        ax.set_ylim(0, 1.05)
        ax.set_title(metric.upper())
    axes[0].legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_metric_summary(result: CrossValResult, path) -> Path:
    """Cross-fold mean bars with standard-deviation error bars, all metrics."""
    path = Path(path)
    x = np.arange(len(METRIC_NAMES))
    width = 0.27
    fig, ax = plt.subplots(figsize=(10, 4))
    for j, detector in enumerate(DETECTORS):
        means = [result.summary[detector][m][0] for m in METRIC_NAMES]
        stds = [result.summary[detector][m][1] for m in METRIC_NAMES]
        ax.bar(x + (j - 1) * width, means, width, yerr=stds, capsize=3,
               label=detector, color=_COLORS[detector])
    ax.set_xticks(x)
    ax.set_xticklabels(METRIC_NAMES, rotation=30, ha="right")
    ax.set_ylim(0, 1.1)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_importance_bars(report, path, top_k: int = 20) -> Path:
    """Horizontal top-k importance bars with cross-fold error bars."""
    path = Path(path)
    top = report.top[:top_k]
    names = [name for _, name, _, _ in top][::-1]
    vals = [imp for _, _, imp, _ in top][::-1]
    errs = [std for _, _, _, std in top][::-1]
    fig, ax = plt.subplots(figsize=(7, max(3, 0.3 * len(top) + 1)))
    ax.barh(np.arange(len(top)), vals, xerr=errs, capsize=2, color="#1b9e77")
    ax.set_yticks(np.arange(len(top)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("normalized importance")
    ax.set_xlim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_probability_bars(verdicts, path, max_columns: int = 40) -> Path:
    """Final probabilities of the highest-scoring scanned columns."""
    path = Path(path)
    ranked = sorted(verdicts, key=lambda v: -v.prob_final)[:max_columns]
    names = [v.column_name for v in ranked][::-1]
    vals = [v.prob_final for v in ranked][::-1]
    colors = ["#d62728" if v.predicted else "#7f7f7f" for v in ranked][::-1]
    fig, ax = plt.subplots(figsize=(7, max(3, 0.25 * len(ranked) + 1)))
    ax.barh(np.arange(len(ranked)), vals, color=colors)
    ax.set_yticks(np.arange(len(ranked)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlabel("final PHI probability")
    ax.set_xlim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
