"""Figure rendering for evaluation reports and tuning traces.

Uses the Agg backend so rendering works headless; every function writes a
file and returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvaluationReport
from .tuning import TuneResult


def _finite_or(value: float, fallback: float) -> float:
    return float(value) if np.isfinite(value) else fallback


def render_npar10_heatmap(reports: list[EvaluationReport], path) -> str:
    """Selector-by-scenario heatmap of normalized penalized runtimes."""
    scenarios = sorted({r.scenario for r in reports})
    selectors = sorted({r.selector for r in reports})
    grid = np.full((len(selectors), len(scenarios)), np.nan)
    for r in reports:
        grid[selectors.index(r.selector), scenarios.index(r.scenario)] = r.npar10
    shown = np.where(np.isfinite(grid), grid, np.nan)
    fig, ax = plt.subplots(
        figsize=(2.0 + 1.1 * len(scenarios), 1.5 + 0.5 * len(selectors))
    )
    image = ax.imshow(shown, cmap="viridis_r", aspect="auto")
    ax.set_xticks(range(len(scenarios)), scenarios, rotation=45, ha="right")
    ax.set_yticks(range(len(selectors)), selectors)
    for i in range(len(selectors)):
        for j in range(len(scenarios)):
            value = grid[i, j]
            text = "inf" if np.isinf(value) else ("-" if np.isnan(value) else f"{value:.3f}")
            ax.text(j, i, text, ha="center", va="center", fontsize=8, color="white")
    fig.colorbar(image, ax=ax, label="nPAR10")
    ax.set_title("nPAR10 (0 = oracle, 1 = single best)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_fold_bars(report: EvaluationReport, path) -> str:
    """Per-fold PAR10 of the selector next to the oracle and single best."""
    folds = [f for f in report.folds if not f.failed]
    positions = np.arange(len(folds))
    width = 0.27
    cap = 1.0
    for f in folds:
        cap = max(cap, _finite_or(f.par10_model, 0.0), f.par10_sbs, f.par10_vbs)
    fig, ax = plt.subplots(figsize=(1.8 + 0.8 * max(len(folds), 1), 4.0))
    ax.bar(positions - width, [f.par10_vbs for f in folds], width, label="oracle")
    ax.bar(positions, [_finite_or(f.par10_model, cap) for f in folds], width, label=report.selector)
    ax.bar(positions + width, [f.par10_sbs for f in folds], width, label="single best")
    ax.set_xticks(positions, [str(f.fold) for f in folds])
    ax.set_xlabel("fold")
    ax.set_ylabel("PAR10")
    ax.set_title(f"{report.scenario}: per-fold PAR10")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_tune_trace(result: TuneResult, path) -> str:
    """Validation score of each candidate plus the running best."""
    scores = np.array([score for _, score in result.trace], dtype=float)
    steps = np.arange(1, scores.size + 1)
    finite = np.isfinite(scores)
    shown = np.where(finite, scores, np.nan)
    running = np.array([np.nanmin(shown[: i + 1]) for i in range(scores.size)])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(steps[finite], scores[finite], "o", alpha=0.6, label="candidate")
    ax.plot(steps, running, "-", color="tab:red", label="best so far")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("validation PAR10")
    ax.set_title(f"surrogate loss tuning (best: {result.best})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
