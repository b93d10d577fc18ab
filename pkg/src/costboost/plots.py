"""Figure rendering for the report paths.

Every figure has a CSV twin written next to it; the plots exist so a run
directory is reviewable without further tooling.  Rendering uses the Agg
backend and fixed styling so reruns produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_cv_curve_plot", "save_pd_plot", "save_influence_plot"]

_FIGSIZE = (6.4, 4.0)
_DPI = 150


def _save(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_cv_curve_plot(cv_curve: np.ndarray, best_iterations: int, path: str) -> None:
    """Held-out deviance against iteration count, with the minimum marked."""
    iterations = np.arange(1, cv_curve.size + 1)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(iterations, cv_curve, color="tab:blue", lw=1.2)
    ax.axvline(best_iterations, color="tab:red", ls="--", lw=1.0,
               label=f"selected: {best_iterations}")
    ax.set_xlabel("iterations")
    ax.set_ylabel("mean held-out deviance")
    ax.legend(frameon=False)
    _save(fig, path)


def save_pd_plot(predictor: str, grid: np.ndarray, response: np.ndarray,
                 deciles: np.ndarray, path: str) -> None:
    """Partial-dependence profile with training-decile rug marks."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(grid, response, color="tab:blue", lw=1.5)
    span = response.max() - response.min()
    rug_base = response.min() - 0.05 * (span if span > 0 else max(abs(response.min()), 1.0))
    ax.plot(deciles, np.full(deciles.size, rug_base), "|", color="black",
            markersize=9, markeredgewidth=1.0)
    ax.set_xlabel(predictor)
    ax.set_ylabel("partial dependence")
    _save(fig, path)


def save_influence_plot(names, empirical, baseline_mean=None, baseline_sd=None,
                        path: str = "influence.png") -> None:
    """Relative influence bars, with baseline mean +/- sd when available."""
    order = np.argsort(empirical)[::-1]
    names = [names[i] for i in order]
    emp = np.asarray(empirical, dtype=float)[order]
    pos = np.arange(len(names))[::-1]

    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.barh(pos, emp, height=0.6, color="tab:blue", label="empirical")
    if baseline_mean is not None:
        mean = np.asarray(baseline_mean, dtype=float)[order]
        sd = np.zeros_like(mean) if baseline_sd is None \
            else np.asarray(baseline_sd, dtype=float)[order]
        ax.errorbar(mean, pos, xerr=2.0 * sd, fmt="k|", markersize=12,
                    elinewidth=1.0, capsize=3, label="baseline mean ± 2 sd")
    ax.set_yticks(pos)
    ax.set_yticklabels(names)
    ax.set_xlabel("relative influence (%)")
    ax.legend(frameon=False)
    _save(fig, path)
