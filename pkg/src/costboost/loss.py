"""Asymmetrically weighted absolute loss and population-weighted quantiles.

The loss weights underestimates (y above the fit) by ``alpha`` and
overestimates (y at or below the fit) by ``1 - alpha``; a tie y == f sits
on the overestimate branch.  Its pointwise minimizer is the weighted
alpha-quantile, defined through the left-continuous inverse of the
weighted empirical distribution.  All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantileLossSpec",
    "deviance",
    "negative_gradient",
    "weighted_quantile",
    "initial_value",
    "terminal_node_estimate",
]


@dataclass(frozen=True)
class QuantileLossSpec:
    """Asymmetry parameter of the loss.

    ``alpha`` must lie strictly inside (0, 1): the endpoints degenerate the
    empirical quantile to the sample min/max and are rejected rather than
    clamped, so a nonsensical cost model fails loudly.
    """

    alpha: float

    def __post_init__(self) -> None:
        a = self.alpha
        ok = isinstance(a, (int, float)) and np.isfinite(a) and 0.0 < float(a) < 1.0
        if not ok:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {a!r}")


def _check_vectors(*named: tuple) -> list:
    arrays = []
    length = None
    for name, x in named:
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        if length is None:
            length = arr.size
        elif arr.size != length:
            raise ValueError(f"length mismatch: {name} has {arr.size} entries, expected {length}")
        arrays.append(arr)
    if length == 0:
        raise ValueError("empty input")
    return arrays


def deviance(y, f, w, spec: QuantileLossSpec) -> float:
    """Weighted mean asymmetric absolute error of fits ``f`` against ``y``.

    Underestimated rows (y > f) contribute ``alpha * w * |y - f|``,
    overestimated or exact rows contribute ``(1 - alpha) * w * |y - f|``;
    the total is normalized by the weight sum.  Ties contribute zero.
    """
    y, f, w = _check_vectors(("y", y), ("f", f), ("w", w))
    if not (np.isfinite(y).all() and np.isfinite(f).all() and np.isfinite(w).all()):
        raise ValueError("non-finite input")
    d = y - f
    factor = np.where(d > 0.0, spec.alpha, 1.0 - spec.alpha)
    return float(np.sum(w * np.abs(d) * factor) / np.sum(w))


def negative_gradient(y, f, w, spec: QuantileLossSpec):
    """Negative derivative of the per-row loss term at the current fit.

    Returns ``w * alpha`` where y > f and ``-w * (1 - alpha)`` where
    y <= f (ties take the overestimate branch).  Accepts scalars or
    equally shaped arrays and returns the matching shape.
    """
    y_arr = np.asarray(y, dtype=float)
    f_arr = np.asarray(f, dtype=float)
    w_arr = np.asarray(w, dtype=float)
    if not (np.isfinite(y_arr).all() and np.isfinite(f_arr).all() and np.isfinite(w_arr).all()):
        raise ValueError("non-finite input")
    z = np.where(y_arr > f_arr, w_arr * spec.alpha, -w_arr * (1.0 - spec.alpha))
    if z.ndim == 0:
        return float(z)
    return z


def weighted_quantile(values, weights, alpha: float) -> float:
    """Alpha-quantile of a weighted sample via the inverse empirical CDF.

    Sorts value-weight pairs by value (stable) and returns the smallest
    value whose cumulative weight reaches ``alpha`` times the total weight.
    With unit weights this is the order statistic at index ceil(alpha * N);
    with integer weights it equals the unit-weight quantile of the sample
    with each value replicated ``weight`` times.
    """
    if not (0.0 < float(alpha) < 1.0):
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    v, w = _check_vectors(("values", values), ("weights", weights))
    order = np.argsort(v, kind="stable")
    cum_w = np.cumsum(w[order])
    target = alpha * cum_w[-1]
    idx = int(np.searchsorted(cum_w, target, side="left"))
    idx = min(idx, v.size - 1)
    return float(v[order[idx]])


def initial_value(y, w, spec: QuantileLossSpec) -> float:
    """Loss-minimizing constant fit: the weighted alpha-quantile of y."""
    y_arr = np.asarray(y, dtype=float)
    if y_arr.size == 0:
        raise ValueError("empty response")
    return weighted_quantile(y_arr, w, spec.alpha)


def terminal_node_estimate(residuals, w, spec: QuantileLossSpec) -> float:
    """Optimal additive correction for one terminal node.

    The weighted alpha-quantile of the in-node residuals minimizes the
    node's weighted asymmetric absolute loss of ``fit + rho``; a minimizer
    always sits on one of the residual values.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("empty node")
    return weighted_quantile(r, w, spec.alpha)
