"""Synthetic benchmark with analytically known conditional quantiles.

The response follows ``y = g(x1) + s(x2) * eps`` with a piecewise-linear
trend g, a positive heteroscedastic scale ``s(x2) = 1 + scale_slope * x2``,
and noise drawn by inverse-CDF from a family with a closed-form quantile
function.  Because s is positive, the conditional alpha-quantile is exactly
``g(x1) + s(x2) * Q_eps(alpha)``, which is what the package's estimates are
judged against.  x1 and x2 are uniform on [0, 1]; any further predictors
are pure uniform noise.  Count mode floors the response at zero and rounds
it, giving the right-skewed integer look of field count data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

__all__ = ["SynthSpec", "generate"]

# trend knots: convex, so most rows sit low and a few reach far right,
# the shape of field count data
_TREND_X = np.array([0.0, 0.5, 0.8, 1.0])
_TREND_Y = np.array([0.0, 3.0, 8.0, 20.0])


def _trend(x1: np.ndarray) -> np.ndarray:
    return np.interp(x1, _TREND_X, _TREND_Y)


def _noise_quantile(u, family: str, scale: float, tail_shape: float):
    """Closed-form quantile function of the noise family at probability u."""
    u = np.asarray(u, dtype=float)
    if family == "lomax":
        # heavy right tail, support [0, inf)
        q = scale * ((1.0 - u) ** (-1.0 / tail_shape) - 1.0)
    elif family == "laplace":
        # symmetric around zero
        q = np.where(
            u < 0.5,
            scale * np.log(2.0 * u),
            -scale * np.log(2.0 * (1.0 - u)),
        )
    else:
        raise ValueError(f"unknown noise family {family!r}")
    return q if q.ndim else float(q)


@dataclass(frozen=True)
class SynthSpec:
    """Shape of one synthetic draw.  Identical specs generate identical data."""

    n_rows: int
    seed: int
    n_predictors: int = 3
    noise: str = "lomax"
    noise_scale: float = 0.25
    tail_shape: float = 2.5
    scale_slope: float = 2.0
    count_mode: bool = False
    id_prefix: str = "s"

    def __post_init__(self) -> None:
        if self.n_rows < 1:
            raise ValueError(f"n_rows must be >= 1, got {self.n_rows}")
        if self.n_predictors < 3:
            raise ValueError(f"need >= 3 predictors (x1, x2 and noise), got {self.n_predictors}")
        if self.noise not in ("lomax", "laplace"):
            raise ValueError(f"unknown noise family {self.noise!r}")
        if self.noise_scale <= 0.0:
            raise ValueError("noise_scale must be positive")
        if self.tail_shape <= 1.0:
            raise ValueError("tail_shape must exceed 1 (finite mean)")
        if self.scale_slope < 0.0:
            raise ValueError("scale_slope must be >= 0")


def generate(spec: SynthSpec):
    """Draw a Dataset and return it with its conditional-quantile oracle.

    The oracle maps ``(X, alpha)`` to the true conditional alpha-quantile
    for each row of a predictor matrix laid out like the Dataset's.  In
    count mode the oracle applies the same floor-and-round transform as
    the response (quantiles commute with monotone transforms, up to the
    rounding steps).
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(spec.seed)))
    n, p = spec.n_rows, spec.n_predictors
    X = rng.uniform(size=(n, p))
    u = rng.uniform(size=n)
    eps = _noise_quantile(u, spec.noise, spec.noise_scale, spec.tail_shape)
    scale = 1.0 + spec.scale_slope * X[:, 1]
    y = _trend(X[:, 0]) + scale * eps
    if spec.count_mode:
        y = np.maximum(np.rint(y), 0.0)

    data = Dataset(
        predictors=X,
        predictor_names=tuple(f"x{j + 1}" for j in range(p)),
        response=y,
        row_ids=tuple(f"{spec.id_prefix}{i:05d}" for i in range(n)),
    )

    def oracle(X_query: np.ndarray, alpha: float):
        Xq = np.atleast_2d(np.asarray(X_query, dtype=float))
        q_eps = _noise_quantile(alpha, spec.noise, spec.noise_scale, spec.tail_shape)
        q = _trend(Xq[:, 0]) + (1.0 + spec.scale_slope * Xq[:, 1]) * q_eps
        if spec.count_mode:
            q = np.maximum(np.rint(q), 0.0)
        return q if np.asarray(X_query).ndim > 1 else float(q[0])

    return data, oracle
