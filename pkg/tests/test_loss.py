"""Loss kernel tests: deviance, gradient, weighted quantiles, node estimates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costboost.loss import (
    QuantileLossSpec,
    deviance,
    initial_value,
    negative_gradient,
    terminal_node_estimate,
    weighted_quantile,
)


def brute_deviance(y, f, w, alpha):
    """Direct per-row evaluation of the weighted asymmetric absolute loss."""
    total = 0.0
    for yi, fi, wi in zip(y, f, w):
        if yi > fi:
            total += alpha * wi * abs(yi - fi)
        else:
            total += (1.0 - alpha) * wi * abs(yi - fi)
    return total / sum(w)


def node_loss(residuals, w, rho, alpha):
    """Unnormalized weighted pinball loss of (fit + rho) within one node."""
    total = 0.0
    for r, wi in zip(residuals, w):
        d = r - rho
        total += alpha * wi * d if d > 0 else (1.0 - alpha) * wi * (-d)
    return total


def brute_weighted_quantile(values, weights, alpha):
    """Independent inverse-CDF scan: smallest value whose cumulative weight
    reaches alpha * total."""
    pairs = sorted(zip(values, weights), key=lambda p: p[0])
    target = alpha * sum(w for _, w in pairs)
    acc = 0.0
    for v, w in pairs:
        acc += w
        if acc >= target:
            return v
    return pairs[-1][0]


class TestQuantileLossSpec:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_rejects_degenerate_alpha(self, alpha):
        with pytest.raises(ValueError):
            QuantileLossSpec(alpha)

    def test_accepts_interior(self):
        assert QuantileLossSpec(0.75).alpha == 0.75


class TestDeviance:
    def test_single_underestimate(self):
        assert deviance([10.0], [4.0], [1.0], QuantileLossSpec(0.75)) == 0.75 * 6

    def test_symmetric_half_mae(self):
        got = deviance([0.0, 10.0], [5.0, 5.0], [1.0, 1.0], QuantileLossSpec(0.5))
        assert got == 2.5

    def test_weighted_asymmetric(self):
        # hand value cross-checked against the brute-force evaluation
        y, f, w = [2.0, 4.0, 9.0], [3.0, 3.0, 3.0], [1.0, 2.0, 1.0]
        got = deviance(y, f, w, QuantileLossSpec(0.9))
        assert got == pytest.approx(1.825, abs=1e-12)
        assert got == pytest.approx(brute_deviance(y, f, w, 0.9), rel=1e-12)

    def test_ties_contribute_zero(self):
        assert deviance([3.0, 3.0], [3.0, 3.0], [1.0, 5.0], QuantileLossSpec(0.9)) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            deviance([1.0, 2.0], [1.0], [1.0, 1.0], QuantileLossSpec(0.5))

    def test_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            deviance([float("inf")], [1.0], [1.0], QuantileLossSpec(0.5))

    @given(
        st.lists(
            st.tuples(
                st.floats(-1e6, 1e6),
                st.floats(-1e6, 1e6),
                st.floats(0.01, 100.0),
            ),
            min_size=1,
            max_size=50,
        )
    )
    def test_alpha_half_is_half_weighted_mae(self, rows):
        y, f, w = (np.array(col) for col in zip(*rows))
        got = deviance(y, f, w, QuantileLossSpec(0.5))
        expected = 0.5 * np.average(np.abs(y - f), weights=w)
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-300)


class TestNegativeGradient:
    def test_underestimate_branch(self):
        assert negative_gradient(10.0, 5.0, 1.0, QuantileLossSpec(0.75)) == 0.75

    def test_tie_takes_overestimate_branch(self):
        assert negative_gradient(5.0, 5.0, 1.0, QuantileLossSpec(0.75)) == -0.25

    def test_weight_scaling(self):
        assert negative_gradient(1.0, 5.0, 2.0, QuantileLossSpec(0.5)) == -1.0

    def test_vectorized(self):
        spec = QuantileLossSpec(0.6)
        z = negative_gradient(
            np.array([1.0, 5.0]), np.array([3.0, 3.0]), np.array([1.0, 2.0]), spec
        )
        assert np.array_equal(z, [-0.4 * 1.0, 0.6 * 2.0])

    def test_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            negative_gradient(float("nan"), 1.0, 1.0, QuantileLossSpec(0.5))

    def test_matches_finite_differences(self):
        # the loss term is piecewise linear, so a one-sided difference that
        # stays on one side of y recovers the derivative almost exactly
        rng = np.random.default_rng(42)
        spec_grid = [0.1, 0.25, 0.5, 0.75, 0.9]
        step = 1e-6
        for _ in range(200):
            alpha = float(rng.choice(spec_grid))
            spec = QuantileLossSpec(alpha)
            y = float(rng.uniform(-5, 5))
            f = float(rng.uniform(-5, 5))
            if abs(y - f) < 1e-3:
                continue
            w = float(rng.uniform(0.1, 3.0))

            def term(fv):
                d = y - fv
                return alpha * w * d if d > 0 else (1.0 - alpha) * w * (-d)

            fd = (term(f + step) - term(f)) / step
            assert negative_gradient(y, f, w, spec) == pytest.approx(-fd, abs=1e-8)


class TestWeightedQuantile:
    def test_unit_weight_median(self):
        assert weighted_quantile([0, 3, 5, 6, 15], [1, 1, 1, 1, 1], 0.5) == 5

    def test_population_weighted_median(self):
        # tripling the weight of 15 behaves like replicating it three times
        assert weighted_quantile([0, 3, 5, 6, 15], [1, 1, 1, 1, 3], 0.5) == 6

    def test_singleton(self):
        assert weighted_quantile([7.5], [10.0], 0.123) == 7.5

    def test_unit_weights_are_order_statistics(self):
        values = np.arange(1.0, 101.0)
        w = np.ones(100)
        assert weighted_quantile(values, w, 0.75) == 75
        assert weighted_quantile(values, w, 0.75) == brute_weighted_quantile(values, w, 0.75)

    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            weighted_quantile([], [], 0.5)

    def test_rejects_degenerate_alpha(self):
        with pytest.raises(ValueError):
            weighted_quantile([1.0], [1.0], 1.0)

    @given(
        st.lists(
            st.tuples(st.floats(-1e6, 1e6), st.integers(1, 5)),
            min_size=1,
            max_size=20,
        ),
        st.sampled_from([round(0.05 * k, 2) for k in range(1, 20)]),
    )
    def test_integer_weights_equal_replication(self, pairs, alpha):
        values = np.array([v for v, _ in pairs])
        weights = np.array([float(k) for _, k in pairs])
        replicated = np.array([v for v, k in pairs for _ in range(k)])
        got = weighted_quantile(values, weights, alpha)
        expected = weighted_quantile(replicated, np.ones(replicated.size), alpha)
        assert got == expected

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=30, unique=True),
        st.sampled_from([0.1, 0.3, 0.5, 0.62, 0.75, 0.9]),
    )
    def test_underestimate_count(self, values, alpha):
        # with unit weights and no ties, exactly N - ceil(alpha * N) values
        # sit strictly above the returned quantile
        values = np.array(values)
        n = values.size
        q = weighted_quantile(values, np.ones(n), alpha)
        above = int(np.sum(values > q))
        assert above == n - math.ceil(alpha * n)

    def test_matches_brute_force_on_random_input(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = int(rng.integers(1, 25))
            values = rng.normal(size=n) * 10
            weights = rng.uniform(0.1, 4.0, size=n)
            alpha = float(rng.uniform(0.05, 0.95))
            assert weighted_quantile(values, weights, alpha) == brute_weighted_quantile(
                values, weights, alpha
            )


class TestInitialValue:
    def test_median(self):
        assert initial_value([4, 12, 27], [1, 1, 1], QuantileLossSpec(0.5)) == 12

    def test_extreme_alpha_picks_top_order_statistic(self):
        # cumulative weight 3 * (10/11) = 2.727 is first reached at the
        # third order statistic
        assert initial_value([4, 12, 27], [1, 1, 1], QuantileLossSpec(10 / 11)) == 27

    def test_constant_response(self):
        assert initial_value([7, 7, 7, 7], [2, 1, 1, 9], QuantileLossSpec(0.31)) == 7

    def test_empty(self):
        with pytest.raises(ValueError, match="empty response"):
            initial_value([], [], QuantileLossSpec(0.5))


class TestTerminalNodeEstimate:
    def test_toy_median(self):
        got = terminal_node_estimate([0, 3, 5, 6, 15], [1, 1, 1, 1, 1], QuantileLossSpec(0.5))
        assert got == 5

    def test_grid_search_oracle(self):
        residuals = [-2.0, -1.0, 4.0]
        w = [1.0, 1.0, 1.0]
        alpha = 2 / 3
        got = terminal_node_estimate(residuals, w, QuantileLossSpec(alpha))
        assert got == -1.0
        grid = np.arange(-2.0, 4.0 + 1e-9, 1e-3)
        losses = [node_loss(residuals, w, rho, alpha) for rho in grid]
        assert node_loss(residuals, w, got, alpha) <= min(losses) + 1e-12

    def test_degenerate_node(self):
        got = terminal_node_estimate([3.5] * 6, [1.0] * 6, QuantileLossSpec(0.8))
        assert got == 3.5
        assert node_loss([3.5] * 6, [1.0] * 6, got, 0.8) == 0.0

    def test_empty(self):
        with pytest.raises(ValueError, match="empty node"):
            terminal_node_estimate([], [], QuantileLossSpec(0.5))

    @settings(max_examples=200)
    @given(
        st.lists(
            st.tuples(st.floats(-100, 100), st.floats(0.01, 10.0)),
            min_size=1,
            max_size=12,
        ),
        st.sampled_from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
    )
    def test_minimizes_node_loss(self, pairs, alpha):
        # a pinball minimizer always sits on a data point, so scanning the
        # residual values themselves is an exhaustive search
        residuals = np.array([r for r, _ in pairs])
        w = np.array([wi for _, wi in pairs])
        got = terminal_node_estimate(residuals, w, QuantileLossSpec(alpha))
        best = min(node_loss(residuals, w, rho, alpha) for rho in residuals)
        scale = max(1.0, abs(best))
        assert node_loss(residuals, w, got, alpha) <= best + 1e-12 * scale
