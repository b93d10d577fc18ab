"""Regression trees fit to the boosting working response.

Splitting is greedy best-first on the weighted sum of squared error of the
working response z: among all current leaves, the admissible split with
the largest SSE reduction is taken, until the split budget is spent or no
admissible split improves.  Candidate thresholds are midpoints between
consecutive distinct sorted predictor values; both children must keep at
least ``min_node_size`` rows.  Terminal estimates are weighted
alpha-quantiles of the in-node residuals, not of z.

Routing convention, fixed and recorded in the serialized model:
``x[predictor] < threshold`` goes left, equality goes right.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .loss import QuantileLossSpec, terminal_node_estimate

__all__ = ["RegressionTree", "fit_tree", "predict_tree", "route", "leaf_values"]

_NO_PREDICTOR = -1  # predictor index marking a terminal node


@dataclass
class RegressionTree:
    """Flat node arena; root is node 0.

    Terminal nodes have ``predictor == -1`` and carry ``rho``; internal
    nodes carry the split, the weight fraction routed left (from the rows
    the tree was fit on), and the SSE improvement of the split.
    ``n_rows`` and ``weight_mass`` are recorded for every node.
    """

    predictor: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight_fraction_left: np.ndarray
    improvement: np.ndarray
    rho: np.ndarray
    n_rows: np.ndarray
    weight_mass: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.predictor.size

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.predictor >= 0))

    @property
    def n_terminals(self) -> int:
        return self.n_nodes - self.n_splits

    def terminal_indices(self) -> np.ndarray:
        return np.flatnonzero(self.predictor < 0)


class _Builder:
    """Accumulates node records in creation order."""

    def __init__(self) -> None:
        self.predictor: list = []
        self.threshold: list = []
        self.left: list = []
        self.right: list = []
        self.weight_fraction_left: list = []
        self.improvement: list = []
        self.rho: list = []
        self.n_rows: list = []
        self.weight_mass: list = []

    def add_leaf(self, n_rows: int, weight_mass: float) -> int:
        node = len(self.predictor)
        self.predictor.append(_NO_PREDICTOR)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.weight_fraction_left.append(np.nan)
        self.improvement.append(0.0)
        self.rho.append(np.nan)
        self.n_rows.append(int(n_rows))
        self.weight_mass.append(float(weight_mass))
        return node

    def make_internal(self, node, j, thr, left, right, wfl, improvement) -> None:
        self.predictor[node] = int(j)
        self.threshold[node] = float(thr)
        self.left[node] = int(left)
        self.right[node] = int(right)
        self.weight_fraction_left[node] = float(wfl)
        self.improvement[node] = float(improvement)
        self.rho[node] = np.nan

    def freeze(self) -> RegressionTree:
        return RegressionTree(
            predictor=np.asarray(self.predictor, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            weight_fraction_left=np.asarray(self.weight_fraction_left, dtype=float),
            improvement=np.asarray(self.improvement, dtype=float),
            rho=np.asarray(self.rho, dtype=float),
            n_rows=np.asarray(self.n_rows, dtype=np.int32),
            weight_mass=np.asarray(self.weight_mass, dtype=float),
        )


def _node_sse(z: np.ndarray, w: np.ndarray) -> float:
    # Canonical per-node SSE in subsample row order; recorded improvements
    # are differences of these values, so they telescope exactly.
    mean = np.sum(w * z) / np.sum(w)
    d = z - mean
    return float(np.sum(w * d * d))


def _best_split(X, z, w, orders, min_node_size) -> Optional[tuple]:
    """Best admissible (improvement, predictor, threshold) for one leaf.

    ``orders[j]`` lists the leaf's rows in ascending order of predictor j.
    Ties in improvement resolve to the lowest predictor index, then the
    lowest threshold.  Returns None when no admissible split improves.
    """
    n = orders[0].size
    if n < 2 * min_node_size:
        return None
    z0 = z[orders[0]]
    if z0.min() == z0.max():  # constant working response: nothing to gain
        return None

    best = None
    lo = min_node_size - 1          # first admissible boundary index
    hi = n - min_node_size          # last admissible boundary index + 1
    if lo >= hi:
        return None
    for j, order in enumerate(orders):
        xs = X[order, j]
        ws = w[order]
        zs = z[order] if j else z0
        cw = np.cumsum(ws)
        cwz = np.cumsum(ws * zs)
        total_w = cw[-1]
        total_wz = cwz[-1]

        left_x = xs[lo:hi]
        right_x = xs[lo + 1:hi + 1]
        mids = 0.5 * (left_x + right_x)
        # distinct neighbours only, and the midpoint must separate them
        # (adjacent floats can collapse onto the left value)
        valid = (left_x < right_x) & (mids > left_x)
        if not valid.any():
            continue
        wl = cw[lo:hi]
        sl = cwz[lo:hi]
        gain = sl * sl / wl + (total_wz - sl) ** 2 / (total_w - wl) \
            - total_wz * total_wz / total_w
        gain[~valid] = -np.inf
        k = int(np.argmax(gain))    # first max -> lowest threshold
        if gain[k] > 0.0 and (best is None or gain[k] > best[0]):
            best = (float(gain[k]), j, float(mids[k]))
    return best


class _Leaf:
    __slots__ = ("node", "rows", "orders", "sse", "weight", "best")

    def __init__(self, node, rows, orders, sse, weight, best):
        self.node = node
        self.rows = rows
        self.orders = orders
        self.sse = sse
        self.weight = weight
        self.best = best


def fit_tree(
    X: np.ndarray,
    z: np.ndarray,
    residuals: np.ndarray,
    w: np.ndarray,
    cfg,
    spec: QuantileLossSpec,
    sort_orders: Optional[list] = None,
) -> RegressionTree:
    """Grow a tree on the subsample ``(X, z, residuals, w)``.

    Partitions are chosen on z; each terminal's ``rho`` is the weighted
    alpha-quantile of that node's residuals.  A subsample that admits no
    split yields a single-terminal tree (a pure quantile shift) rather
    than an error, so the boosting loop tolerates degenerate draws.

    ``sort_orders`` (one stable ascending argsort of X per predictor) can
    be supplied by callers that already have it; children reuse it by
    stable partition instead of re-sorting.
    """
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    w = np.asarray(w, dtype=float)
    n = X.shape[0]

    if sort_orders is None:
        sort_orders = [np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]

    builder = _Builder()
    all_rows = np.arange(n)
    root_sse = _node_sse(z, w)
    root_w = float(np.sum(w))
    root = builder.add_leaf(n, root_w)
    leaves = [_Leaf(root, all_rows, sort_orders, root_sse, root_w,
                    _best_split(X, z, w, sort_orders, cfg.min_node_size))]
    in_left = np.zeros(n, dtype=bool)

    for _ in range(cfg.splits_per_tree):
        # best-first: the leaf whose best split gains most; creation-order
        # position breaks exact ties deterministically
        pick = None
        for i, leaf in enumerate(leaves):
            if leaf.best is None:
                continue
            if pick is None or leaf.best[0] > leaves[pick].best[0]:
                pick = i
        if pick is None:
            break

        leaf = leaves.pop(pick)
        gain, j, thr = leaf.best
        go_left = X[leaf.rows, j] < thr
        rows_l = leaf.rows[go_left]
        rows_r = leaf.rows[~go_left]
        in_left[rows_l] = True
        orders_l = [o[in_left[o]] for o in leaf.orders]
        orders_r = [o[~in_left[o]] for o in leaf.orders]
        in_left[rows_l] = False

        sse_l = _node_sse(z[rows_l], w[rows_l])
        sse_r = _node_sse(z[rows_r], w[rows_r])
        w_l = float(np.sum(w[rows_l]))
        w_r = float(np.sum(w[rows_r]))
        node_l = builder.add_leaf(rows_l.size, w_l)
        node_r = builder.add_leaf(rows_r.size, w_r)
        improvement = max(leaf.sse - sse_l - sse_r, 0.0)
        builder.make_internal(
            leaf.node, j, thr, node_l, node_r, w_l / (w_l + w_r), improvement
        )
        leaves.append(_Leaf(node_l, rows_l, orders_l, sse_l, w_l,
                            _best_split(X, z, w, orders_l, cfg.min_node_size)))
        leaves.append(_Leaf(node_r, rows_r, orders_r, sse_r, w_r,
                            _best_split(X, z, w, orders_r, cfg.min_node_size)))

    for leaf in leaves:
        builder.rho[leaf.node] = terminal_node_estimate(
            residuals[leaf.rows], w[leaf.rows], spec
        )
    return builder.freeze()


def route(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    """Terminal-node index for every row of ``X`` (N x P)."""
    X = np.asarray(X, dtype=float)
    node = np.zeros(X.shape[0], dtype=np.int32)
    pending = np.flatnonzero(tree.predictor[node] >= 0)
    while pending.size:
        at = node[pending]
        j = tree.predictor[at]
        go_left = X[pending, j] < tree.threshold[at]
        node[pending] = np.where(go_left, tree.left[at], tree.right[at])
        pending = pending[tree.predictor[node[pending]] >= 0]
    return node


def leaf_values(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    """Terminal ``rho`` reached by every row of ``X``."""
    return tree.rho[route(tree, X)]


def predict_tree(tree: RegressionTree, x) -> float:
    """Terminal estimate for a single predictor vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict_tree expects a single predictor vector")
    if not np.isfinite(x).all():
        raise ValueError("non-finite predictor value")
    return float(leaf_values(tree, x.reshape(1, -1))[0])
