"""Greedy axis-aligned regression trees over pluggable split criteria.

Rows carry a pair of statistics ``(g, h)``. The variance criterion uses
``(y, 1)``; the boosting criterion uses first and second loss derivatives.
Split search is exact: every feature column is rank-coded once, and a node
histograms its rows per distinct value, so each candidate threshold sits at
the midpoint of two consecutive distinct values present in the node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int
    g_sum: float = 0.0
    h_sum: float = 0.0


@dataclass(frozen=True)
class Node:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    gain: float = 0.0
    n_samples: int = 0
    g_sum: float = 0.0
    h_sum: float = 0.0


TreeNode = Union[Leaf, Node]


@dataclass(frozen=True)
class GrowthParams:
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    max_features: Optional[int] = None
    min_gain: float = 0.0
    min_child_weight: float = 0.0

    def __post_init__(self):
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.min_gain < 0 or self.min_child_weight < 0:
            raise ValueError("min_gain and min_child_weight must be >= 0")


class VarianceCriterion:
    """Squared-error reduction; stats are ``(y, 1)`` and leaves hold the mean."""

    name = "variance"
    shift_invariant = True

    def gain(self, gl, hl, gr, hr):
        return gl * gl / hl + gr * gr / hr - (gl + gr) ** 2 / (hl + hr)

    def leaf_value(self, g, h):
        return g / h


class GradientCriterion:
    """Regularized second-order objective with L2 penalty ``lam`` and leaf cost ``gamma``."""

    name = "gradient"
    shift_invariant = False

    def __init__(self, lam=1.0, gamma=0.0):
        self.lam = float(lam)
        self.gamma = float(gamma)

    def gain(self, gl, hl, gr, hr):
        lam = self.lam
        return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                      - (gl + gr) ** 2 / (hl + hr + lam)) - self.gamma

    def leaf_value(self, g, h):
        return -g / (h + self.lam)


class BinnedMatrix:
    """Rank codes of every column of ``X``, computed once and shared by many trees."""

    def __init__(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        self.X = X
        self.n, self.d = X.shape
        self.uniques = []
        codes = np.empty((self.n, self.d), dtype=np.int64)
        for f in range(self.d):
            u, inv = np.unique(X[:, f], return_inverse=True)
            self.uniques.append(u)
            codes[:, f] = inv.ravel()
        self.sizes = np.array([len(u) for u in self.uniques], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.flat_codes = codes + self.offsets[:-1]
        self.codes = codes
        self.flat_values = np.concatenate(self.uniques) if self.d else np.zeros(0)
        self.bin_feature = np.repeat(np.arange(self.d), self.sizes)


@dataclass
class _Search:
    criterion: object
    params: GrowthParams
    binned: BinnedMatrix
    g: np.ndarray
    h: np.ndarray
    rng: Optional[np.random.Generator]
    n_features: int = field(init=False)

    def __post_init__(self):
        mf = self.params.max_features
        self.n_features = self.binned.d if mf is None else min(mf, self.binned.d)


def _tolerance(g, h, raw_sq=0.0):
    # rounding noise in a mathematically zero gain scales with sum g^2 / h
    hm = float(np.mean(np.abs(h))) if h.size else 1.0
    return (1e-11 * float(np.dot(g, g)) + 1e-20 * raw_sq) / max(hm, 1e-300)


def best_split(rows, X, g, h, params, criterion, feature_sample=None):
    """Best ``(feature, threshold, gain)`` over candidate thresholds, or ``None``.

    ``rows`` is an index array (repeats allowed, e.g. bootstrap draws).
    ``feature_sample`` restricts the search to those columns. Ties go to the
    lowest feature index, then the lowest threshold.
    """
    binned = X if isinstance(X, BinnedMatrix) else BinnedMatrix(X)
    rows = np.asarray(rows, dtype=np.int64)
    feats = None if feature_sample is None else np.sort(np.asarray(feature_sample, dtype=np.int64))
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    return _best_split(rows, binned, g, h, params, criterion, feats)


def _best_split(rows, binned, g, h, params, criterion, feats):
    n_node = rows.shape[0]
    if n_node < 2 * params.min_samples_leaf or binned.d == 0:
        return None
    gr_, hr_ = g[rows], h[rows]
    raw_sq = 0.0
    if getattr(criterion, "shift_invariant", False):
        raw_sq = float(np.dot(gr_, gr_))
        gr_ = gr_ - gr_.mean()
    if feats is None or feats.shape[0] == binned.d:
        idx = binned.flat_codes[rows]
        sizes = binned.sizes
        values = binned.flat_values
        bin_feature = binned.bin_feature
        n_bins = int(binned.offsets[-1])
    else:
        sizes = binned.sizes[feats]
        off = np.concatenate([[0], np.cumsum(sizes)])
        idx = binned.codes[np.ix_(rows, feats)] + off[:-1]
        values = np.concatenate([binned.uniques[f] for f in feats])
        bin_feature = np.repeat(feats, sizes)
        n_bins = int(off[-1])
    k = idx.shape[1]
    flat = idx.ravel()
    cnt = np.bincount(flat, minlength=n_bins)
    hg = np.bincount(flat, weights=np.repeat(gr_, k), minlength=n_bins)
    hh = np.bincount(flat, weights=np.repeat(hr_, k), minlength=n_bins)

    present = np.flatnonzero(cnt)
    cnt, hg, hh = cnt[present], hg[present], hh[present]
    feat_p = bin_feature[present]
    # restart the running sums at each feature boundary
    starts = np.flatnonzero(np.r_[True, feat_p[1:] != feat_p[:-1]])
    seg_len = np.diff(np.r_[starts, present.shape[0]])

    def seg_cumsum(a):
        c = np.cumsum(a)
        base = np.r_[0.0, c[starts[1:] - 1]] if starts.shape[0] > 1 else np.zeros(1)
        return c - np.repeat(base, seg_len)

    cl = seg_cumsum(cnt.astype(float))
    gl = seg_cumsum(hg)
    hl = seg_cumsum(hh)
    G, H = float(gr_.sum()), float(hr_.sum())
    ok = cl < n_node - 0.5
    ok &= cl >= params.min_samples_leaf
    ok &= (n_node - cl) >= params.min_samples_leaf
    if params.min_child_weight > 0:
        ok &= (hl >= params.min_child_weight) & ((H - hl) >= params.min_child_weight)
    cand = np.flatnonzero(ok)
    if cand.shape[0] == 0:
        return None
    gains = criterion.gain(gl[cand], hl[cand], G - gl[cand], H - hl[cand])
    top = float(gains.max())
    noise = _tolerance(gr_, hr_, raw_sq)
    if not top > params.min_gain or not top > noise:
        return None
    # candidates within rounding noise of the best are ties: earliest wins
    best = int(np.flatnonzero(gains >= top - (1e-12 * abs(top) + noise))[0])
    gain = float(gains[best])
    b = cand[best]
    lo, hi = values[present[b]], values[present[b + 1]]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return int(feat_p[b]), float(thr), gain


def grow(X, g, h, params, criterion, rng=None, rows=None):
    """Grow a tree on ``rows`` (default: all rows) of ``X``.

    ``rng`` draws the per-split feature subsets when ``params.max_features``
    is below the column count; it is not touched otherwise.
    """
    binned = X if isinstance(X, BinnedMatrix) else BinnedMatrix(X)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if rows is None:
        rows = np.arange(binned.n)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[0] < 1:
        raise ValueError("grow needs at least one row")
    search = _Search(criterion, params, binned, g, h, rng)
    if search.n_features < binned.d and rng is None:
        raise ValueError("feature subsampling needs an rng")
    return _grow(rows, 0, search)


def _grow(rows, depth, s):
    gr = s.g[rows]
    G = float(gr.sum())
    H = float(s.h[rows].sum())
    n = int(rows.shape[0])
    if getattr(s.criterion, "shift_invariant", False):
        # anchored mean: exact when every row carries the same target
        anchor = float(gr[0])
        value = anchor + s.criterion.leaf_value(float((gr - anchor).sum()), H)
    else:
        value = s.criterion.leaf_value(G, H)
    leaf = Leaf(float(value), n, G, H)
    if s.params.max_depth is not None and depth >= s.params.max_depth:
        return leaf
    feats = None
    if s.n_features < s.binned.d:
        feats = np.sort(s.rng.choice(s.binned.d, size=s.n_features, replace=False))
    found = _best_split(rows, s.binned, s.g, s.h, s.params, s.criterion, feats)
    if found is None:
        return leaf
    f, thr, gain = found
    go_left = s.binned.X[rows, f] <= thr
    left = _grow(rows[go_left], depth + 1, s)
    right = _grow(rows[~go_left], depth + 1, s)
    return Node(f, thr, left, right, gain, n, G, H)


def predict_tree(node, x):
    x = np.asarray(x, dtype=float)
    while isinstance(node, Node):
        if node.feature_index >= x.shape[0]:
            raise ValueError(f"input has {x.shape[0]} features, tree needs > {node.feature_index}")
        node = node.left if x[node.feature_index] <= node.threshold else node.right
    return node.value


class FlatTree:
    """Array form of a tree for vectorized routing of many rows."""

    def __init__(self, root):
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if isinstance(node, Node):
                feature[i] = node.feature_index
                threshold[i] = node.threshold
                left[i] = visit(node.left)
                right[i] = visit(node.right)
            else:
                value[i] = node.value
            return i

        visit(root)
        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value)
        self.max_feature = int(self.feature.max()) if self.feature.size else -1

    def apply(self, X):
        """Leaf position reached by each row."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] <= self.max_feature:
            raise ValueError("dimension mismatch for tree prediction")
        pos = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[pos] >= 0)
        while active.size:
            p = pos[active]
            f = self.feature[p]
            go_left = X[active, f] <= self.threshold[p]
            pos[active] = np.where(go_left, self.left[p], self.right[p])
            active = active[self.feature[pos[active]] >= 0]
        return pos

    def predict(self, X):
        return self.value[self.apply(X)]


def iter_nodes(node):
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, Node):
            stack.append(cur.right)
            stack.append(cur.left)


def leaves(node):
    return [n for n in iter_nodes(node) if isinstance(n, Leaf)]


def depth(node):
    if isinstance(node, Leaf):
        return 0
    return 1 + max(depth(node.left), depth(node.right))


def tree_to_record(node):
    """Preorder nested dict with floats as 17-significant-digit text."""
    if isinstance(node, Leaf):
        return {"leaf": f"{node.value:.17g}", "n": node.n_samples,
                "g": f"{node.g_sum:.17g}", "h": f"{node.h_sum:.17g}"}
    return {
        "f": node.feature_index, "t": f"{node.threshold:.17g}",
        "gain": f"{node.gain:.17g}", "n": node.n_samples,
        "g": f"{node.g_sum:.17g}", "h": f"{node.h_sum:.17g}",
        "l": tree_to_record(node.left), "r": tree_to_record(node.right),
    }


def tree_from_record(rec):
    if "leaf" in rec:
        return Leaf(float(rec["leaf"]), int(rec["n"]), float(rec["g"]), float(rec["h"]))
    return Node(int(rec["f"]), float(rec["t"]), tree_from_record(rec["l"]),
                tree_from_record(rec["r"]), float(rec["gain"]), int(rec["n"]),
                float(rec["g"]), float(rec["h"]))
