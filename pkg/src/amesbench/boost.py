"""Gradient-boosted regression trees with a regularized second-order objective.

Squared-error loss ``L = (y - p)^2 / 2`` gives per-row gradient ``g = p - y``
and hessian ``h = 1``. Each round grows one tree on ``(g, h)``; a leaf holding
rows ``I`` gets weight ``-G/(H + lam)`` (``G``, ``H`` summed over ``I``),
shrunk by the learning rate before it is stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import cart


@dataclass(frozen=True)
class GradStats:
    G: float
    H: float


def leaf_weight(stats, lam):
    """Minimizer ``-G/(H + lam)`` of ``G w + (H + lam) w^2 / 2``."""
    denom = stats.H + lam
    if denom == 0:
        raise ValueError("leaf weight undefined: H + lambda = 0")
    return -stats.G / denom


def split_gain(left, right, lam, gamma):
    """Objective reduction from splitting one leaf into ``left`` and ``right``, minus ``gamma``."""
    crit = cart.GradientCriterion(lam, gamma)
    return float(crit.gain(left.G, left.H, right.G, right.H))


@dataclass(frozen=True)
class BoostParams:
    n_rounds: int = 300
    learning_rate: float = 0.1
    lam: float = 1.0
    gamma: float = 0.0
    max_depth: int = 6
    min_child_weight: float = 1.0
    subsample: float = 1.0
    base_score: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.lam < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValueError("lam, gamma and min_child_weight must be >= 0")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class BoostModel:
    base_score: float
    trees: tuple
    params: BoostParams
    importance_raw: np.ndarray
    feature_names: tuple = ()
    train_pred: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    loss_trace: tuple = field(default=(), compare=False, repr=False)
    _flat: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self._flat and self.trees:
            object.__setattr__(self, "_flat", tuple(cart.FlatTree(t) for t in self.trees))

    @property
    def n_features(self):
        return int(self.importance_raw.shape[0])

    def predict(self, X):
        return predict_boost(self, X)


def _shrink(node, eta):
    if isinstance(node, cart.Leaf):
        return replace(node, value=node.value * eta)
    return replace(node, left=_shrink(node.left, eta), right=_shrink(node.right, eta))


def round_rng(seed, t):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


def subsample_rows(params, t, n):
    if params.subsample >= 1:
        return np.arange(n)
    m = max(1, int(math.floor(params.subsample * n)))
    return np.sort(round_rng(params.seed, t).choice(n, size=m, replace=False))


def fit_boost(X, y, params=BoostParams(), init_model=None, feature_names=()):
    """Fit ``params.n_rounds`` trees, each on the gradients of the current fit.

    ``init_model`` continues an earlier fit: its trees are kept as they are
    and the new rounds start from its predictions, with round numbering (and
    therefore subsampling streams) picking up where it stopped.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 1 or y.shape[0] != n:
        raise ValueError(f"bad shapes for fit_boost: X {X.shape}, y {y.shape}")
    if params.subsample * n < 1:
        raise ValueError("subsample * n must be >= 1")

    if init_model is None:
        base = float(np.mean(y)) if params.base_score is None else float(params.base_score)
        trees, importance = [], np.zeros(d)
        pred = np.full(n, base)
        losses = []
    else:
        if init_model.n_features != d:
            raise ValueError("init_model was fitted on a different number of features")
        base = init_model.base_score
        trees, importance = list(init_model.trees), init_model.importance_raw.copy()
        pred = predict_boost(init_model, X)
        losses = list(init_model.loss_trace)
        feature_names = feature_names or init_model.feature_names

    binned = cart.BinnedMatrix(X)
    growth = cart.GrowthParams(max_depth=params.max_depth,
                               min_child_weight=params.min_child_weight)
    crit = cart.GradientCriterion(params.lam, params.gamma)
    h = np.ones(n)
    start = len(trees)
    for t in range(start, start + params.n_rounds):
        g = pred - y
        rows = subsample_rows(params, t, n)
        tree = _shrink(cart.grow(binned, g, h, growth, crit, rows=rows), params.learning_rate)
        for node in cart.iter_nodes(tree):
            if isinstance(node, cart.Node):
                importance[node.feature_index] += node.gain
        pred = pred + cart.FlatTree(tree).predict(X)
        trees.append(tree)
        losses.append(float(np.mean((y - pred) ** 2)))

    return BoostModel(base, tuple(trees), params, importance, tuple(feature_names),
                      train_pred=pred, loss_trace=tuple(losses))


def predict_boost(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: model has {model.n_features} features, X has {X.shape[1]}")
    pred = np.full(X.shape[0], model.base_score)
    for flat in model._flat:
        pred = pred + flat.predict(X)
    return pred


def feature_importance(model):
    """Accumulated split gain per feature, normalized to sum to one (zeros if no splits)."""
    raw = np.asarray(model.importance_raw, dtype=float)
    total = raw.sum()
    if total <= 0:
        return np.zeros_like(raw)
    return raw / total
