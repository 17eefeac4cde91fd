"""Random forest regression: bootstrap-resampled variance trees, averaged."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cart


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 200
    growth: cart.GrowthParams = field(
        default_factory=lambda: cart.GrowthParams(max_depth=8, max_features=9)
    )
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


def tree_rng(seed, index):
    """Independent stream for tree ``index``; depends on nothing else."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def bootstrap_rows(rng, n):
    return np.sort(rng.integers(0, n, size=n))


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    params: ForestParams
    _flat: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self._flat:
            object.__setattr__(self, "_flat", tuple(cart.FlatTree(t) for t in self.trees))

    def tree_predictions(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([t.predict(X) for t in self._flat])

    def predict(self, X):
        return predict_forest(self, X)


def fit_forest(X, y, params=ForestParams()):
    """Grow ``params.n_estimators`` trees, each on its own bootstrap draw.

    Tree ``j`` draws its bootstrap rows and per-split feature subsets from
    ``tree_rng(seed, j)`` alone, so trees can be grown in any order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 1 or y.shape[0] != n:
        raise ValueError(f"bad shapes for fit_forest: X {X.shape}, y {y.shape}")
    mf = params.growth.max_features
    if mf is not None and mf > d:
        raise ValueError(f"max_features={mf} exceeds the {d} available features")
    binned = cart.BinnedMatrix(X)
    crit = cart.VarianceCriterion()
    ones = np.ones(n)
    trees = []
    for j in range(params.n_estimators):
        rng = tree_rng(params.seed, j)
        rows = bootstrap_rows(rng, n) if params.bootstrap else np.arange(n)
        trees.append(cart.grow(binned, y, ones, params.growth, crit, rng=rng, rows=rows))
    return ForestModel(tuple(trees), params)


def predict_forest(model, X):
    """Mean of the per-tree predictions.

    Per-row tree outputs are sorted before the sum, so the result does not
    depend on tree order, bit for bit.
    """
    P = model.tree_predictions(X)
    P.sort(axis=0)
    total = np.zeros(P.shape[1])
    for row in P:
        total += row
    return total / P.shape[0]
