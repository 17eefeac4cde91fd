"""Ordinary least-squares multiple linear regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray

    def predict(self, X):
        return predict_linear(self, X)


def _solve(A, b):
    # Householder QR when A has full column rank, SVD minimum-norm otherwise.
    n, d = A.shape
    if d == 0:
        return np.zeros(0)
    if n >= d:
        Q, R = np.linalg.qr(A, mode="reduced")
        diag = np.abs(np.diag(R))
        if diag.min() > max(n, d) * np.finfo(float).eps * diag.max():
            return solve_triangular(R, Q.T @ b)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    return coef


def fit_linear(X, y, fit_intercept=True):
    """Least-squares fit of ``y ~ b0 + X b``.

    With an intercept the columns are centred first, so a rank-deficient
    design yields the minimum-norm slope vector and ``b0 = mean(y) - mean(X) b``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ValueError(f"bad shapes for fit_linear: X {X.shape}, y {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("fit_linear: non-finite inputs")
    if fit_intercept:
        xm, ym = X.mean(axis=0), y.mean()
        coef = _solve(X - xm, y - ym)
        return LinearModel(float(ym - xm @ coef), coef)
    return LinearModel(0.0, _solve(X, y))


def predict_linear(model, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.coefficients.shape[0]:
        raise ValueError(
            f"dimension mismatch: model has {model.coefficients.shape[0]} features, X has {X.shape[1]}"
        )
    return model.intercept + X @ model.coefficients
