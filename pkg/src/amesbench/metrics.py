"""Regression scores: R², adjusted R², MSE, RMSE and MAE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """A metric is undefined for the given inputs."""


def _pair(y, yhat, min_len=1):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise MetricError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    if y.shape[0] < min_len:
        raise MetricError(f"need at least {min_len} observations, got {y.shape[0]}")
    return y, yhat


def r_squared(y, yhat):
    """``1 - SSR/SSM``; raises MetricError when ``y`` is constant."""
    y, yhat = _pair(y, yhat, min_len=2)
    ssm = float(np.sum((y - y.mean()) ** 2))
    if ssm == 0.0:
        raise MetricError("R² undefined for a constant target (SSM = 0)")
    ssr = float(np.sum((y - yhat) ** 2))
    return 1.0 - ssr / ssm


def adjusted_r_squared(r2, n, k):
    """``1 - (1 - r2)(n - 1)/(n - k - 1)`` for ``n`` observations and ``k`` regressors."""
    if k < 0 or n <= k + 1:
        raise MetricError(f"adjusted R² needs n > k + 1 (n={n}, k={k})")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1)


def mse(y, yhat):
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def rmse(y, yhat):
    y, yhat = _pair(y, yhat)
    r = np.abs(y - yhat)
    top = float(r.max())
    if top == 0.0:
        return 0.0
    # scaled so tiny residuals do not underflow when squared
    return top * math.sqrt(float(np.mean((r / top) ** 2)))


def mae(y, yhat):
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


@dataclass(frozen=True)
class MetricReport:
    r2: float
    adj_r2: float
    mse: float
    rmse: float
    mae: float
    n: int
    k: int


def full_report(y, yhat, k):
    """All five scores from one residual vector.

    ``adj_r2`` is NaN when ``n <= k + 1`` (more regressors than the sample
    supports); the other scores are still reported.
    """
    y, yhat = _pair(y, yhat, min_len=2)
    resid = y - yhat
    n = y.shape[0]
    ssm = float(np.sum((y - y.mean()) ** 2))
    if ssm == 0.0:
        raise MetricError("R² undefined for a constant target (SSM = 0)")
    ssr = float(np.sum(resid**2))
    r2 = 1.0 - ssr / ssm
    try:
        adj = adjusted_r_squared(r2, n, k)
    except MetricError:
        adj = float("nan")
    m = ssr / n
    return MetricReport(r2, adj, m, rmse(y, yhat), float(np.mean(np.abs(resid))), n, k)
