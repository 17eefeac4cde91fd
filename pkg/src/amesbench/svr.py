"""Epsilon-insensitive support vector regression solved in the dual.

The dual is written over ``2n`` multipliers ``a = [alpha, alpha*]`` with signs
``s = [+1, -1]``::

    minimize    a'Qa/2 + p'a,   Q_tu = s_t s_u k(x_t, x_u),   p = [eps - y, eps + y]
    subject to  s'a = 0,  0 <= a <= C

and solved by sequential minimal optimization: each step picks the maximal
violating pair (second-order choice of the partner) and minimizes the
objective over those two multipliers exactly. The regression function is
``f(x) = sum_i (alpha_i - alpha*_i) k(x_i, x) + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

TAU = 1e-12


@dataclass(frozen=True)
class SvrParams:
    C: float = 1.0
    epsilon: float = 0.1
    kernel: str = "rbf"
    gamma: Union[float, str] = "scale"
    tol: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "rbf" and self.gamma != "scale" and not float(self.gamma) > 0:
            raise ValueError("rbf gamma must be > 0 or 'scale'")
        if not self.tol > 0 or self.max_passes < 1:
            raise ValueError("tol must be > 0 and max_passes >= 1")


def resolve_gamma(params, X):
    """``'scale'`` means ``1 / (d * var(X))``."""
    if params.gamma != "scale":
        return float(params.gamma)
    var = float(np.var(X))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def kernel_matrix(kind, gamma, A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    dot = A @ B.T
    if kind == "linear":
        return dot
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * dot
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_rows: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: str
    gamma: float
    C: float
    converged: bool = True
    n_iter: int = 0
    max_violation: float = 0.0
    objective_trace: tuple = field(default=(), repr=False)

    @property
    def n_features(self):
        return int(self.support_rows.shape[1])

    def predict(self, X):
        return predict_svr(self, X)


def dual_objective(beta, K, y, epsilon):
    """Dual value ``-b'Kb/2 - eps*|b|_1 + y'b`` for ``b = alpha - alpha*`` (to be maximized)."""
    return float(-0.5 * beta @ K @ beta - epsilon * np.abs(beta).sum() + y @ beta)


def _select(a, G, s, C, QD, K_of, n):
    up = np.where(s > 0, a < C, a > 0)
    low = np.where(s > 0, a > 0, a < C)
    sG = -s * G
    if not up.any() or not low.any():
        return -1, -1, 0.0
    cand_i = np.where(up, sG, -np.inf)
    i = int(np.argmax(cand_i))
    gmax = cand_i[i]
    gmax2 = np.max(np.where(low, -sG, -np.inf))
    viol = gmax + gmax2
    Ki = K_of(i)
    b = gmax - sG
    mask = low & (b > 0)
    if not mask.any():
        return i, -1, viol
    quad = QD[i] + QD - 2.0 * Ki
    quad = np.where(quad > 0, quad, TAU)
    score = np.where(mask, -(b * b) / quad, np.inf)
    j = int(np.argmin(score))
    return i, j, viol


def fit_svr(X, y, params=SvrParams()):
    """Solve the dual by pairwise updates until the maximal KKT violation drops below ``tol``.

    Runs at most ``max_passes * n`` pair updates. Hitting that cap is not an
    error: the model comes back with ``converged=False`` and the final
    violation recorded. The dual objective is logged once per ``n`` updates.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n < 2 or y.shape[0] != n:
        raise ValueError(f"fit_svr needs n >= 2 matching rows: X {X.shape}, y {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("fit_svr: non-finite inputs")
    C, eps = float(params.C), float(params.epsilon)
    gamma = resolve_gamma(params, X) if params.kernel == "rbf" else 0.0
    K = kernel_matrix(params.kernel, gamma, X, X)
    Kd = np.diag(K).copy()

    s = np.r_[np.ones(n), -np.ones(n)]
    p = np.r_[eps - y, eps + y]
    a = np.zeros(2 * n)
    G = p.copy()
    QD = np.r_[Kd, Kd]

    def K_of(t):
        row = K[t % n]
        return np.r_[row, row]

    def beta_of(a):
        return a[:n] - a[n:]

    def objective(a):
        beta = beta_of(a)
        return float(-0.5 * beta @ K @ beta - p @ a)

    trace = [objective(a)]
    max_iter = params.max_passes * n
    it, viol, converged = 0, np.inf, False
    while it < max_iter:
        i, j, viol = _select(a, G, s, C, QD, K_of, n)
        if i < 0 or viol < params.tol or j < 0:
            converged = True
            break
        Ki, Kj = K_of(i), K_of(j)
        Qij = s[i] * s[j] * Ki[j]
        ai_old, aj_old = a[i], a[j]
        if s[i] != s[j]:
            quad = QD[i] + QD[j] + 2.0 * Qij
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qij
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = total
        da_i, da_j = a[i] - ai_old, a[j] - aj_old
        G += s * (s[i] * da_i * Ki + s[j] * da_j * Kj)
        it += 1
        if it % n == 0:
            trace.append(objective(a))

    beta = beta_of(a)
    trace.append(objective(a))
    bias = _bias(a, G, s, C)
    keep = beta != 0
    return SvrModel(X[keep].copy(), beta[keep].copy(), bias, params.kernel, gamma, C,
                    converged, it, float(viol), tuple(trace))


def _bias(a, G, s, C):
    sG = s * G
    upper, lower = a >= C, a <= 0
    free = ~(upper | lower)
    if free.any():
        return float(-np.mean(sG[free]))
    ub_mask = (upper & (s < 0)) | (lower & (s > 0))
    lb_mask = (upper & (s > 0)) | (lower & (s < 0))
    ub = sG[ub_mask].min() if ub_mask.any() else np.inf
    lb = sG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return float(-(ub + lb) / 2.0)


def predict_svr(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: model has {model.n_features} features, X has {X.shape[1]}")
    if model.dual_coefs.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    K = kernel_matrix(model.kernel, model.gamma, X, model.support_rows)
    return K @ model.dual_coefs + model.bias
