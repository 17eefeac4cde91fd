"""Fully connected feed-forward regressor trained by backpropagation.

Hidden layers compute ``h = phi(h_prev @ W + b)``; the single output unit is
linear. Training minimizes ``mean((y - yhat)^2) / 2 + alpha/2 * sum ||W||_F^2``
(biases unpenalized) over the full batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

ACTIVATIONS = ("tanh", "logistic", "relu")
OPTIMIZERS = ("gd", "lbfgs")


@dataclass(frozen=True)
class MlpParams:
    hidden_sizes: tuple = (100,)
    activation: str = "relu"
    alpha: float = 1e-4
    max_iter: int = 500
    seed: int = 0
    optimizer: str = "lbfgs"
    tol: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.alpha < 0 or self.max_iter < 0 or self.tol < 0:
            raise ValueError("alpha, max_iter and tol must be >= 0")


@dataclass(frozen=True, eq=False)
class MlpModel:
    weights: tuple
    biases: tuple
    params: MlpParams = field(default_factory=MlpParams)
    loss_trace: tuple = field(default=(), repr=False)
    converged: bool = True
    n_iter: int = 0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, non-empty weight and bias lists")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {k}: weight {W.shape} and bias {b.shape} do not match")
            if k and W.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k}: shapes do not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have one unit")

    @property
    def n_features(self):
        return int(self.weights[0].shape[0])

    def predict(self, X):
        return predict_mlp(self, X)


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "logistic":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return np.maximum(z, 0.0)


def _act_grad(name, a, z):
    # derivative expressed through the activation value where possible
    if name == "tanh":
        return 1.0 - a * a
    if name == "logistic":
        return a * (1.0 - a)
    return (z > 0).astype(float)


def _layers(weights, biases, activation, X):
    """Pre-activations and activations of every layer; the last is the output column."""
    zs, hs = [], [X]
    h = X
    last = len(weights) - 1
    for k, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        h = z if k == last else _act(activation, z)
        zs.append(z)
        hs.append(h)
    return zs, hs


def _check_X(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"dimension mismatch: model has {model.n_features} features, X has {X.shape[1]}")
    return X


def forward(model, X):
    X = _check_X(model, X)
    _, hs = _layers(model.weights, model.biases, model.params.activation, X)
    return hs[-1][:, 0]


def predict_mlp(model, X):
    return forward(model, X)


def _loss_grad(weights, biases, activation, alpha, X, y):
    n = X.shape[0]
    zs, hs = _layers(weights, biases, activation, X)
    out = hs[-1][:, 0]
    if not np.isfinite(out).all():
        raise FloatingPointError("non-finite network output")
    r = out - y
    loss = 0.5 * float(r @ r) / n + 0.5 * alpha * sum(float(np.sum(W * W)) for W in weights)
    gW, gb = [None] * len(weights), [None] * len(weights)
    delta = (r / n)[:, None]
    for k in range(len(weights) - 1, -1, -1):
        gW[k] = hs[k].T @ delta + alpha * weights[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ weights[k].T) * _act_grad(activation, hs[k], zs[k - 1])
    return loss, gW, gb


def loss_and_gradient(model, X, y):
    """Regularized loss and its gradient as ``(loss, weight_grads, bias_grads)``."""
    X = _check_X(model, X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1 or y.shape[0] != X.shape[0]:
        raise ValueError("loss_and_gradient needs n >= 1 matching rows")
    return _loss_grad(model.weights, model.biases, model.params.activation,
                      model.params.alpha, X, y)


def layer_shapes(d, hidden_sizes):
    sizes = (d,) + tuple(hidden_sizes) + (1,)
    return [(sizes[k], sizes[k + 1]) for k in range(len(sizes) - 1)]


def init_parameters(d, params):
    """Uniform in +-sqrt(6 / (fan_in + fan_out)) for weights and biases alike."""
    rng = np.random.default_rng(params.seed)
    weights, biases = [], []
    for fan_in, fan_out in layer_shapes(d, params.hidden_sizes):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return weights, biases


def _pack(weights, biases):
    return np.concatenate([np.r_[W.ravel(), b] for W, b in zip(weights, biases)])


def _unpack(theta, shapes):
    weights, biases, pos = [], [], 0
    for fi, fo in shapes:
        weights.append(theta[pos:pos + fi * fo].reshape(fi, fo))
        pos += fi * fo
        biases.append(theta[pos:pos + fo])
        pos += fo
    return weights, biases


def _canonical_rows(X, y):
    # fixed row order so a permuted training set gives the same floating-point sums
    order = np.lexsort(np.column_stack([X, y]).T[::-1])
    return X[order], y[order]


def fit_mlp(X, y, params=MlpParams()):
    """Full-batch training from a seeded initialization.

    ``gd`` is gradient descent with a backtracking (Armijo) step that grows
    after each accepted move, so the loss never increases. ``lbfgs`` hands the
    same loss and gradient to a limited-memory quasi-Newton routine. Both stop
    after ``max_iter`` iterations or once a step improves the loss by no more
    than ``tol`` times its current value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 1 or y.shape[0] != n:
        raise ValueError(f"bad shapes for fit_mlp: X {X.shape}, y {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("fit_mlp: non-finite inputs")
    X, y = _canonical_rows(X, y)
    shapes = layer_shapes(d, params.hidden_sizes)
    theta = _pack(*init_parameters(d, params))
    act, alpha = params.activation, params.alpha

    def fg(t):
        W, b = _unpack(t, shapes)
        loss, gW, gb = _loss_grad(W, b, act, alpha, X, y)
        return loss, _pack(gW, gb)

    if params.optimizer == "gd":
        theta, trace, converged, it = _gradient_descent(fg, theta, params)
    else:
        theta, trace, converged, it = _lbfgs(fg, theta, params)
    W, b = _unpack(theta.copy(), shapes)
    if not all(np.isfinite(w).all() for w in W):
        raise FloatingPointError(f"training diverged; loss trace {trace[-5:]}")
    return MlpModel(tuple(W), tuple(b), params, tuple(trace), converged, it)


def _gradient_descent(fg, theta, params, c1=1e-4):
    loss, grad = fg(theta)
    trace = [loss]
    step, converged, it = 1.0, False, 0
    while it < params.max_iter:
        gg = float(grad @ grad)
        if gg == 0.0:
            converged = True
            break
        while True:
            cand = theta - step * grad
            try:
                new_loss, new_grad = fg(cand)
            except FloatingPointError:
                new_loss = math.inf
            if new_loss <= loss - c1 * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                return theta, trace, True, it
        it += 1
        improvement = loss - new_loss
        theta, loss, grad = cand, new_loss, new_grad
        trace.append(loss)
        step *= 2.0
        if improvement <= params.tol * loss:
            converged = True
            break
    return theta, trace, converged, it


def _lbfgs(fg, theta, params):
    trace = [fg(theta)[0]]
    if params.max_iter == 0:
        return theta, trace, False, 0

    def record(xk):
        trace.append(fg(xk)[0])

    res = minimize(fg, theta, jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": params.max_iter, "ftol": params.tol, "gtol": 1e-12})
    return res.x, trace, bool(res.success), int(res.nit)
