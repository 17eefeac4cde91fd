"""The five model families behind one interface: flat param dict in, fitted estimator out.

Families that need conditioned inputs (svr, mlp) carry their own scaler so a
fitted estimator always takes raw encoded features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import boost, cart, data, forest, linreg, mlp, svr

MODEL_ORDER = ("linreg", "forest", "boost", "svr", "mlp")


@dataclass(frozen=True, eq=False)
class Estimator:
    kind: str
    config: dict
    model: object
    x_scaler: Optional[data.Scaler] = None
    y_center: float = 0.0
    y_scale: float = 1.0

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if self.x_scaler is not None:
            X = self.x_scaler.apply(X)
        out = self.model.predict(X)
        if self.y_scale != 1.0 or self.y_center != 0.0:
            out = out * self.y_scale + self.y_center
        return out


def _fit_linreg(cfg, X, y):
    return Estimator("linreg", cfg, linreg.fit_linear(X, y))


def _forest_params(cfg):
    growth = cart.GrowthParams(max_depth=cfg["max_depth"], max_features=cfg["max_features"],
                               min_samples_leaf=cfg["min_samples_leaf"])
    return forest.ForestParams(n_estimators=cfg["n_estimators"], growth=growth,
                               bootstrap=cfg["bootstrap"], seed=cfg["seed"])


def _fit_forest(cfg, X, y):
    return Estimator("forest", cfg, forest.fit_forest(X, y, _forest_params(cfg)))


def _boost_params(cfg):
    return boost.BoostParams(**cfg)


def _fit_boost(cfg, X, y, feature_names=()):
    return Estimator("boost", cfg, boost.fit_boost(X, y, _boost_params(cfg),
                                                   feature_names=feature_names))


def _fit_svr(cfg, X, y):
    scaler = data.fit_scaler(X)
    return Estimator("svr", cfg, svr.fit_svr(scaler.apply(X), y, svr.SvrParams(**cfg)), scaler)


def _fit_mlp(cfg, X, y):
    scaler = data.fit_scaler(X)
    y = np.asarray(y, dtype=float)
    center = float(y.mean())
    scale = float(y.std()) or 1.0
    model = mlp.fit_mlp(scaler.apply(X), (y - center) / scale, mlp.MlpParams(**cfg))
    return Estimator("mlp", cfg, model, scaler, center, scale)


@dataclass(frozen=True)
class Family:
    name: str
    defaults: dict
    fit_fn: Callable

    def config(self, overrides=None):
        cfg = dict(self.defaults)
        for key, value in (overrides or {}).items():
            if key not in cfg:
                raise KeyError(f"{self.name} has no hyperparameter {key!r}")
            cfg[key] = coerce(self.name, key, value)
        return cfg

    def fit(self, cfg, X, y, feature_names=()):
        cfg = self.config(cfg)
        if self.name == "boost":
            return _fit_boost(cfg, X, y, feature_names)
        return self.fit_fn(cfg, X, y)


FAMILIES = {
    "linreg": Family("linreg", {}, _fit_linreg),
    "forest": Family("forest", {"n_estimators": 200, "max_depth": 8, "max_features": 9,
                                "min_samples_leaf": 1, "bootstrap": True, "seed": 0}, _fit_forest),
    "boost": Family("boost", {"n_rounds": 300, "learning_rate": 0.1, "lam": 1.0, "gamma": 0.0,
                              "max_depth": 6, "min_child_weight": 1.0, "subsample": 1.0,
                              "seed": 0}, _fit_boost),
    "svr": Family("svr", {"C": 1.0, "epsilon": 0.1, "kernel": "rbf", "gamma": "scale",
                          "tol": 1e-3, "max_passes": 200}, _fit_svr),
    "mlp": Family("mlp", {"hidden_sizes": (100,), "activation": "relu", "alpha": 1e-4,
                          "max_iter": 500, "seed": 0, "optimizer": "lbfgs", "tol": 1e-7}, _fit_mlp),
}

# parameters whose value may also be a keyword rather than a number
_OPTIONAL_INT = {("forest", "max_depth"), ("forest", "max_features")}


def family(name):
    try:
        return FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown model kind {name!r}; expected one of {', '.join(MODEL_ORDER)}") from None


def coerce(kind, key, value):
    """Turn a config value (often text) into the type of the family default."""
    default = FAMILIES[kind].defaults[key]
    if not isinstance(value, str):
        return tuple(value) if isinstance(default, tuple) else value
    text = value.strip()
    if (kind, key) in _OPTIONAL_INT and text.lower() == "none":
        return None
    if kind == "svr" and key == "gamma":
        return text if text == "scale" else float(text)
    if isinstance(default, bool):
        if text.lower() not in ("true", "false"):
            raise ValueError(f"{kind}.{key}: expected true/false, got {text!r}")
        return text.lower() == "true"
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(int(p) for p in text.replace("-", ",").split(",") if p.strip())
    return text


def format_value(value):
    if isinstance(value, tuple):
        return "-".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def setup_text(cfg):
    return ", ".join(f"{k}={format_value(cfg[k])}" for k in sorted(cfg)) or "ordinary least squares"


def fit_model(kind, cfg, X, y, feature_names=()):
    return family(kind).fit(cfg, X, y, feature_names)
