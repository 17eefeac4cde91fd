"""Experiment configuration files.

Grammar (format ``1``), read with :mod:`configparser`::

    [experiment]
    format = 1
    data = path/to/houses.csv        ; relative paths resolve against this file
    schema = path/to/houses.schema   ; empty means the bundled Ames schema
    target_transform = log1p         ; or identity
    test_fraction = 0.2
    seed = 0
    folds = 5
    output = out
    models = linreg, forest, boost, svr, mlp
    drift_threshold = 2.0

    [boost]                          ; default hyperparameters, one section per model
    learning_rate = 0.1

    [boost.grid]                     ; candidate lists for tuning, comma separated
    max_depth = 6, 10

Layer sizes are written with ``-`` (``hidden_sizes = 50-20``). ``;`` and
``#`` start comments. Unknown keys are errors.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import models

FORMAT = 1
DEFAULT_DATA_ENV = "AMES_CSV"

# rng stream ids under the master seed
STREAMS = {"split": 0, "folds": 1, "forest": 2, "boost": 3, "mlp": 4}

# neighborhoods around the tuned settings, each also holding the family default
DEFAULT_GRIDS = {
    "linreg": {},
    "forest": {"n_estimators": [200, 300], "max_depth": [8, 10], "max_features": [9]},
    "boost": {"gamma": [0.0, 0.001], "max_depth": [6, 10], "min_child_weight": [1.0, 50.0],
              "subsample": [1.0]},
    "svr": {"C": [1.0, 5.0], "gamma": ["scale", 0.1]},
    "mlp": {"activation": ["relu", "tanh"], "hidden_sizes": [(100,), (50,)],
            "alpha": [1e-4, 5e-5], "optimizer": ["lbfgs"], "max_iter": [500]},
}


class ConfigError(ValueError):
    pass


def derive_seed(master, stream):
    """Seed for a named rng stream; depends only on the master seed and the name."""
    sid = STREAMS[stream]
    return int(np.random.SeedSequence([int(master), sid]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    data: str = ""
    schema: str = ""
    target_transform: str = "log1p"
    test_fraction: float = 0.2
    seed: int = 0
    folds: int = 5
    output: str = "out"
    models: tuple = models.MODEL_ORDER
    drift_threshold: float = 2.0
    params: dict = field(default_factory=dict)
    grids: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GRIDS.items()})

    def __post_init__(self):
        if self.target_transform not in ("identity", "log1p"):
            raise ConfigError(f"unknown target_transform {self.target_transform!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        for m in self.models:
            if m not in models.FAMILIES:
                raise ConfigError(f"unknown model {m!r}")

    def data_path(self):
        path = self.data or os.environ.get(DEFAULT_DATA_ENV, "")
        if not path:
            raise ConfigError(f"no data path: set it in the config, pass --data, or export {DEFAULT_DATA_ENV}")
        return path

    def model_config(self, kind):
        """Default hyperparameters for ``kind`` with derived seeds filled in."""
        cfg = models.family(kind).config(self.params.get(kind))
        if "seed" in cfg and "seed" not in self.params.get(kind, {}):
            cfg["seed"] = derive_seed(self.seed, kind)
        return cfg

    def grid(self, kind):
        """Candidate lists for ``kind``; a model seed is pinned like the defaults."""
        grid = {k: [models.coerce(kind, k, v) for v in vals]
                for k, vals in self.grids.get(kind, {}).items()}
        base = self.model_config(kind)
        if "seed" in base and "seed" not in grid:
            grid["seed"] = [base["seed"]]
        return grid

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


_SCALARS = {"data": str, "schema": str, "target_transform": str, "test_fraction": float,
            "seed": int, "folds": int, "output": str, "drift_threshold": float}


def _split_list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def parse_config(text, base_dir="."):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kw = {}
    if cp.has_section("experiment"):
        sec = cp["experiment"]
        fmt = int(sec.get("format", str(FORMAT)))
        if fmt != FORMAT:
            raise ConfigError(f"config format {fmt} is not supported (expected {FORMAT})")
        for key, raw in sec.items():
            if key == "format":
                continue
            if key == "models":
                kw["models"] = tuple(_split_list(raw))
            elif key in _SCALARS:
                kw[key] = _SCALARS[key](raw.strip())
            else:
                raise ConfigError(f"[experiment]: unknown key {key!r}")
        for key in ("data", "schema"):
            if kw.get(key) and not os.path.isabs(kw[key]):
                kw[key] = str(Path(base_dir) / kw[key])
    params = {}
    grids = {k: dict(v) for k, v in DEFAULT_GRIDS.items()}
    for name in cp.sections():
        if name == "experiment":
            continue
        kind, _, suffix = name.partition(".")
        if kind not in models.FAMILIES or suffix not in ("", "grid"):
            raise ConfigError(f"unknown section [{name}]")
        fam = models.FAMILIES[kind]
        entries = dict(cp[name].items())
        for key in entries:
            if key not in fam.defaults:
                raise ConfigError(f"[{name}]: {kind} has no hyperparameter {key!r}")
        try:
            if suffix:
                grids[kind] = {k: [models.coerce(kind, k, v) for v in _split_list(raw)]
                               for k, raw in entries.items()}
            else:
                params[kind] = {k: models.coerce(kind, k, v) for k, v in entries.items()}
        except ValueError as exc:
            raise ConfigError(f"[{name}]: {exc}") from exc
    return ExperimentConfig(params=params, grids=grids, **kw)


def load_config(path: Optional[str] = None):
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), base_dir=str(p.parent))


def dump_config(cfg):
    """Config text that parses back to ``cfg``."""
    lines = ["[experiment]", f"format = {FORMAT}"]
    for key in ("data", "schema", "target_transform", "test_fraction", "seed", "folds",
                "output", "drift_threshold"):
        lines.append(f"{key} = {getattr(cfg, key)}")
    lines.append("models = " + ", ".join(cfg.models))
    for kind in models.MODEL_ORDER:
        if cfg.params.get(kind):
            lines += ["", f"[{kind}]"]
            lines += [f"{k} = {models.format_value(v)}" for k, v in sorted(cfg.params[kind].items())]
        if kind in cfg.grids and cfg.grids[kind]:
            lines += ["", f"[{kind}.grid]"]
            lines += [f"{k} = " + ", ".join(models.format_value(x) for x in vals)
                      for k, vals in sorted(cfg.grids[kind].items())]
    return "\n".join(lines) + "\n"
