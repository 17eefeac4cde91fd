"""K-fold cross-validation and grid / random hyperparameter search.

A *factory* maps a config dict to a fit function ``fit(X, y) -> predictor``,
where the predictor has ``.predict(X)``. The cv score of a config is
``100 * mean`` of its per-fold test R^2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    n: int
    seed: int
    fold_assignment: np.ndarray

    def test_rows(self, f):
        return np.flatnonzero(self.fold_assignment == f)

    def train_rows(self, f):
        return np.flatnonzero(self.fold_assignment != f)

    @property
    def sizes(self):
        return np.bincount(self.fold_assignment, minlength=self.k)


def kfold_plan(n, k, seed):
    """Shuffle ``range(n)`` with ``seed``, then cut it into ``k`` contiguous chunks.

    The first ``n % k`` chunks get one extra row.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    sizes = [base + (1 if f < extra else 0) for f in range(k)]
    assign = np.empty(n, dtype=np.int64)
    assign[perm] = np.repeat(np.arange(k), sizes)
    return FoldPlan(k, n, seed, assign)


@dataclass(frozen=True)
class CvResult:
    fold_scores: tuple   # R^2 per fold, nan where flagged
    flagged: tuple       # (fold, reason) for folds left out of the mean
    cv_score: float

    @property
    def valid_scores(self):
        return [s for s in self.fold_scores if not math.isnan(s)]


def cross_validate(fit, ds, plan):
    """Fit on the rows outside each fold, score R^2 on the fold.

    A fold whose held-out targets are constant has no R^2; it is flagged and
    left out of the mean. If every fold is flagged the score is nan.
    """
    if plan.n != ds.n:
        raise ValueError(f"fold plan covers {plan.n} rows, dataset has {ds.n}")
    scores, flagged = [], []
    for f in range(plan.k):
        tr, te = plan.train_rows(f), plan.test_rows(f)
        model = fit(ds.X[tr], ds.y[tr])
        pred = model.predict(ds.X[te])
        try:
            scores.append(metrics.r_squared(ds.y[te], pred))
        except metrics.MetricError as exc:
            scores.append(math.nan)
            flagged.append((f, str(exc)))
    valid = [s for s in scores if not math.isnan(s)]
    cv = 100.0 * float(np.mean(valid)) if valid else math.nan
    return CvResult(tuple(scores), tuple(flagged), cv)


@dataclass
class ConfigResult:
    index: int
    config: dict
    fold_scores: tuple = ()
    mean_score: float = -math.inf
    failed: bool = False
    diagnostic: str = ""
    rank: int = 0


@dataclass
class SearchResult:
    entries: list = field(default_factory=list)
    best_config: dict = field(default_factory=dict)
    best_mean_score: float = -math.inf

    def to_text(self):
        lines = ["rank\tmean\tfolds\tconfig\tnote"]
        for e in sorted(self.entries, key=lambda e: e.rank):
            folds = " ".join(f"{s:.6f}" for s in e.fold_scores)
            cfg = ", ".join(f"{k}={e.config[k]}" for k in sorted(e.config))
            mean = "failed" if e.failed else f"{e.mean_score:.6f}"
            lines.append(f"{e.rank}\t{mean}\t{folds}\t{cfg}\t{e.diagnostic}")
        return "\n".join(lines) + "\n"


def grid_configs(grid):
    """Cartesian product, keys in sorted order, values in listed order."""
    if not grid:
        return [{}]
    keys = sorted(grid)
    for k in keys:
        if len(grid[k]) == 0:
            raise ValueError(f"grid entry {k!r} has no candidate values")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _evaluate(factory, configs, ds, plan):
    result = SearchResult()
    for idx, cfg in enumerate(configs):
        entry = ConfigResult(idx, dict(cfg))
        try:
            cv = cross_validate(factory(cfg), ds, plan)
        except Exception as exc:  # a bad config must not sink the whole search
            entry.failed, entry.diagnostic = True, f"{type(exc).__name__}: {exc}"
        else:
            entry.fold_scores = cv.fold_scores
            if math.isnan(cv.cv_score):
                entry.failed, entry.diagnostic = True, "no scorable folds"
            else:
                entry.mean_score = cv.cv_score
                if cv.flagged:
                    entry.diagnostic = "; ".join(f"fold {f}: {why}" for f, why in cv.flagged)
        result.entries.append(entry)
    order = sorted(result.entries, key=lambda e: (-e.mean_score, e.index))
    for r, e in enumerate(order, start=1):
        e.rank = r
    best = order[0]
    result.best_config, result.best_mean_score = dict(best.config), best.mean_score
    assert all(result.best_mean_score >= e.mean_score for e in result.entries)
    return result


def grid_search(factory, grid, ds, plan):
    return _evaluate(factory, grid_configs(grid), ds, plan)


def sample_configs(distributions, n_iter, seed):
    """``n_iter`` draws with replacement; each draw picks one value per key (sorted key order)."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    rng = np.random.default_rng(seed)
    keys = sorted(distributions)
    out = []
    for _ in range(n_iter):
        out.append({k: distributions[k][int(rng.integers(len(distributions[k])))] for k in keys})
    return out


def random_search(factory, distributions, n_iter, seed, ds, plan, _enumerate=False):
    """Random search over candidate lists.

    ``_enumerate`` is a test hook: it replaces sampling by the full grid in
    enumeration order (``n_iter`` must then equal the grid size).
    """
    if _enumerate:
        configs = grid_configs(distributions)
        if len(configs) != n_iter:
            raise ValueError("forced enumeration needs n_iter == grid size")
    else:
        configs = sample_configs(distributions, n_iter, seed)
    return _evaluate(factory, configs, ds, plan)
