"""End-to-end benchmark pipeline: ingest, validate, clean, encode, split, fit, score.

Outputs per run: a report (JSON plus an aligned text table), plot data for
actual-vs-predicted and the residual histogram, boost feature importance, and
one model artifact per model plus a copy of the best one as the golden model.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import math
import os
import shutil
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import artifact, boost, config, data, metrics, models, schema as schema_mod, select

log = logging.getLogger("amesbench")

COLUMNS = ("model", "setup", "model_score", "r2", "adj_r2", "mse", "rmse", "mae", "cv_score")
HEADERS = ("Model", "Experimental setup", "Model score", "R2", "Adj. R2", "MSE", "RMSE", "MAE",
           "CV score")
REPORT_ORDER = ("linreg", "mlp", "forest", "svr", "boost")
HIST_BINS = 30


class BenchError(RuntimeError):
    pass


@contextlib.contextmanager
def stage(name):
    log.info("stage %s: start", name)
    try:
        yield
    except BenchError:
        raise
    except Exception as exc:
        raise BenchError(f"stage {name!r} failed: {type(exc).__name__}: {exc}") from exc
    log.info("stage %s: done", name)


def _digest_array(a):
    return hashlib.sha256(np.ascontiguousarray(a, dtype="<f8").tobytes()).hexdigest()[:16]


@dataclass(eq=False)
class Prepared:
    schema: list
    encoder: data.Encoder
    dataset: data.Dataset
    train: data.Dataset
    test: data.Dataset
    validation: data.ValidationReport
    provenance: dict


def prepare(cfg):
    """Every stage up to and including the train/test split."""
    provenance = {}
    with stage("ingest"):
        path = cfg.data_path()
        specs = schema_mod.load_schema(cfg.schema or None)
        table = data.load_csv(path, specs)
        provenance["data_path"] = os.path.basename(path)
        provenance["data_digest"] = table.digest()
        provenance["schema_digest"] = schema_mod.schema_digest(specs)
        log.info("ingest: %d rows x %d columns, digest %s", table.n_rows, table.n_cols,
                 provenance["data_digest"][:16])
    with stage("validate"):
        report = data.validate(table, specs)
        if not report.passed:
            raise BenchError("stage 'validate' failed:\n" + report.to_text())
    with stage("clean"):
        cleaned = data.clean(table, specs)
        provenance["clean_digest"] = cleaned.digest()
        log.info("clean: %d rows kept, digest %s", cleaned.n_rows, provenance["clean_digest"][:16])
    with stage("encode"):
        ds, enc = data.encode(cleaned, specs, cfg.target_transform)
        provenance["encoded_digest"] = _digest_array(ds.X)
        provenance["n_rows"], provenance["n_features"] = ds.n, ds.d
        provenance["target_transform"] = cfg.target_transform
        log.info("encode: X %s, digest %s", ds.X.shape, provenance["encoded_digest"])
    with stage("split"):
        split_seed = config.derive_seed(cfg.seed, "split")
        train, test = data.train_test_split(ds, cfg.test_fraction, split_seed)
        provenance.update(seed=cfg.seed, split_seed=split_seed, test_fraction=cfg.test_fraction,
                          n_train=train.n, n_test=test.n, folds=cfg.folds,
                          fold_seed=config.derive_seed(cfg.seed, "folds"))
        log.info("split: %d train / %d test (seed %d)", train.n, test.n, split_seed)
    return Prepared(specs, enc, ds, train, test, report, provenance)


def fold_plan(cfg, prep):
    return select.kfold_plan(prep.train.n, cfg.folds, config.derive_seed(cfg.seed, "folds"))


# ---- report types ------------------------------------------------------------

@dataclass
class ReportRow:
    model: str
    setup: str
    model_score: float = math.nan
    r2: float = math.nan
    adj_r2: float = math.nan
    mse: float = math.nan
    rmse: float = math.nan
    mae: float = math.nan
    cv_score: float = math.nan
    failed: str = ""


@dataclass
class RunReport:
    title: str
    rows: list
    provenance: dict = field(default_factory=dict)

    def row(self, model):
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(f"no row for model {model!r}")

    def to_json(self):
        doc = {"title": self.title, "columns": list(COLUMNS), "provenance": self.provenance,
               "rows": [asdict(r) for r in self.rows]}
        return json.dumps(_json_safe(doc), indent=1, sort_keys=True) + "\n"

    def to_text(self):
        cells = [list(HEADERS)]
        for r in self.rows:
            line = [r.model, r.setup]
            for c in COLUMNS[2:]:
                v = getattr(r, c)
                if r.failed:
                    line.append("failed")
                elif c == "cv_score":
                    line.append(f"{v:.3f}")
                else:
                    line.append("nan" if math.isnan(v) else f"{v:.3f}")
            cells.append(line)
        widths = [max(len(row[j]) for row in cells) for j in range(len(HEADERS))]
        out = [f"# {self.title}"]
        for row in cells:
            out.append("  ".join(c.ljust(w) if j < 2 else c.rjust(w)
                                 for j, (c, w) in enumerate(zip(row, widths))).rstrip())
        for r in self.rows:
            if r.failed:
                out.append(f"! {r.model}: {r.failed}")
        return "\n".join(out) + "\n"


def _json_safe(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _json_float(v):
    if isinstance(v, str):
        return {"nan": math.nan, "inf": math.inf, "-inf": -math.inf}[v]
    return float(v)


def report_from_json(text):
    doc = json.loads(text)
    rows = []
    for r in doc["rows"]:
        kw = {c: _json_float(r[c]) for c in COLUMNS[2:]}
        rows.append(ReportRow(r["model"], r["setup"], failed=r.get("failed", ""), **kw))
    return RunReport(doc["title"], rows, doc.get("provenance", {}))


@dataclass(eq=False)
class PlotData:
    actual: np.ndarray
    predicted: np.ndarray
    residuals: np.ndarray
    edges: np.ndarray
    counts: np.ndarray

    def scatter_text(self):
        lines = ["actual\tpredicted"]
        lines += [f"{a!r}\t{p!r}" for a, p in zip(self.actual.tolist(), self.predicted.tolist())]
        return "\n".join(lines) + "\n"

    def histogram_text(self):
        lines = ["edge_low edge_high count"]
        lines += [f"{lo!r} {hi!r} {int(c)}" for lo, hi, c in
                  zip(self.edges[:-1].tolist(), self.edges[1:].tolist(), self.counts.tolist())]
        return "\n".join(lines) + "\n"


def plot_data(actual, predicted, bins=HIST_BINS):
    """Scatter pairs plus a histogram of ``actual - predicted`` over the observed range."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    res = actual - predicted
    counts, edges = np.histogram(res, bins=bins, range=(float(res.min()), float(res.max())))
    return PlotData(actual, predicted, res, edges, counts)


# ---- fitting and scoring -----------------------------------------------------

@dataclass(eq=False)
class ModelRun:
    row: ReportRow
    estimator: object = None
    plot: PlotData = None
    train_pred: np.ndarray = None


def _factory(kind, prep):
    fam = models.family(kind)
    names = tuple(prep.dataset.feature_names)

    def make(cfg):
        return lambda X, y: fam.fit(cfg, X, y, names)
    return make


def score_model(kind, mcfg, prep, plan, setup=None):
    """Fit on the training partition and fill one report row; failures become marked rows."""
    setup = setup if setup is not None else models.setup_text(mcfg)
    row = ReportRow(kind, setup)
    try:
        with stage(f"fit {kind}"):
            est = _factory(kind, prep)(mcfg)(prep.train.X, prep.train.y)
            train_pred = est.predict(prep.train.X)
            test_pred = est.predict(prep.test.X)
        with stage(f"score {kind}"):
            row.model_score = metrics.r_squared(prep.train.y, train_pred)
            rep = metrics.full_report(prep.test.y, test_pred, prep.train.d)
            row.r2, row.adj_r2, row.mse, row.rmse, row.mae = (rep.r2, rep.adj_r2, rep.mse,
                                                              rep.rmse, rep.mae)
        with stage(f"cross-validate {kind}"):
            row.cv_score = select.cross_validate(_factory(kind, prep)(mcfg), prep.train, plan).cv_score
    except BenchError as exc:
        log.error("%s", exc)
        row.failed = str(exc)
        return ModelRun(row)
    return ModelRun(row, est, plot_data(prep.test.y, test_pred), train_pred)


@dataclass(eq=False)
class ExperimentResult:
    config: config.ExperimentConfig
    prep: Prepared
    report: RunReport
    runs: dict
    searches: dict = field(default_factory=dict)

    @property
    def plots(self):
        return {k: r.plot for k, r in self.runs.items() if r.plot is not None}

    @property
    def estimators(self):
        return {k: r.estimator for k, r in self.runs.items() if r.estimator is not None}


def _ordered(kinds):
    return [k for k in REPORT_ORDER if k in kinds]


def run_experiment(cfg, prep=None):
    """Fit every enabled model with its default hyperparameters and score it."""
    prep = prep or prepare(cfg)
    plan = fold_plan(cfg, prep)
    runs = {}
    for kind in _ordered(cfg.models):
        runs[kind] = score_model(kind, cfg.model_config(kind), prep, plan)
    report = RunReport("default hyperparameters", [runs[k].row for k in _ordered(cfg.models)],
                       dict(prep.provenance))
    return ExperimentResult(cfg, prep, report, runs)


def tune_and_run(cfg, prep=None):
    """Grid-search each enabled model on the training partition, refit the winner, score it."""
    prep = prep or prepare(cfg)
    plan = fold_plan(cfg, prep)
    runs, searches = {}, {}
    for kind in _ordered(cfg.models):
        with stage(f"tune {kind}"):
            grid = cfg.grid(kind)
            result = select.grid_search(_factory(kind, prep), grid, prep.train, plan)
            searches[kind] = result
        if math.isinf(result.best_mean_score):
            runs[kind] = ModelRun(ReportRow(kind, "no viable config", failed="every config failed"))
            continue
        best = models.family(kind).config(result.best_config)
        runs[kind] = score_model(kind, best, prep, plan, models.setup_text(best))
    report = RunReport("tuned hyperparameters", [runs[k].row for k in _ordered(cfg.models)],
                       dict(prep.provenance))
    return ExperimentResult(cfg, prep, report, runs, searches)


# ---- importance --------------------------------------------------------------

def export_importance(model, top_n=None):
    """``(feature, share of total gain)`` pairs, largest first, ties by name; unused features omitted."""
    if isinstance(model, models.Estimator):
        model = model.model
    if not isinstance(model, boost.BoostModel):
        raise TypeError(f"feature importance needs a boost model, got {type(model).__name__}")
    scores = boost.feature_importance(model)
    names = list(model.feature_names) or [f"x{j}" for j in range(len(scores))]
    ranked = sorted(((names[j], float(s)) for j, s in enumerate(scores) if s > 0),
                    key=lambda t: (-t[1], t[0]))
    return ranked if top_n is None else ranked[:top_n]


# ---- artifacts ---------------------------------------------------------------

def build_timestamp(data_path):
    """SOURCE_DATE_EPOCH when set, otherwise the data file's mtime, as UTC ISO text."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    ts = int(epoch) if epoch else int(os.stat(data_path).st_mtime)
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_artifact(result, kind):
    run = result.runs[kind]
    if run.estimator is None:
        raise BenchError(f"model {kind!r} has no fitted estimator")
    enc = result.prep.encoder
    pre = {"encoder": enc.to_record(), "schema_digest": schema_mod.schema_digest(enc.schema),
           "target_transform": enc.target_transform}
    meta = {"seed": result.config.seed, "timestamp": build_timestamp(result.config.data_path()),
            "metrics": _json_safe(asdict(run.row)), "provenance": result.prep.provenance,
            "report_title": result.report.title}
    return artifact.ModelArtifact(kind, run.estimator, pre, meta)


def golden_kind(report):
    """Model with the highest cv score (earliest in report order on ties)."""
    ok = [r for r in report.rows if not r.failed and not math.isnan(r.cv_score)]
    if not ok:
        raise BenchError("no model produced a cv score")
    return max(ok, key=lambda r: (r.cv_score, -report.rows.index(r))).model


def write_outputs(result, out_dir):
    """Write report, plot data, importance and artifacts; returns the list of paths written."""
    out = Path(out_dir)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    (out / "models").mkdir(parents=True, exist_ok=True)
    files = {"report.json": result.report.to_json(), "report.txt": result.report.to_text()}
    for kind, plot in result.plots.items():
        files[f"plots/{kind}_scatter.tsv"] = plot.scatter_text()
        files[f"plots/{kind}_residuals.txt"] = plot.histogram_text()
    if "boost" in result.estimators:
        lines = ["rank\tfeature\tgain_share"]
        lines += [f"{i}\t{n}\t{s!r}" for i, (n, s) in
                  enumerate(export_importance(result.estimators["boost"]), start=1)]
        files["importance.tsv"] = "\n".join(lines) + "\n"
    for kind, res in result.searches.items():
        files[f"search_{kind}.txt"] = res.to_text()
    written = []
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
        written.append(out / name)
    for kind in result.estimators:
        path = out / "models" / f"{kind}.amb"
        artifact.save_model(make_artifact(result, kind), path)
        written.append(path)
    if result.estimators:
        gold = golden_kind(result.report)
        if gold in result.estimators:
            shutil.copyfile(out / "models" / f"{gold}.amb", out / "models" / "golden.amb")
            written.append(out / "models" / "golden.amb")
    return written


# ---- batch prediction and drift ---------------------------------------------

@dataclass
class BatchPrediction:
    ids: list
    transformed: np.ndarray
    original: np.ndarray
    warnings: list


def predict_rows(art, rows_path, schema_path=None):
    enc = art.encoder
    if schema_path is not None:
        supplied = schema_mod.schema_digest(schema_mod.load_schema(schema_path))
        if supplied != art.preprocessing["schema_digest"]:
            raise BenchError("schema digest mismatch: rows do not follow the artifact's schema")
    table = data.load_csv(rows_path, enc.schema, require_target=False)
    cleaned = data.clean(table, enc.schema, drop_duplicates=False, fills=enc.fills,
                         require_target=False)
    X, warnings = enc.transform(cleaned)
    pred = art.predict(X)
    return BatchPrediction(enc.ids(cleaned), pred,
                           data.inverse_target(pred, art.preprocessing["target_transform"]), warnings)


def predict_batch(artifact_path, rows_path, out_path, schema_path=None):
    """Predict every row of a CSV; writes ``id, transformed, original`` lines and a warnings file."""
    art = artifact.load_model(artifact_path)
    bp = predict_rows(art, rows_path, schema_path)
    lines = ["id\tprediction_transformed\tprediction"]
    lines += [f"{i}\t{t!r}\t{o!r}" for i, t, o in zip(bp.ids, bp.transformed.tolist(),
                                                    bp.original.tolist())]
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if bp.warnings:
        Path(str(out_path) + ".warnings").write_text("\n".join(bp.warnings) + "\n", encoding="utf-8")
    return bp


@dataclass
class DriftResult:
    passed: bool
    model: str
    deltas: dict
    threshold: float

    def to_text(self):
        head = f"drift check for {self.model}: {'PASS' if self.passed else 'FAIL'} (threshold {self.threshold})"
        return "\n".join([head] + [f"  {k}: {v:+.6f}" for k, v in self.deltas.items()]) + "\n"


def drift_check(golden, candidate, threshold=2.0):
    """Compare a candidate report's row for the golden model's kind against the golden metrics.

    Fails when the candidate cv score is more than ``threshold`` points below the golden one.
    """
    gm = golden.metadata["metrics"]
    row = candidate.row(golden.kind)
    deltas = {c: getattr(row, c) - _json_float(gm[c]) for c in COLUMNS[2:]}
    passed = not row.failed and row.cv_score >= _json_float(gm["cv_score"]) - threshold
    return DriftResult(bool(passed), golden.kind, deltas, float(threshold))
