"""Ingest, quality-check, clean, encode and split tabular housing data."""

from __future__ import annotations

import csv
import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .schema import SENTINEL, ColumnSpec, SchemaError, target_spec

MISSING_TOKENS = ("", "NA")
TRANSFORMS = ("identity", "log1p")


class DataError(ValueError):
    pass


@dataclass
class RawTable:
    column_names: list[str]
    rows: list[list]
    invalid: set = field(default_factory=set, compare=False, repr=False)
    fills: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_rows(self):
        return len(self.rows)

    @property
    def n_cols(self):
        return len(self.column_names)

    def column(self, name):
        j = self.column_names.index(name)
        return [r[j] for r in self.rows]

    def digest(self):
        h = hashlib.sha256()
        h.update("\x1f".join(self.column_names).encode())
        for r in self.rows:
            h.update(("\x1e" + "\x1f".join("" if c is None else repr(c) for c in r)).encode())
        return h.hexdigest()


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    target_transform: str = "identity"
    provenance: str = ""
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"shape mismatch: X {self.X.shape}, y {self.y.shape}")
        if self.X.shape[1] != len(self.feature_names):
            raise DataError("feature_names length does not match X columns")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise DataError("non-finite values in dataset")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        ids = [self.ids[i] for i in idx] if self.ids else []
        return Dataset(self.X[idx], self.y[idx], list(self.feature_names),
                       self.target_transform, self.provenance, ids)


@dataclass
class ColumnCounts:
    missing: int = 0
    type_invalid: int = 0
    out_of_range: int = 0


@dataclass
class ValidationReport:
    columns: dict[str, ColumnCounts]
    duplicate_ids: list[str]
    duplicate_rows: int
    mandatory: dict[str, int]

    @property
    def passed(self):
        return not any(self.mandatory.values())

    def to_text(self):
        lines = ["column\tmissing\ttype_invalid\tout_of_range"]
        for name, c in self.columns.items():
            lines.append(f"{name}\t{c.missing}\t{c.type_invalid}\t{c.out_of_range}")
        lines.append(f"# duplicate_ids\t{','.join(self.duplicate_ids)}")
        lines.append(f"# duplicate_rows\t{self.duplicate_rows}")
        lines.append(f"# status\t{'pass' if self.passed else 'fail'}")
        return "\n".join(lines) + "\n"


def _parse_cell(raw, spec):
    if raw in MISSING_TOKENS:
        return None, True
    if spec.is_numeric:
        try:
            v = float(raw)
        except ValueError:
            return raw, False
        return (v, True) if math.isfinite(v) else (raw, False)
    return raw, True


def load_csv(path, schema, require_target=True):
    """Read a header-first CSV into a RawTable typed by ``schema``.

    Numeric cells that fail to parse keep their raw text and are recorded in
    ``table.invalid`` as ``(row, column)`` pairs. With ``require_target=False``
    the target column may be absent from the file (batch prediction input).
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no header row") from None
        by_name = {s.name: s for s in schema}
        unknown = [h for h in header if h not in by_name]
        expected = [s.name for s in schema if require_target or s.kind != "target"]
        absent = [n for n in expected if n not in header]
        if unknown or absent or len(set(header)) != len(header):
            raise DataError(
                f"{path}: header/schema mismatch (unknown={unknown[:5]}, absent={absent[:5]})"
            )
        specs = [by_name[h] for h in header]
        rows, invalid = [], set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            row = []
            for j, (raw, spec) in enumerate(zip(rec, specs)):
                value, ok = _parse_cell(raw, spec)
                if not ok:
                    invalid.add((len(rows), j))
                row.append(value)
            rows.append(row)
    return RawTable(list(header), rows, invalid)


def _specs_for(table, schema):
    by_name = {s.name: s for s in schema}
    try:
        return [by_name[n] for n in table.column_names]
    except KeyError as exc:
        raise SchemaError(f"schema does not cover column {exc.args[0]!r}") from None


def _out_of_range(value, spec):
    return spec.kind == "ordinal" and value is not None and value not in spec.order


def validate(table, schema):
    specs = _specs_for(table, schema)
    counts = {s.name: ColumnCounts() for s in specs}
    for i, row in enumerate(table.rows):
        for j, (value, spec) in enumerate(zip(row, specs)):
            c = counts[spec.name]
            if value is None:
                c.missing += 1
            elif (i, j) in table.invalid:
                c.type_invalid += 1
            elif _out_of_range(value, spec):
                c.out_of_range += 1

    dup_ids = []
    for j, spec in enumerate(specs):
        if spec.kind != "identifier":
            continue
        seen = Counter(r[j] for r in table.rows if r[j] is not None)
        dup_ids += [f"{spec.name}={v}" for v, k in seen.items() if k > 1]
    dup_rows = table.n_rows - len({tuple(r) for r in table.rows})

    mandatory = {
        "type_invalid": sum(c.type_invalid for c in counts.values()),
        "out_of_range": sum(c.out_of_range for c in counts.values()),
        "duplicate_ids": len(dup_ids),
        "duplicate_rows": dup_rows,
        "missing_required": sum(
            counts[s.name].missing for s in specs if s.kind in ("identifier", "target")
        ),
    }
    return ValidationReport(counts, dup_ids, dup_rows, mandatory)


def _median(values):
    return float(np.median(np.asarray(values, dtype=float)))


def _mode(values):
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, k in counts.items() if k == top)


def imputation_values(table, schema):
    """Fill value for each column whose policy imputes, from the present cells."""
    fills = {}
    for j, spec in enumerate(_specs_for(table, schema)):
        present = [
            r[j] for i, r in enumerate(table.rows)
            if r[j] is not None and (i, j) not in table.invalid and not _out_of_range(r[j], spec)
        ]
        if spec.missing_policy == "impute_median":
            if not spec.is_numeric:
                raise DataError(f"column {spec.name!r}: median imputation needs a numeric column")
            if not present:
                raise DataError(f"column {spec.name!r}: no numeric values to take a median of")
            fills[spec.name] = _median(present)
        elif spec.missing_policy == "impute_mode":
            if not present:
                raise DataError(f"column {spec.name!r}: no values to take a mode of")
            fills[spec.name] = _mode(present)
        elif spec.missing_policy == "sentinel_category":
            fills[spec.name] = SENTINEL
    return fills


def clean(table, schema, drop_duplicates=True, fills=None, require_target=True):
    """Drop duplicates and resolve every absent, invalid or out-of-range cell.

    Rows are deduplicated first (exact copies, then repeated identifiers with
    the first occurrence kept); rows missing a ``drop_row`` column go next;
    remaining gaps are filled per column policy. ``fills`` overrides the fill
    values, which is how stored training statistics reach batch prediction.
    Identifier columns may stay absent, and so may the target when
    ``require_target`` is false (rows headed for prediction).
    """
    specs = _specs_for(table, schema)
    rows = []
    for i, r in enumerate(table.rows):
        row = list(r)
        for j, spec in enumerate(specs):
            if (i, j) in table.invalid or _out_of_range(row[j], spec):
                row[j] = None
        rows.append(row)

    if drop_duplicates:
        seen_rows, seen_ids, kept = set(), set(), []
        id_cols = [j for j, s in enumerate(specs) if s.kind == "identifier"]
        for row in rows:
            key = tuple(row)
            ids = tuple((j, row[j]) for j in id_cols if row[j] is not None)
            if key in seen_rows or any(x in seen_ids for x in ids):
                continue
            seen_rows.add(key)
            seen_ids.update(ids)
            kept.append(row)
        rows = kept

    drop_cols = [j for j, s in enumerate(specs)
                 if s.missing_policy == "drop_row" and s.kind != "identifier"
                 and (require_target or s.kind != "target")]
    rows = [r for r in rows if all(r[j] is not None for j in drop_cols)]

    staged = RawTable(list(table.column_names), rows)
    if fills is None:
        fills = imputation_values(staged, schema)
    for row in rows:
        for j, spec in enumerate(specs):
            if row[j] is None and spec.name in fills:
                row[j] = fills[spec.name]
    return RawTable(list(table.column_names), rows, set(), dict(fills))


def detect_outliers(table, column, k=1.5):
    """Row indices outside the Tukey fences ``[Q1 - k*IQR, Q3 + k*IQR]``.

    Quartiles use linear interpolation between order statistics. Absent cells
    are ignored.
    """
    values = table.column(column)
    present = [(i, v) for i, v in enumerate(values) if v is not None]
    if any(not isinstance(v, float) for _, v in present):
        raise DataError(f"column {column!r} is not numeric")
    if len(present) < 4:
        raise DataError(f"column {column!r}: need at least 4 values, got {len(present)}")
    arr = np.array([v for _, v in present])
    q1, q3 = np.percentile(arr, [25, 75], method="linear")
    lo, hi = q1 - k * (q3 - q1), q3 + k * (q3 - q1)
    return {i for i, v in present if v < lo or v > hi}


@dataclass
class Encoder:
    """Everything needed to turn raw rows into model features again later."""

    schema: list[ColumnSpec]
    categories: dict[str, list[str]]
    fills: dict
    target_transform: str
    feature_names: list[str]

    def transform(self, table):
        """Encode a clean table; returns ``(X, warnings)``.

        Unseen categorical labels become an all-zeros one-hot group and add a
        warning; unknown ordinal labels raise unless the column falls back to
        the sentinel label.
        """
        specs = _specs_for(table, self.schema)
        pos = {s.name: j for j, s in enumerate(specs)}
        cols, warnings = [], []
        n = table.n_rows
        for spec in self.schema:
            if spec.kind in ("identifier", "target"):
                continue
            j = pos[spec.name]
            values = [r[j] for r in table.rows]
            if any(v is None for v in values):
                raise DataError(f"column {spec.name!r} still has absent cells; clean first")
            if spec.kind == "numeric":
                cols.append(np.array(values, dtype=float)[:, None])
            elif spec.kind == "ordinal":
                rank = {label: r for r, label in enumerate(spec.order)}
                out = np.empty(n)
                for i, v in enumerate(values):
                    if v not in rank:
                        if spec.missing_policy == "sentinel_category":
                            warnings.append(f"row {i}: {spec.name}={v!r} not in order, used {SENTINEL!r}")
                            v = SENTINEL
                        else:
                            raise DataError(f"column {spec.name!r}: label {v!r} not in declared order")
                    out[i] = rank[v]
                cols.append(out[:, None])
            else:
                cats = self.categories[spec.name]
                index = {c: k for k, c in enumerate(cats)}
                block = np.zeros((n, len(cats)))
                for i, v in enumerate(values):
                    k = index.get(str(v))
                    if k is None:
                        warnings.append(f"row {i}: unseen category {spec.name}={v!r}")
                    else:
                        block[i, k] = 1.0
                cols.append(block)
        X = np.hstack(cols) if cols else np.zeros((n, 0))
        return X, warnings

    def target(self, table):
        spec = target_spec(self.schema)
        j = table.column_names.index(spec.name)
        y = np.array([r[j] for r in table.rows], dtype=float)
        return forward_target(y, self.target_transform)

    def ids(self, table):
        id_cols = [table.column_names.index(s.name) for s in self.schema
                   if s.kind == "identifier" and s.name in table.column_names]
        if not id_cols:
            return [str(i) for i in range(table.n_rows)]
        j = id_cols[-1]
        return [str(r[j]) if r[j] is not None else str(i) for i, r in enumerate(table.rows)]

    def to_record(self):
        return {
            "schema": [
                {"name": s.name, "kind": s.kind, "missing_policy": s.missing_policy,
                 "order": list(s.order)} for s in self.schema
            ],
            "categories": self.categories,
            "fills": self.fills,
            "target_transform": self.target_transform,
            "feature_names": self.feature_names,
        }

    @classmethod
    def from_record(cls, rec):
        schema = [ColumnSpec(c["name"], c["kind"], c["missing_policy"], tuple(c["order"]))
                  for c in rec["schema"]]
        return cls(schema, {k: list(v) for k, v in rec["categories"].items()},
                   dict(rec["fills"]), rec["target_transform"], list(rec["feature_names"]))


def forward_target(y, transform):
    y = np.asarray(y, dtype=float)
    if transform == "identity":
        return y
    if transform == "log1p":
        if np.any(y <= 0):
            raise DataError("log1p target transform needs strictly positive targets")
        return np.log1p(y)
    raise DataError(f"unknown target transform {transform!r}")


def inverse_target(y, transform):
    y = np.asarray(y, dtype=float)
    if transform == "identity":
        return y
    if transform == "log1p":
        return np.expm1(y)
    raise DataError(f"unknown target transform {transform!r}")


def fit_encoder(table, schema, target_transform="log1p"):
    if target_transform not in TRANSFORMS:
        raise DataError(f"unknown target transform {target_transform!r}")
    _specs_for(table, schema)
    ordered = [s for s in schema if s.name in table.column_names]
    categories, names = {}, []
    for spec in ordered:
        j = table.column_names.index(spec.name)
        if spec.kind == "numeric" or spec.kind == "ordinal":
            names.append(spec.name)
        elif spec.kind == "categorical":
            cats = sorted({str(r[j]) for r in table.rows if r[j] is not None})
            categories[spec.name] = cats
            names += [f"{spec.name}={c}" for c in cats]
    return Encoder(ordered, categories, dict(table.fills), target_transform, names)


def encode(table, schema, target_transform="log1p"):
    """One-hot/rank encode a clean table into a numeric Dataset.

    Returns ``(dataset, encoder)``; the encoder replays the same mapping on
    new rows.
    """
    enc = fit_encoder(table, schema, target_transform)
    X, warnings = enc.transform(table)
    y = enc.target(table)
    provenance = (
        f"rows={table.n_rows}; features={len(enc.feature_names)}; "
        f"target_transform={target_transform}; one-hot={len(enc.categories)} columns; "
        f"imputed={len(enc.fills)} columns"
    )
    return Dataset(X, y, enc.feature_names, target_transform, provenance, enc.ids(table)), enc


def train_test_split(ds, test_fraction, seed):
    """Seeded disjoint split; the test side gets ``round(n * fraction)`` rows (half up)."""
    if not 0 < test_fraction < 1:
        raise DataError("test_fraction must lie in (0, 1)")
    n = ds.n
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise DataError(f"test_fraction={test_fraction} leaves an empty partition for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return ds.subset(train), ds.subset(test)


@dataclass(frozen=True)
class Scaler:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X):
        return apply_scaler(self, X)

    def invert(self, Z):
        return invert_scaler(self, Z)


def fit_scaler(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DataError("fit_scaler needs a non-empty 2-D matrix")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # constant columns: centered values are exactly zero, keep them so
    stds = np.where(stds > 0, stds, 1.0)
    return Scaler(means, stds)


def apply_scaler(scaler, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != scaler.means.shape[0]:
        raise DataError("scaler dimension mismatch")
    return (X - scaler.means) / scaler.stds


def invert_scaler(scaler, Z):
    return np.asarray(Z, dtype=float) * scaler.stds + scaler.means
