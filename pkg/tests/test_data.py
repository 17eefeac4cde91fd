import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amesbench import data, schema

from conftest import SUBSET_CSV, SUBSET_SCHEMA

TOY_SCHEMA = schema.parse_schema("""
[columns]
PID = identifier
Area = numeric
Qual = ordinal Po < Fa < TA < Gd < Ex | impute_mode
Zone = categorical
Price = target
""")


def toy_table(write_csv, body):
    path = write_csv("toy.csv", "PID,Area,Qual,Zone,Price\n" + body)
    return data.load_csv(path, TOY_SCHEMA)


def test_header_only_file_gives_empty_table(write_csv):
    t = toy_table(write_csv, "")
    assert t.n_rows == 0 and t.n_cols == 5


def test_blank_cell_is_marked_absent(write_csv):
    t = toy_table(write_csv, "1,10,TA,a,100\n2,,Gd,b,200\n3,30,NA,a,300\n")
    assert t.n_rows == 3
    assert t.column("Area") == [10.0, None, 30.0]
    assert t.column("Qual")[2] is None


def test_header_mismatch_is_an_error(write_csv):
    path = write_csv("bad.csv", "PID,Area,Qual,Zone\n1,2,TA,a\n")
    with pytest.raises(data.DataError):
        data.load_csv(path, TOY_SCHEMA)
    # the same file is fine as prediction input
    assert data.load_csv(path, TOY_SCHEMA, require_target=False).n_rows == 1


def test_validate_clean_table_passes(write_csv):
    rep = data.validate(toy_table(write_csv, "1,10,TA,a,100\n2,20,Gd,b,200\n"), TOY_SCHEMA)
    assert rep.passed
    assert all(v == 0 for v in rep.mandatory.values())


def test_validate_flags_duplicate_id_and_bad_number(write_csv):
    t = toy_table(write_csv, "5286,10,TA,a,100\n5286,abc,Gd,b,200\n")
    rep = data.validate(t, TOY_SCHEMA)
    assert "PID=5286" in rep.duplicate_ids
    assert rep.columns["Area"].type_invalid == 1
    assert not rep.passed
    assert "fail" in rep.to_text()


def test_clean_imputes_median_and_mode(write_csv):
    spec = schema.parse_schema("[columns]\nA = numeric\nC = categorical | impute_mode\nY = target\n")
    path = write_csv("t.csv", "A,C,Y\n1,a,1\n,a,2\n3,,3\n")
    t = data.clean(data.load_csv(path, spec), spec)
    assert t.column("A") == [1.0, 2.0, 3.0]
    assert t.column("C") == ["a", "a", "a"]


def test_clean_drops_duplicate_rows_and_is_idempotent(write_csv):
    t = toy_table(write_csv, "1,10,TA,a,100\n1,10,TA,a,100\n2,,Gd,b,200\n3,5,Ex,,300\n")
    c1 = data.clean(t, TOY_SCHEMA)
    assert c1.n_rows == 3
    c2 = data.clean(c1, TOY_SCHEMA)
    assert c2.rows == c1.rows


def test_clean_drops_rows_without_target(write_csv):
    t = toy_table(write_csv, "1,10,TA,a,100\n2,20,Gd,b,\n")
    assert data.clean(t, TOY_SCHEMA).n_rows == 1


def _outlier_table(values):
    rows = [[float(v), 1.0] for v in values]
    return data.RawTable(["x", "y"], rows)


@pytest.mark.parametrize("values,expected", [
    ([1, 1, 1, 1, 100], {4}),
    ([5, 5, 5, 5], set()),
    ([-1, 0, 1, 0], set()),
])
def test_detect_outliers(values, expected):
    assert data.detect_outliers(_outlier_table(values), "x") == expected


@given(st.lists(st.integers(-50, 50), min_size=4, max_size=30), st.randoms(use_true_random=False))
def test_outliers_follow_rows_under_permutation(values, rnd):
    perm = list(range(len(values)))
    rnd.shuffle(perm)
    base = data.detect_outliers(_outlier_table(values), "x")
    moved = data.detect_outliers(_outlier_table([values[p] for p in perm]), "x")
    assert moved <= set(range(len(values)))
    assert {perm[i] for i in moved} == base


def test_encode_one_hot_ordinal_and_log_target(write_csv):
    t = data.clean(toy_table(write_csv, f"1,10,TA,a,{math.e - 1!r}\n2,20,Gd,b,9\n3,30,Po,a,4\n"),
                   TOY_SCHEMA)
    ds, enc = data.encode(t, TOY_SCHEMA, "log1p")
    assert ds.feature_names == ["Area", "Qual", "Zone=a", "Zone=b"]
    np.testing.assert_array_equal(ds.X[:, 2], [1, 0, 1])
    np.testing.assert_array_equal(ds.X[:, 3], [0, 1, 0])
    assert ds.X[0, 1] == 2.0
    assert ds.y[0] == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_allclose(data.inverse_target(ds.y, "log1p")[1:], [9, 4])
    assert ds.ids == ["1", "2", "3"]


def test_unseen_category_maps_to_zero_group(write_csv):
    t = data.clean(toy_table(write_csv, "1,10,TA,a,100\n2,20,Gd,b,200\n"), TOY_SCHEMA)
    _, enc = data.encode(t, TOY_SCHEMA)
    new = data.clean(toy_table(write_csv, "9,15,TA,zz,100\n"), TOY_SCHEMA, fills=enc.fills)
    X, warnings = enc.transform(new)
    np.testing.assert_array_equal(X[0, 2:], [0, 0])
    assert any("zz" in w for w in warnings)


def test_encoder_record_roundtrip(write_csv):
    t = data.clean(toy_table(write_csv, "1,10,TA,a,100\n2,20,Gd,b,200\n"), TOY_SCHEMA)
    ds, enc = data.encode(t, TOY_SCHEMA)
    back = data.Encoder.from_record(enc.to_record())
    np.testing.assert_array_equal(back.transform(t)[0], ds.X)


def test_subset_encodes_cleanly():
    specs = schema.load_schema(SUBSET_SCHEMA)
    table = data.load_csv(SUBSET_CSV, specs)
    assert data.validate(table, specs).passed
    ds, enc = data.encode(data.clean(table, specs), specs)
    assert np.isfinite(ds.X).all() and np.isfinite(ds.y).all()
    # each one-hot group sums to one per row
    for col, cats in enc.categories.items():
        idx = [ds.feature_names.index(f"{col}={c}") for c in cats]
        np.testing.assert_array_equal(ds.X[:, idx].sum(axis=1), 1.0)


def _toy_dataset(n):
    X = np.arange(2.0 * n).reshape(n, 2)
    return data.Dataset(X, np.arange(float(n)), ["a", "b"], "identity", "", [str(i) for i in range(n)])


def test_split_sizes_and_errors():
    tr, te = data.train_test_split(_toy_dataset(10), 0.2, seed=3)
    assert (tr.n, te.n) == (8, 2)
    tr2, te2 = data.train_test_split(_toy_dataset(10), 0.2, seed=3)
    assert tr.ids == tr2.ids and te.ids == te2.ids
    with pytest.raises(data.DataError):
        data.train_test_split(_toy_dataset(10), 0.999, seed=0)


@given(st.integers(2, 60), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_split_is_disjoint_and_exhaustive(n, frac, seed):
    n_test = int(math.floor(n * frac + 0.5))
    if n_test < 1 or n_test > n - 1:
        with pytest.raises(data.DataError):
            data.train_test_split(_toy_dataset(n), frac, seed)
        return
    tr, te = data.train_test_split(_toy_dataset(n), frac, seed)
    ids = tr.ids + te.ids
    assert sorted(ids, key=int) == [str(i) for i in range(n)]
    assert te.n == n_test


def test_scaler_examples():
    s = data.fit_scaler(np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]]))
    Z = s.apply(np.array([[1.0, 7.0], [2.0, 7.0], [3.0, 7.0]]))
    np.testing.assert_allclose(Z[:, 0], [-math.sqrt(1.5), 0.0, math.sqrt(1.5)], rtol=1e-15)
    np.testing.assert_array_equal(Z[:, 1], 0.0)


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=1, max_size=20))
def test_scaler_roundtrip(rows):
    X = np.array(rows)
    s = data.fit_scaler(X)
    back = s.invert(s.apply(X))
    np.testing.assert_allclose(back, X, rtol=1e-10, atol=1e-10 * max(1.0, np.abs(X).max()))
