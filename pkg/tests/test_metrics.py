import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from amesbench import metrics

from oracles import ref_metrics


def test_r_squared_examples():
    assert metrics.r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert metrics.r_squared([1, 2, 3], [1, 2, 4]) == 0.5
    assert metrics.r_squared([1, 2, 3], [2, 2, 2]) == 0.0
    with pytest.raises(metrics.MetricError):
        metrics.r_squared([4, 4, 4], [1, 2, 3])


def test_adjusted_r_squared_examples():
    assert metrics.adjusted_r_squared(1.0, 10, 3) == 1.0
    assert metrics.adjusted_r_squared(0.9, 10, 2) == pytest.approx(0.8714285714285714, rel=1e-15)
    assert metrics.adjusted_r_squared(0.37, 10, 0) == 0.37
    with pytest.raises(metrics.MetricError):
        metrics.adjusted_r_squared(0.5, 3, 2)


def test_error_metric_examples():
    assert metrics.mse([1, 2], [1, 2]) == 0 and metrics.rmse([1, 2], [1, 2]) == 0
    assert metrics.mse([1, 2, 3], [1, 2, 4]) == pytest.approx(1 / 3, rel=1e-15)
    assert metrics.rmse([1, 2, 3], [1, 2, 4]) == pytest.approx(math.sqrt(1 / 3), rel=1e-15)
    assert metrics.mse([0], [3]) == 9 and metrics.rmse([0], [3]) == 3
    assert metrics.mae([0, 0], [1, -1]) == 1
    assert metrics.mae([1, 2, 3], [1, 2, 4]) == pytest.approx(1 / 3, rel=1e-15)


def test_full_report_perfect_and_constant():
    rep = metrics.full_report([1, 2, 3, 5], [1, 2, 3, 5], 1)
    assert (rep.r2, rep.adj_r2, rep.mse, rep.rmse, rep.mae) == (1, 1, 0, 0, 0)
    with pytest.raises(metrics.MetricError):
        metrics.full_report([2, 2], [1, 3], 0)


def test_full_report_matches_reference_on_random_instance():
    rng = np.random.default_rng(7)
    y, yhat = rng.normal(size=100), rng.normal(size=100)
    rep, ref = metrics.full_report(y, yhat, 4), ref_metrics(y, yhat, 4)
    for name, want in ref.items():
        assert getattr(rep, name) == pytest.approx(want, rel=1e-12)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=40), finite)
def test_translation_invariance(pairs, c):
    y = np.array([p[0] for p in pairs])
    yhat = np.array([p[1] for p in pairs])
    for fn in (metrics.mse, metrics.rmse, metrics.mae):
        a, b = fn(y, yhat), fn(y + c, yhat + c)
        assert b == pytest.approx(a, rel=1e-6, abs=1e-6)


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=40),
       st.floats(-10, 10).filter(lambda a: abs(a) > 1e-2))
def test_scale_equivariance_and_r2_affine_invariance(pairs, alpha):
    y = np.array([p[0] for p in pairs])
    yhat = np.array([p[1] for p in pairs])
    assert metrics.mse(alpha * y, alpha * yhat) == pytest.approx(alpha**2 * metrics.mse(y, yhat), rel=1e-9, abs=1e-9)
    assert metrics.mae(alpha * y, alpha * yhat) == pytest.approx(abs(alpha) * metrics.mae(y, yhat), rel=1e-9, abs=1e-9)
    assume(np.ptp(y) > 1e-3)
    r = metrics.r_squared(y, yhat)
    assert metrics.r_squared(alpha * y + 3.0, alpha * yhat + 3.0) == pytest.approx(r, rel=1e-6, abs=1e-6)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=40))
def test_mae_at_most_rmse(pairs):
    y = [p[0] for p in pairs]
    yhat = [p[1] for p in pairs]
    assert metrics.mae(y, yhat) <= metrics.rmse(y, yhat) * (1 + 1e-12) + 1e-300
    assert metrics.rmse(y, yhat) ** 2 == pytest.approx(metrics.mse(y, yhat), rel=1e-12)


@given(st.integers(3, 60), st.integers(1, 5), st.floats(-2, 1))
def test_adjusted_never_exceeds_r2(n, k, r2):
    assume(n > k + 1)
    assert metrics.adjusted_r_squared(r2, n, k) <= r2 + 1e-15
