from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amesbench import boost, cart

from oracles import exact_tree, frac_matrix, same_structure

G = boost.GradStats


def test_leaf_weight_examples():
    assert boost.leaf_weight(G(-6.0, 3.0), 0.0) == 2.0
    assert abs(boost.leaf_weight(G(5.0, 2.0), 1e12)) < 1e-11
    assert boost.leaf_weight(G(0.0, 4.0), 1.0) == 0.0


def test_split_gain_examples():
    assert boost.split_gain(G(-2, 1), G(2, 1), 0, 0) == 4.0
    assert boost.split_gain(G(1, 1), G(1, 1), 0, 0) == 0.0
    assert boost.split_gain(G(1, 1), G(1, 1), 0, 0.5) == -0.5


def fit(X, y, **kw):
    return boost.fit_boost(np.asarray(X, dtype=float), np.asarray(y, dtype=float),
                           boost.BoostParams(**kw))


def test_single_leaf_is_mean():
    m = fit([[0.0], [1.0], [2.0]], [2, 4, 6], n_rounds=1, max_depth=0, lam=0, learning_rate=1,
            base_score=0.0, min_child_weight=0)
    assert m.trees[0].value == 4.0
    empty = fit([[0.0], [1.0]], [1, 3], n_rounds=0, base_score=0.5)
    np.testing.assert_array_equal(empty.predict([[5.0], [7.0]]), 0.5)


def test_step_data_recovered_in_one_round():
    m = fit([[1], [2], [3], [4]], [0, 0, 10, 10], n_rounds=1, max_depth=1, lam=0, gamma=0,
            learning_rate=1, min_child_weight=0)
    np.testing.assert_allclose(m.predict([[1], [2], [3], [4]]), [0, 0, 10, 10], atol=1e-12)


def test_additive_composition():
    stumps = (cart.Node(0, 0.5, cart.Leaf(1.0, 1), cart.Leaf(1.0, 1)), cart.Leaf(-0.5, 1))
    m = boost.BoostModel(0.0, stumps, boost.BoostParams(), np.zeros(1))
    np.testing.assert_array_equal(m.predict([[0.0], [3.0]]), [0.5, 0.5])


def test_prediction_replays_training_running_sum():
    rng = np.random.default_rng(8)
    X, y = rng.normal(size=(60, 4)), rng.normal(size=60)
    m = fit(X, y, n_rounds=25, max_depth=3, subsample=0.7, seed=3)
    np.testing.assert_array_equal(m.predict(X), m.train_pred)


def test_importance_examples():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(200, 4))
    y = 5.0 * (X[:, 0] > 0.5)
    m = fit(X, y, n_rounds=20, max_depth=2)
    imp = boost.feature_importance(m)
    assert int(np.argmax(imp)) == 0
    assert imp.sum() == pytest.approx(1.0, abs=1e-12)
    stumps = fit(X, y, n_rounds=3, max_depth=0)
    np.testing.assert_array_equal(boost.feature_importance(stumps), 0.0)


grid = st.lists(st.tuples(st.sampled_from([0.0, 1.0, 2.0]), st.sampled_from([0.0, 1.0, 3.0])),
                min_size=1, max_size=6)


@given(grid, st.sampled_from([0.0, 1.0]), st.sampled_from([0.0, 0.25]), st.sampled_from([1, 2]))
def test_one_round_matches_exact_oracle(pairs, lam, gamma, depth):
    X = np.array([[p[0]] for p in pairs])
    y = np.array([p[1] for p in pairs])
    m = fit(X, y, n_rounds=1, max_depth=depth, lam=lam, gamma=gamma, learning_rate=1.0,
            min_child_weight=0.0)
    base = Fraction(m.base_score)
    g = [base - Fraction(v) for v in y]
    ref = exact_tree(frac_matrix(X), g, [Fraction(1)] * len(y), list(range(len(y))), 0, depth,
                     kind="gradient", lam=lam, gamma=gamma)
    assert same_structure(m.trees[0], ref)
    for leaf in cart.leaves(m.trees[0]):
        assert leaf.value == pytest.approx(-leaf.g_sum / (leaf.h_sum + lam), rel=1e-12, abs=1e-12)


@given(st.integers(0, 10_000))
def test_training_loss_never_increases(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
    m = fit(X, y, n_rounds=15, max_depth=3, gamma=0.0, min_child_weight=0.0, subsample=1.0)
    trace = np.array(m.loss_trace)
    start = np.mean((y - y.mean()) ** 2)
    assert trace[0] <= start + 1e-12
    assert np.all(np.diff(trace) <= 1e-12)


@given(st.integers(0, 10_000))
def test_accepted_splits_have_positive_recomputed_gain(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(30, 2)), rng.normal(size=30)
    m = fit(X, y, n_rounds=5, max_depth=3, lam=0.5, gamma=0.01, learning_rate=0.3)
    for tree in m.trees:
        for node in cart.iter_nodes(tree):
            if isinstance(node, cart.Node):
                l, r = node.left, node.right
                assert boost.split_gain(G(l.g_sum, l.h_sum), G(r.g_sum, r.h_sum), 0.5, 0.01) > 0


def test_lambda_shrinks_leaf_weights_for_fixed_structure():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(50, 2)), rng.normal(size=50)
    tree = fit(X, y, n_rounds=1, max_depth=2, lam=0.0).trees[0]
    prev = None
    for lam in (0.0, 0.5, 2.0, 10.0):
        w = np.array([abs(boost.leaf_weight(G(l.g_sum, l.h_sum), lam)) for l in cart.leaves(tree)])
        if prev is not None:
            assert np.all(w <= prev + 1e-15)
        prev = w


def test_warm_start_continues_exactly():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(50, 3)), rng.normal(size=50)
    full = fit(X, y, n_rounds=10, max_depth=2, subsample=0.8, seed=4)
    first = fit(X, y, n_rounds=6, max_depth=2, subsample=0.8, seed=4)
    rest = boost.fit_boost(X, y, boost.BoostParams(n_rounds=4, max_depth=2, subsample=0.8, seed=4),
                           init_model=first)
    assert rest.trees == full.trees
    np.testing.assert_array_equal(rest.predict(X), full.predict(X))
    np.testing.assert_array_equal(rest.importance_raw, full.importance_raw)


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        boost.BoostParams(learning_rate=0.0)
    with pytest.raises(ValueError):
        boost.BoostParams(subsample=1.5)
    with pytest.raises(ValueError):
        fit(np.zeros((3, 1)), np.zeros(3), subsample=0.2)
