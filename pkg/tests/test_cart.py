from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amesbench import cart

from oracles import exact_tree, frac_matrix, same_structure

VAR = cart.VarianceCriterion()
STEP_X = np.array([[1.0], [2.0], [3.0], [4.0]])
STEP_Y = np.array([0.0, 0.0, 10.0, 10.0])


def grow_var(X, y, **kw):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return cart.grow(X, y, np.ones(len(y)), cart.GrowthParams(**kw), VAR)


def test_step_data_split():
    found = cart.best_split(np.arange(4), STEP_X, STEP_Y, np.ones(4), cart.GrowthParams(), VAR)
    f, thr, gain = found
    assert (f, thr) == (0, 2.5)
    tree = grow_var(STEP_X, STEP_Y, max_depth=1)
    assert tree.left.value == 0.0 and tree.right.value == 10.0
    np.testing.assert_array_equal(cart.FlatTree(tree).predict(STEP_X), STEP_Y)


def test_constant_feature_never_splits():
    X = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
    tree = grow_var(X, [0, 1, 0, 1, 5])
    assert all(n.feature_index == 1 for n in cart.iter_nodes(tree) if isinstance(n, cart.Node))


def test_copied_feature_tie_goes_to_lowest_index():
    X = np.column_stack([[1.0, 2.0, 3.0, 4.0]] * 2)
    f, thr, _ = cart.best_split(np.arange(4), X, STEP_Y, np.ones(4), cart.GrowthParams(), VAR)
    assert (f, thr) == (0, 2.5)


def test_depth_zero_and_identical_rows_give_single_leaf():
    leaf = grow_var(STEP_X, STEP_Y, max_depth=0)
    assert isinstance(leaf, cart.Leaf) and leaf.value == 5.0
    same = grow_var(np.ones((6, 2)), [1, 2, 3, 4, 5, 6])
    assert isinstance(same, cart.Leaf)


def test_constant_target_leaf_is_exact():
    tree = grow_var(np.arange(10.0)[:, None], np.full(10, 0.1))
    assert isinstance(tree, cart.Leaf) and tree.value == 0.1


def test_boundary_routes_left():
    stump = cart.Node(0, 2.5, cart.Leaf(0.0, 1), cart.Leaf(10.0, 1))
    assert cart.predict_tree(stump, [2.5]) == 0.0
    assert cart.predict_tree(cart.Leaf(5.0, 1), [123.0]) == 5.0
    np.testing.assert_array_equal(cart.FlatTree(stump).predict([[2.5], [2.6]]), [0.0, 10.0])


def test_record_roundtrip_is_exact():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(40, 3)), rng.normal(size=40)
    tree = grow_var(X, y, max_depth=4)
    back = cart.tree_from_record(cart.tree_to_record(tree))
    assert back == tree


small = st.lists(
    st.tuples(st.sampled_from([0, 1, 2, 3]), st.sampled_from([0, 1, 2]),
              st.sampled_from([-1.0, 0.0, 0.5, 2.0, 7.0])),
    min_size=1, max_size=6,
)


@given(small, st.sampled_from([1, 2]), st.sampled_from([0, 1, 2]))
def test_matches_exact_greedy_oracle(rows, d, depth):
    X = np.array([[r[0], r[1]][:d] for r in rows], dtype=float)
    y = np.array([r[2] for r in rows])
    tree = grow_var(X, y, max_depth=depth)
    Xf = frac_matrix(X)
    yf = [Fraction(v) for v in y]
    ref = exact_tree(Xf, yf, [Fraction(1)] * len(y), list(range(len(y))), 0, depth)
    assert same_structure(tree, ref)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_partition_and_refinement(seed, depth):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(30, 3)).astype(float)
    y = rng.normal(size=30)
    shallow = grow_var(X, y, max_depth=depth - 1)
    deep = grow_var(X, y, max_depth=depth)
    leaves = cart.FlatTree(deep).apply(X)
    assert sum(l.n_samples for l in cart.leaves(deep)) == 30
    assert len(np.unique(leaves)) == len(cart.leaves(deep))
    sse = lambda t: float(np.sum((y - cart.FlatTree(t).predict(X)) ** 2))
    assert sse(deep) <= sse(shallow) + 1e-12
    assert cart.depth(deep) <= depth
    again = grow_var(X, y, max_depth=depth)
    assert again == deep


def test_feature_sampling_is_seeded():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(50, 6)), rng.normal(size=50)
    p = cart.GrowthParams(max_depth=3, max_features=2)
    a = cart.grow(X, y, np.ones(50), p, VAR, rng=np.random.default_rng(5))
    b = cart.grow(X, y, np.ones(50), p, VAR, rng=np.random.default_rng(5))
    assert a == b
    with pytest.raises(ValueError):
        cart.grow(X, y, np.ones(50), p, VAR)
