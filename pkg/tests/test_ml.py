import numpy as np

from octopus.ml import BaggedTrees, DecisionTree, LinearMargin


def _separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 5))
    y = (X[:, 0] + 2 * X[:, 2] > 0).astype(int)
    return X, y


def test_tree_fits_separable_perfectly():
    X, y = _separable()
    tree = DecisionTree(max_depth=10, min_leaf=1)
    tree.fit(X, y, np.random.default_rng(1))
    assert ((tree.predict_proba(X) >= 0.5) == y.astype(bool)).mean() == 1.0


def test_bagged_trees_training_accuracy_and_determinism():
    X, y = _separable(300)
    m1 = BaggedTrees(n_trees=15).fit(X, y, seed=9)
    m2 = BaggedTrees(n_trees=15).fit(X, y, seed=9)
    p1, p2 = m1.predict_proba(X), m2.predict_proba(X)
    assert np.array_equal(p1, p2)
    assert ((p1 >= 0.5) == y.astype(bool)).mean() >= 0.99
    m3 = BaggedTrees(n_trees=15).fit(X, y, seed=10)
    assert not np.array_equal(p1, m3.predict_proba(X))


def test_label_permutation_gives_chance_accuracy():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(400, 8))
    y = rng.integers(0, 2, size=400)
    train, test = slice(0, 300), slice(300, 400)
    model = BaggedTrees(n_trees=15, max_depth=4).fit(X[train], y[train], seed=2)
    acc = ((model.predict_proba(X[test]) >= 0.5) == y[test].astype(bool)).mean()
    assert abs(acc - 0.5) <= 0.12


def test_linear_margin_separable_and_deterministic():
    X, y = _separable(250, seed=4)
    m1 = LinearMargin().fit(X, y, seed=5)
    m2 = LinearMargin().fit(X, y, seed=5)
    assert np.allclose(m1.w, m2.w)
    assert (m1.predict(X) == y).mean() >= 0.97


def test_serialization_round_trips_bit_exact():
    X, y = _separable(150, seed=6)
    trees = BaggedTrees(n_trees=8).fit(X, y, seed=7)
    trees2 = BaggedTrees.from_dict(trees.to_dict())
    assert np.array_equal(trees.predict_proba(X), trees2.predict_proba(X))
    lin = LinearMargin().fit(X, y, seed=8)
    lin2 = LinearMargin.from_dict(lin.to_dict())
    assert np.array_equal(lin.decision_function(X), lin2.decision_function(X))
