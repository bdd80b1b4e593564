import math

import numpy as np
import pytest

from leakdet.models import iforest


def exact_c(n):
    if n <= 1:
        return 0.0
    harmonic = sum(1.0 / i for i in range(1, n))
    return 2.0 * harmonic - 2.0 * (n - 1) / n


def test_c2_is_exactly_one():
    assert iforest.average_path_length(2) == 1.0  # H(1) = 1


@pytest.mark.parametrize("n", [0, 1, 2, 3, 10, 256])
def test_average_path_length_matches_hand_formula(n):
    assert iforest.average_path_length(n) == pytest.approx(exact_c(n), rel=1e-12)


def test_scores_in_unit_interval():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((400, 3))
    params = iforest.fit(X, iforest.IforestConfig(), np.random.default_rng(1))
    scores = [iforest.score(params, x) for x in X[:50]]
    scores.append(iforest.score(params, np.full(3, 25.0)))
    assert all(0.0 < s < 1.0 for s in scores)


def test_far_outlier_scores_above_every_training_point():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((500, 2))
    params = iforest.fit(X, iforest.IforestConfig(), np.random.default_rng(3))
    training_scores = [iforest.score(params, x) for x in X]
    outlier = iforest.score(params, np.array([10.0, 10.0]))
    assert outlier > max(training_scores)


def test_tree_count_and_subsample():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((1000, 4))
    params = iforest.fit(X, iforest.IforestConfig(), np.random.default_rng(5))
    assert len(params.trees) == 120
    assert params.subsample == 256
    small = iforest.fit(X[:50], iforest.IforestConfig(), np.random.default_rng(6))
    assert small.subsample == 50


def test_depth_capped_at_log2_subsample():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((600, 5))
    params = iforest.fit(X, iforest.IforestConfig(), np.random.default_rng(8))
    cap = math.ceil(math.log2(params.subsample))

    def max_depth(tree, node=0, depth=0):
        if tree.feature[node] < 0:
            return depth
        return max(max_depth(tree, tree.left[node], depth + 1),
                   max_depth(tree, tree.right[node], depth + 1))

    assert max(max_depth(t) for t in params.trees) <= cap


def test_duplicate_points_collapse_to_leaf():
    X = np.tile([1.0, 2.0], (50, 1))
    params = iforest.fit(X, iforest.IforestConfig(n_trees=10), np.random.default_rng(9))
    for tree in params.trees:
        assert tree.feature[0] == -1  # no splittable dimension at the root
    score = iforest.score(params, np.array([1.0, 2.0]))
    assert 0.0 < score < 1.0


def test_fit_deterministic():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((300, 3))
    a = iforest.fit(X, iforest.IforestConfig(n_trees=20), np.random.default_rng(11))
    b = iforest.fit(X, iforest.IforestConfig(n_trees=20), np.random.default_rng(11))
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature)
        assert np.array_equal(ta.threshold, tb.threshold)


def test_too_few_points_rejected():
    with pytest.raises(ValueError):
        iforest.fit(np.zeros((1, 2)), iforest.IforestConfig())
