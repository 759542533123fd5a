"""Smoke tests for the rankforge python module."""

import math
import random

import pytest

import rankforge as rf


def test_ranking_and_pairs():
    assert rf.rank_descending([1.0, 3.0, 2.0]) == [3, 1, 2]
    assert rf.rank_descending([2.0, 2.0, 1.0]) == [1, 2, 3]
    assert rf.pair_constraints([3.0, 1.0, 2.0]) == [(0, 1), (0, 2), (2, 1)]


def test_metrics():
    labels = [3.0, 2.0, 1.0]
    assert rf.ndcg_at_k(labels, [0.9, 0.5, 0.1], 3) == pytest.approx(1.0)
    assert rf.ndcg_at_k(labels, [0.1, 0.5, 0.9], 3) == pytest.approx(0.6806060567602009)
    assert rf.dcg_at_k(labels, [1, 2, 3], 3) == pytest.approx(9.392789260714373)
    delta = rf.swap_delta_ndcg([3.0, 1.0], [1, 2], 0, 1, 2)
    assert delta == pytest.approx(0.2901902586031346)
    assert rf.weighted_swap_delta(delta, 1.0) == 0.0


def test_similarity():
    assert rf.kernel_width([[0.0], [2.0]]) == pytest.approx(0.25)
    sim = rf.input_similarity([[0.0, 0.0], [1.0, 0.0]], 1.0)
    assert sim[0][1] == pytest.approx(math.exp(-1.0))
    assert rf.output_distance([3.0, 2.0, 1.0], [1.0, 2.0, 3.0], 3) == pytest.approx(
        0.3193939432397991
    )


def test_lambda_and_mcnemar():
    lam, curvature, loss = rf.lambda_gradients([3.0, 1.0], [0.0, 0.0], 1.0, 2)
    assert lam[0] == pytest.approx(-0.1450951293015673)
    assert lam[1] == pytest.approx(0.1450951293015673)
    assert curvature[0] > 0.0
    assert loss > 0.0
    assert rf.mcnemar_pvalue(10, 2) == pytest.approx(0.0433, abs=1e-3)
    assert rf.mcnemar_pvalue(4, 4) == 1.0


def test_tree_fit_and_json():
    tree = rf.fit_tree([[0.0], [1.0]], [[0.0], [10.0]], max_leaves=2, min_leaf_fraction=0.5)
    assert tree.n_leaves == 2
    assert tree.predict([0.0]) == [0.0]
    assert tree.predict([1.0]) == [10.0]
    back = rf.RegressionTree.from_json(tree.to_json())
    assert back.predict([1.0]) == [10.0]


def test_train_lambdamart():
    groups = [(0, [0, 1], [1.0, 3.0])]
    model = rf.train_lambdamart(
        [[1.0]], [[0.0], [1.0]], groups, eta=0.5, max_trees=30, patience=30, truncation=2,
        max_leaves=2, min_leaf_fraction=0.5,
    )
    assert model.n_trees >= 1
    assert model.predict([1.0], [1.0]) > model.predict([1.0], [0.0])
    back = rf.ScorerModel.from_json(model.to_json())
    assert back.predict([1.0], [1.0]) == model.predict([1.0], [1.0])


def test_train_lmmf_recovers_structure():
    random.seed(11)
    n_users, n_items = 12, 8
    ustar = [[random.random(), random.random()] for _ in range(n_users)]
    vstar = [[random.random(), random.random()] for _ in range(n_items)]
    groups = []
    for u in range(n_users):
        labels = [
            float(round(4 * sum(a * b for a, b in zip(ustar[u], vstar[i])) / 2.0))
            for i in range(n_items)
        ]
        groups.append((u, list(range(n_items)), labels))
    model = rf.train_lmmf(
        ustar, vstar, groups, rank=2, eta=0.1, max_trees=150, patience=150, truncation=5,
        max_leaves=4, min_leaf_fraction=0.15, seed=3,
    )
    assert model.rank == 2
    assert len(model.user_factor(ustar[0])) == 2
    # training-set ranking quality should be clearly above chance
    ndcgs = []
    for u, items, labels in groups:
        scores = [model.predict(ustar[u], vstar[i]) for i in items]
        ndcgs.append(rf.ndcg_at_k(labels, scores, 5))
    assert sum(ndcgs) / len(ndcgs) > 0.8


def test_user_memory_scores():
    ratings = [(u, 0, 4.0) for u in range(5)] + [(0, 1, 2.0), (1, 1, 4.0)]
    scores = rf.user_memory_scores(
        [0.2], [[0.0], [0.1], [0.2], [0.3], [0.4]], ratings, n_items=3, k=5
    )
    assert scores[0] == pytest.approx(4.0)
    assert scores[1] == pytest.approx(3.0)
    assert scores[2] == 0.0
