import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tmixad.metrics import MetricError, MetricReport, aggregate, auc_pr, auc_roc, evaluate


def test_perfect_ranking():
    assert auc_roc([0.1, 0.2, 0.9], [0, 0, 1]) == 1.0
    assert auc_pr([0.1, 0.2, 0.9], [0, 0, 1]) == 1.0


def test_reversed_ranking():
    assert auc_roc([0.9, 0.8, 0.1], [0, 0, 1]) == 0.0


def test_one_misordered_pair():
    assert auc_roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_average_precision_example():
    # positive ranked second of two
    assert auc_pr([0.9, 0.1], [0, 1]) == 0.5


def test_constant_scores():
    y = [0, 1, 0, 0, 1]
    assert auc_roc(np.ones(5), y) == 0.5
    # index tie-break puts the positives at ranks 2 and 5
    assert auc_pr(np.ones(5), y) == pytest.approx((1 / 2 + 2 / 5) / 2)


def test_single_class_errors():
    with pytest.raises(MetricError):
        auc_roc([1, 2], [1, 1])
    with pytest.raises(MetricError):
        auc_pr([1, 2], [0, 0])
    with pytest.raises(MetricError):
        auc_roc([1, 2, 3], [0, 1])
    with pytest.raises(MetricError):
        auc_roc([1, 2], [0, 2])


score_lists = st.integers(2, 25).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 6).map(float), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: 0 < sum(y) < len(y)),
    )
)


@settings(max_examples=150, deadline=None)
@given(score_lists)
def test_roc_matches_pairwise_oracle(data):
    s, y = data
    assert auc_roc(s, y) == float(oracles.auc_pairs(s, y))


@settings(max_examples=150, deadline=None)
@given(score_lists)
def test_pr_matches_pairwise_oracle(data):
    s, y = data
    terms = oracles.average_precision_terms(s, y)
    assert auc_pr(s, y) == math.fsum(terms) / sum(y)


@settings(max_examples=60, deadline=None)
@given(score_lists)
def test_monotone_transform_invariance(data):
    s, y = data
    t = np.exp(np.array(s)) * 3 + 1
    assert auc_roc(t, y) == auc_roc(s, y)
    assert auc_pr(t, y) == auc_pr(s, y)


@settings(max_examples=60, deadline=None)
@given(score_lists)
def test_complement_identity(data):
    s, y = data
    assert auc_roc(-np.array(s), y) == pytest.approx(1 - auc_roc(s, y), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(score_lists)
def test_bounds(data):
    s, y = data
    r = evaluate(s, y)
    assert 0.0 <= r.auc_roc <= 1.0
    assert 0.0 < r.auc_pr <= 1.0
    assert r.n_pos == sum(y) and r.n_neg == len(y) - sum(y)


def _rep(roc, pr=None):
    return MetricReport(roc, roc if pr is None else pr, 1, 1)


def test_aggregate_means_and_ranks():
    runs = {
        ("a", "d1"): [_rep(0.9), _rep(0.7)],
        ("b", "d1"): [_rep(0.6), _rep(0.6)],
        ("a", "d2"): [_rep(0.5), _rep(0.5)],
        ("b", "d2"): [_rep(0.5), _rep(0.5)],
    }
    agg = aggregate(runs)
    assert agg["mean"]["a"]["d1"]["auc_roc"] == pytest.approx(0.8)
    assert agg["avg_rank"]["auc_roc"] == {"a": 1.25, "b": 1.75}
    assert agg["runs_per_cell"] == 2


def test_aggregate_single_method_rank_one():
    agg = aggregate({("m", "d"): [_rep(0.3)]})
    assert agg["avg_rank"]["auc_pr"] == {"m": 1.0}


def test_aggregate_tie_shares_rank():
    agg = aggregate({("a", "d"): [_rep(0.5)], ("b", "d"): [_rep(0.5)]})
    assert agg["avg_rank"]["auc_roc"] == {"a": 1.5, "b": 1.5}


def test_aggregate_three_methods():
    agg = aggregate({("a", "d"): [_rep(0.9)], ("b", "d"): [_rep(0.8)], ("c", "d"): [_rep(0.1)]})
    assert [agg["avg_rank"]["auc_roc"][m] for m in "abc"] == [1.0, 2.0, 3.0]


def test_aggregate_errors():
    with pytest.raises(MetricError, match="missing"):
        aggregate({("a", "d1"): [_rep(0.5)], ("b", "d2"): [_rep(0.5)]})
    with pytest.raises(MetricError, match="unequal"):
        aggregate({("a", "d"): [_rep(0.5)], ("b", "d"): [_rep(0.5), _rep(0.4)]})
