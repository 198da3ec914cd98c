import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kurtosis, spearmanr

from lpa.errors import DegenerateDistributionError, InputError
from lpa.metrics import distance
from lpa.selection import (DistributionStats, HeadTailSplit, compare_metrics, distance_distribution, excess_kurtosis,
                           missing_contribution, restricted_distance, tail_sensitivity)
from lpa.vectorspace import FrequencyVector, build_dvr, build_pvrs, default_epsilon, extend_vector
from lpa.experiments import EXPERIMENT_CONFIG
from lpa.ingest import build_counts

fv = FrequencyVector.from_weights


def test_kurtosis_constant_samples_degenerate():
    with pytest.raises(DegenerateDistributionError):
        excess_kurtosis([2.0] * 10)


def test_kurtosis_alternating():
    assert excess_kurtosis([-1, 1, -1, 1]) == pytest.approx(-2.0, abs=1e-12)


def test_kurtosis_normal_samples():
    x = np.random.default_rng(0).standard_normal(100_000)
    assert abs(excess_kurtosis(x)) < 0.1


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=40).filter(lambda v: np.ptp(v) > 1e-3))
def test_kurtosis_matches_scipy_population_estimator(values):
    assert excess_kurtosis(values) == pytest.approx(kurtosis(values, fisher=True, bias=True), rel=1e-7, abs=1e-7)


def test_two_entities_at_equal_distance_are_degenerate():
    with pytest.raises(DegenerateDistributionError):
        DistributionStats.from_samples([0.3, 0.3])


def test_distribution_needs_four_entities():
    dvr = fv({"a": 0.5, "b": 0.5})
    with pytest.raises(InputError):
        distance_distribution({"x": dvr}, dvr, "l1")


def test_distribution_stats_ordering(small_domain):
    _, dvr, pvrs, eps = small_domain
    s = distance_distribution(pvrs, dvr, "kld_eps", epsilon=eps)
    assert s.min <= s.median <= s.max and s.std >= 0 and s.count == len(pvrs)


DVR10 = fv({f"e{i}": w for i, w in enumerate([0.2, 0.15, 0.12, 0.1, 0.1, 0.09, 0.08, 0.07, 0.05, 0.04])})


def test_entity_with_whole_head_has_no_missing_contribution():
    split = HeadTailSplit.from_dvr(DVR10, 4)
    pvr = fv({"e0": 0.1, "e1": 0.4, "e2": 0.3, "e3": 0.2})
    assert missing_contribution(pvr, DVR10, split, "kld_eps", epsilon=0.001) == 0.0
    assert missing_contribution(pvr, DVR10, split, "l1") == 0.0


def test_cosine_missing_contribution_is_zero(small_domain):
    _, dvr, pvrs, _ = small_domain
    split = HeadTailSplit.from_dvr(dvr, 1000)
    assert all(missing_contribution(p, dvr, split, "cosine") == 0.0 for p in pvrs.values())


def test_half_head_missing_matches_term_oracle():
    split = HeadTailSplit.from_dvr(DVR10, 4)
    pvr = fv({"e0": 0.3, "e2": 0.3, "e5": 0.2, "e9": 0.2})
    eps = 0.001
    ext = extend_vector(pvr, DVR10, eps)
    head = list(range(4))
    a, b = ext.probs[head], DVR10.probs[head]
    terms = (a - b) * np.log(a / b)
    expected = (terms[1] + terms[3]) / terms.sum()
    got = missing_contribution(pvr, DVR10, split, "kld_eps", epsilon=eps)
    assert 0 < got < 1
    assert got == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([f"e{i}" for i in range(10)]), min_size=1, max_size=10, unique=True),
       st.sampled_from(["l1", "kld_eps", "cosine"]), st.integers(1, 10))
def test_missing_contribution_is_a_fraction(elems, metric, k):
    pvr = fv({e: 1.0 / len(elems) for e in elems})
    f = missing_contribution(pvr, DVR10, HeadTailSplit.from_dvr(DVR10, k), metric, epsilon=0.001)
    assert 0.0 <= f <= 1.0


@pytest.mark.parametrize("metric", ["l1", "kld_eps"])
def test_head_and_tail_recover_full_distance(metric, small_domain):
    _, dvr, pvrs, eps = small_domain
    split = HeadTailSplit.from_dvr(dvr, 300)
    for p in list(pvrs.values())[:10]:
        head = restricted_distance(p, dvr, split.head_elements, metric, eps)
        tail = restricted_distance(p, dvr, split.tail_elements, metric, eps)
        assert head + tail == pytest.approx(distance(metric, p, dvr, epsilon=eps), abs=1e-9)


def test_split_is_disjoint():
    split = HeadTailSplit.from_dvr(DVR10, 4)
    assert split.head_elements == DVR10.elements[:4]
    assert not set(split.head_elements) & set(split.tail_elements)
    with pytest.raises(InputError):
        HeadTailSplit.from_dvr(DVR10, 0)


def test_tail_identical_to_domain_is_zero():
    dvr = fv({"a": 0.4, "b": 0.2, "c": 0.2, "d": 0.1, "e": 0.1})
    pvr = fv({"a": 0.2, "b": 0.4, "c": 0.2, "d": 0.1, "e": 0.1})
    split = HeadTailSplit.from_dvr(dvr, 2)
    for metric in ("l1", "kld_eps"):
        assert restricted_distance(pvr, dvr, split.tail_elements, metric, 0.01) == pytest.approx(0.0, abs=1e-15)


@pytest.fixture(scope="module")
def review_domain(reviews):
    table = build_counts(reviews, EXPERIMENT_CONFIG)
    dvr = build_dvr(table)
    return dvr, build_pvrs(table), default_epsilon(table), HeadTailSplit.from_dvr(dvr, 1000)


def test_l1_tail_correlates_with_missing_elements(review_domain):
    dvr, pvrs, eps, split = review_domain
    tail = set(split.tail_elements)
    ids = sorted(pvrs)
    l1 = [restricted_distance(pvrs[e], dvr, split.tail_elements, "l1") for e in ids]
    missing = [len(tail) - sum(1 for x in pvrs[e].elements if x in tail) for e in ids]
    rho, _ = spearmanr(l1, missing)
    assert rho > 0


def test_kld_tail_mean_below_l1_tail_mean(review_domain):
    dvr, pvrs, eps, split = review_domain
    kld = tail_sensitivity(pvrs, dvr, split, "kld_eps", epsilon=eps)
    l1 = tail_sensitivity(pvrs, dvr, split, "l1")
    assert kld.mean < l1.mean


def test_compare_metrics_reports_every_metric(small_domain):
    _, dvr, pvrs, eps = small_domain
    reports = compare_metrics(pvrs, dvr, eps, head_k=200)
    assert [r.metric for r in reports] == ["rbd", "cosine", "l1", "kld_eps"]
    by = {r.metric: r for r in reports}
    assert by["rbd"].missing_head_fraction is None and by["cosine"].missing_head_fraction == 0.0
    assert 0 < by["kld_eps"].missing_head_fraction < 1
    assert by["l1"].tail is not None and by["cosine"].tail is None
