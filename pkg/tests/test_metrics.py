import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lpa.errors import InputError
from lpa.metrics import (METRICS, RboConfig, cosine_distance, distance, divergence_terms, kld_eps, l1_distance, rbd,
                         rbo, resolve_log_base)
from lpa.vectorspace import FrequencyVector, extend_vector

fv = FrequencyVector.from_weights


def rbo_oracle(s, t, p, depth=4000):
    """Partial sum of the weighted agreements, lists held at their final overlap beyond their length."""
    total = 0.0
    last = max(len(s), len(t))
    for d in range(1, depth + 1):
        k = min(d, last)
        agreement = len(set(s[:k]) & set(t[:k])) / k
        total += (1 - p) * p ** (d - 1) * agreement
    return total


@pytest.mark.parametrize("p", [0.1, 0.5, 0.9, 0.98])
def test_rbd_identical_lists(p):
    assert rbd(list("abcde"), list("abcde"), RboConfig(p)) == pytest.approx(0.0, abs=1e-12)


def test_rbd_disjoint_lists():
    assert rbd(list("abc"), list("xyz")) == 1.0


def test_rbo_swapped_pair():
    assert rbo(["a", "b"], ["b", "a"], RboConfig(0.5)) == pytest.approx(0.5, abs=1e-12)
    assert rbo(["a", "b"], ["b", "a"], RboConfig(0.5)) == pytest.approx(rbo_oracle("ab", "ba", 0.5), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.permutations(list("abcdefgh")), st.integers(0, 8), st.floats(0.05, 0.95))
def test_rbo_matches_partial_sum_oracle(perm, cut, p):
    s, t = list("abcdefgh"), list(perm)[:max(cut, 1)] + [x for x in perm if x not in perm[:max(cut, 1)]]
    assert rbo(s, t, RboConfig(p)) == pytest.approx(rbo_oracle(s, t, p, depth=2000), abs=1e-9)


def test_rbo_uneven_lengths_and_empty():
    assert rbo([], []) == 1.0
    assert rbo(["a"], []) == 0.0
    assert 0 < rbo(["a", "b", "c"], ["a"]) < 1
    with pytest.raises(InputError):
        rbo(["a", "a"], ["a"])


def test_rbd_stable_under_shared_tail():
    head1, head2 = ["a", "b", "c"], ["b", "a", "c"]
    base = rbd(head1, head2, RboConfig(0.8))
    assert rbd(head1 + ["d", "e", "f"], head2 + ["d", "e", "f"], RboConfig(0.8)) == pytest.approx(base, abs=1e-12)


def test_rbo_config_validation():
    for p in (0, 1, 1.5):
        with pytest.raises(InputError):
            RboConfig(p)
    with pytest.raises(InputError):
        RboConfig(0.5, truncation_depth=0)


def test_cosine_examples():
    v = fv({"a": 0.6, "b": 0.4})
    assert cosine_distance(v, v) == 0.0
    assert cosine_distance(fv({"a": 1.0}), fv({"b": 1.0})) == 1.0
    assert cosine_distance(fv({"a": 1.0}), fv({"a": 0.5, "b": 0.5})) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)


def test_l1_examples():
    v = fv({"a": 0.6, "b": 0.4})
    assert l1_distance(v, v) == 0.0
    assert l1_distance(fv({"a": 0.5, "b": 0.5}), fv({"c": 1.0})) == 1.0
    assert l1_distance(fv({"a": 0.5, "b": 0.5}), fv({"a": 1.0})) == 0.5


def test_kld_examples():
    v1, v2 = fv({"a": 0.5, "b": 0.5}), fv({"a": 0.75, "b": 0.25})
    expected = 0.25 * math.log(1.5) + 0.25 * math.log(2)
    assert kld_eps(v1, v2, 0.01) == pytest.approx(expected, abs=1e-12)
    assert kld_eps(v2, v1, 0.01) == pytest.approx(expected, abs=1e-12)
    assert kld_eps(v2, v2, 0.01) == 0.0


def test_kld_log_base_is_a_scale_factor():
    v1, v2 = fv({"a": 0.5, "b": 0.5}), fv({"a": 0.75, "b": 0.25})
    nat = kld_eps(v1, v2, 0.01)
    assert kld_eps(v1, v2, 0.01, base="2") == pytest.approx(nat / math.log(2), rel=1e-12)
    assert kld_eps(v1, v2, 0.01, base=10) == pytest.approx(nat / math.log(10), rel=1e-12)
    with pytest.raises(InputError):
        resolve_log_base("3")


def test_kld_with_missing_elements_matches_direct_formula():
    dvr = fv({"a": 0.5, "b": 0.3, "c": 0.2})
    pvr = fv({"a": 0.8, "c": 0.2})
    eps = 0.01
    beta = 1 - eps
    a, b = np.array([0.8 * beta, eps, 0.2 * beta]), np.array([0.5, 0.3, 0.2])
    assert kld_eps(pvr, dvr, eps) == pytest.approx(float(np.sum((a - b) * np.log(a / b))), abs=1e-14)


def test_distance_dispatch():
    v1, v2 = fv({"a": 0.5, "b": 0.5}), fv({"a": 0.75, "b": 0.25})
    assert distance("l1", v1, v2) == l1_distance(v1, v2)
    with pytest.raises(InputError):
        distance("kld_eps", v1, v2)
    with pytest.raises(InputError):
        distance("hamming", v1, v2)


@given(st.floats(1e-12, 1.0), st.floats(1e-12, 1.0))
def test_divergence_terms_non_negative(a, b):
    assert divergence_terms(np.array([a]), np.array([b]))[0] >= 0


@st.composite
def vector_pair(draw):
    pool = [f"w{i}" for i in range(12)]
    def vec():
        elems = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=12, unique=True))
        w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=len(elems), max_size=len(elems))))
        return FrequencyVector(elems, w / w.sum())
    return vec(), vec()


@pytest.mark.parametrize("metric", METRICS)
@settings(max_examples=150, deadline=None)
@given(pair=vector_pair())
def test_semi_metric_axioms(metric, pair):
    x, y = pair
    eps = 1e-4
    dxy = distance(metric, x, y, epsilon=eps)
    dyx = distance(metric, y, x, epsilon=eps)
    assert dxy >= 0
    assert abs(dxy - dyx) <= 1e-12
    assert abs(distance(metric, x, x, epsilon=eps)) <= 1e-12
    if metric == "rbd":
        # rank distance: equal rankings are indiscernible
        assume(x.elements != y.elements)
    else:
        assume(not (x.elements == y.elements and np.allclose(x.probs, y.probs, rtol=0, atol=1e-12)))
    assert dxy > 0
