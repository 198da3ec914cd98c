"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line (shown even
without ``-s``) before asserting.
"""

import time

import numpy as np
import pytest

from lpa.cli import main
from lpa.experiments import (EXPERIMENT_CONFIG, chapter_domain_test, front_user_test, group_by_entity,
                             sample_size_test, split_author_test, superposition_test, working_set)
from lpa.ingest import build_counts, write_jsonl
from lpa.metrics import METRICS, distance, kld_eps
from lpa.signature import term_contributions
from lpa.vectorspace import FrequencyVector, build_dvr, build_pvrs, default_epsilon, extend_vector


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str) -> bool:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def random_vector(rng, vocab, max_size=30):
    size = int(rng.integers(1, max_size + 1))
    elems = rng.choice(vocab, size=size, replace=False)
    w = rng.random(size) + 1e-3
    return FrequencyVector([f"t{e:03d}" for e in elems], w / w.sum())


def test_criterion_1_metric_axioms(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    failures = []
    for metric in METRICS:
        for _ in range(1000):
            x, y = random_vector(rng, 50), random_vector(rng, 50)
            dxy = distance(metric, x, y, epsilon=1e-4)
            dyx = distance(metric, y, x, epsilon=1e-4)
            dxx = distance(metric, x, x, epsilon=1e-4)
            distinct = x != y
            if dxy < 0 or abs(dxy - dyx) > 1e-12 or abs(dxx) > 1e-12 or (distinct and dxy <= 0):
                failures.append((metric, x, y))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 10
    assert verdict(1, ok, f"{len(failures)} violations over 4000 pairs, {elapsed:.2f}s"), failures[:3]


def test_criterion_2_backoff_normalization(verdict):
    rng = np.random.default_rng(2)
    worst, beta_exact = 0.0, True
    for _ in range(1000):
        n = int(rng.integers(5, 400))
        w = rng.random(n)
        domain = FrequencyVector([f"d{i}" for i in range(n)], w / w.sum())
        k = int(rng.integers(1, n + 1))
        keep = rng.choice(n, size=k, replace=False)
        pw = rng.random(k)
        pvr = FrequencyVector([f"d{i}" for i in keep], pw / pw.sum())
        eps = float(rng.uniform(1e-9, 0.99 / max(n - k, 1)))
        ext = extend_vector(pvr, domain, eps)
        worst = max(worst, abs(float(ext.probs.sum()) - 1.0))
        dense = pvr.dense(domain)
        beta_exact &= ext.beta == 1.0 - (n - k) * eps
        beta_exact &= bool(np.all(ext.probs[dense > 0] == ext.beta * dense[dense > 0]))
    ok = worst <= 1e-9 and beta_exact
    assert verdict(2, ok, f"max |sum-1| = {worst:.2e}, beta exact: {beta_exact}")


def test_criterion_3_decomposition(reviews, verdict):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        domain = random_vector(rng, 400, 400)
        k = int(rng.integers(1, len(domain) + 1))
        keep = rng.choice(len(domain), size=k, replace=False)
        w = rng.random(k) + 1e-3
        entity = FrequencyVector([domain.elements[i] for i in keep], w / w.sum())
        total = sum(t.contribution for t in term_contributions(entity, domain, 1e-4))
        worst = max(worst, abs(total - kld_eps(entity, domain, 1e-4)))
    table = build_counts(reviews, EXPERIMENT_CONFIG)
    dvr = build_dvr(table)
    self_distance = kld_eps(dvr, dvr, default_epsilon(table))
    ok = worst <= 1e-9 and abs(self_distance) <= 1e-9
    assert verdict(3, ok, f"max decomposition error {worst:.2e}, whole-domain distance {self_distance:.1e}")


def test_criterion_4_virtual_chapter_validity(books, verdict):
    docs, _ = books
    start = time.perf_counter()
    r = chapter_domain_test(docs, seed=0)
    elapsed = time.perf_counter() - start
    ok = r.ttest.t < 0 and r.ttest.p < 0.005 and elapsed < 60
    assert verdict(4, ok, f"T({r.ttest.df})={r.ttest.t:.3f}, p={r.ttest.p:.2e}, {elapsed:.1f}s")


def test_criterion_5_superposition(books, verdict):
    docs, authors = books
    r = superposition_test(docs, authors, n_virtual=30, chapters_range=(15, 28), min_authors=5, seed=0)
    s = r.summary()
    ok = (min(r.virtual_authors.values()) >= 5 and s["virtual_mean"] < s["authentic_mean"]
          and s["virtual_std"] < s["authentic_std"])
    detail = (f"virtual {s['virtual_mean']:.3f}+-{s['virtual_std']:.3f} vs "
              f"authentic {s['authentic_mean']:.3f}+-{s['authentic_std']:.3f}")
    assert verdict(5, ok, detail)


def test_criterion_6_split_author_detection(reviews, verdict):
    r = split_author_test(reviews, n_entities=100, n_split=10, seed=0, rs=(1, 2, 3, 4))
    precision, recall, _ = r.sweep.scores[1]
    ok = recall == 1.0 and precision >= 0.8 and r.sweep.nested()
    detail = f"r=1 precision {precision:.3f} recall {recall:.2f}, nested {r.sweep.nested()}; " + ", ".join(
        f"r={row['r']}: {row['flagged']} flagged p={row['precision']:.2f} rc={row['recall']:.2f}"
        for row in r.sweep.rows())
    assert verdict(6, ok, detail)


def test_criterion_7_front_users(reviews, verdict):
    r = front_user_test(reviews, n_authentic=100, n_merged=10, authors_per_merged=5, seed=0, rs=(1,))
    flagged = set(r.sweep.reports[1].flagged)
    hits = len(flagged & set(r.truth))
    precision = r.sweep.scores[1][0]
    ok = hits >= 8 and precision >= 0.5
    assert verdict(7, ok, f"{hits}/10 merged flagged, precision {precision:.2f}, {len(flagged)} flagged")


def test_criterion_8_working_set(reviews, verdict):
    by = group_by_entity(reviews)
    docs = [d for e in sorted(by)[:100] for d in by[e]]
    table = build_counts(docs, EXPERIMENT_CONFIG)
    ws = working_set(build_pvrs(table), build_dvr(table), default_epsilon(table), sizes=(50, 100, 500, 1000))
    increasing = ws[50] < ws[100] < ws[500] < ws[1000]
    ok = increasing and (ws[1000] - ws[500]) < (ws[500] - ws[100])
    assert verdict(8, ok, ", ".join(f"N={k}: {v:.4f}" for k, v in ws.items()))


def test_criterion_9_sample_size(books, verdict):
    docs, _ = books
    r = sample_size_test(docs, fractions=(0.2, 0.4, 0.6, 0.8, 1.0))
    med = r.medians()
    ok = r.inversions() <= 1
    assert verdict(9, ok, f"{r.inversions()} inversions; " + ", ".join(f"{f}: {v:.1f}" for f, v in med.items()))


def test_criterion_10_determinism(tmp_path, verdict):
    from lpa.fixtures import reviews_corpus
    data = tmp_path / "posts.jsonl"
    write_jsonl(reviews_corpus(30, reviews=(32, 45), seed=21), data)
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["detect-sockpuppets", "--input", str(data), "--out", str(out), "--seed", "5",
                     "--no-figures", "--r", "1..4"]) == 0
        assert main(["activemap", "--input", str(data), "--out", str(out / "map.svg"), "--seed", "5",
                     "--min-posts", "1"]) == 0
        runs.append(out)
    same = {name: (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
            for name in ("distances.csv", "report.json", "map.svg")}
    assert verdict(10, all(same.values()), ", ".join(f"{k} {'identical' if v else 'differs'}"
                                                     for k, v in same.items()))
