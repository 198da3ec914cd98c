"""Impersonation detection: sockpuppet pairs, front-users, virtual entities, and the baselines."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy import stats as sps
from scipy.spatial.distance import cdist

from .errors import DegenerateDistributionError, InputError, SamplingError
from .ingest import CountTable, EntityDocument
from .selection import DistributionStats
from .signature import Signature, check_same_domain, transform_weights


@dataclass(frozen=True)
class ThresholdRule:
    """Flag values strictly below ``mean - r * std`` of the empirical distribution.

    ``std`` is the population standard deviation. When every value is equal
    the threshold is the mean itself, so nothing is flagged.
    """

    r: int = 1

    def __post_init__(self):
        if self.r < 1:
            raise InputError("r must be >= 1")

    def threshold(self, values: np.ndarray, *, upper: bool = False) -> float:
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise InputError("no values to threshold")
        mean = float(values.mean())
        if np.ptp(values) == 0:
            return mean
        std = float(values.std())
        return mean + self.r * std if upper else mean - self.r * std


@dataclass
class DetectionReport:
    flagged: list
    threshold: float
    distribution: DistributionStats
    r: int
    kind: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        flagged = [list(f) if isinstance(f, tuple) else f for f in self.flagged]
        d = {
            "kind": self.kind,
            "r": self.r,
            "threshold": self.threshold,
            "distribution": {k: (None if isinstance(v, float) and math.isnan(v) else v)
                             for k, v in self.distribution.as_dict().items()},
            "flagged_count": len(flagged),
            "flagged": flagged,
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class PairTable:
    """Values for all unordered pairs ``i < j``, in row-major upper-triangle order."""

    ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        q = len(self.ids)
        if self.values.shape != (q * (q - 1) // 2,):
            raise InputError("pair values do not match the number of ids")

    def __len__(self):
        return self.values.shape[0]

    def pairs(self) -> Iterable[tuple[str, str]]:
        ids = self.ids
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                yield ids[i], ids[j]

    def pair_indices(self) -> tuple[np.ndarray, np.ndarray]:
        return np.triu_indices(len(self.ids), k=1)

    def get(self, a: str, b: str) -> float:
        i, j = self.ids.index(a), self.ids.index(b)
        if i == j:
            return 0.0
        i, j = min(i, j), max(i, j)
        q = len(self.ids)
        return float(self.values[i * q - i * (i + 1) // 2 + (j - i - 1)])

    def matrix(self) -> np.ndarray:
        q = len(self.ids)
        m = np.zeros((q, q))
        iu = np.triu_indices(q, k=1)
        m[iu] = self.values
        m.T[iu] = self.values
        return m

    def write_csv(self, path: str | Path, value_name: str = "distance") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["entity_a", "entity_b", value_name])
            for (a, b), v in zip(self.pairs(), self.values.tolist()):
                w.writerow([a, b, repr(v)])


def _signature_matrix(signatures: Sequence[Signature]) -> np.ndarray:
    """Dense transformed weights, one row per signature, zero where an element is absent."""
    vocab = sorted({t.element for s in signatures for t in s.terms})
    col = {e: k for k, e in enumerate(vocab)}
    m = np.zeros((len(signatures), len(vocab)))
    for i, s in enumerate(signatures):
        for e, w in transform_weights(s).items():
            m[i, col[e]] = w
    return m


def pairwise_distances(signatures: Sequence[Signature], threads: int = 1, block: int = 256) -> PairTable:
    """Signature distance for every unordered pair.

    Rows are processed in blocks, optionally on a thread pool; each block
    writes a disjoint slice so the result does not depend on scheduling.
    """
    if len(signatures) < 2:
        raise InputError("pairwise comparison needs at least 2 signatures")
    for s in signatures[1:]:
        check_same_domain(signatures[0], s)
    m = _signature_matrix(signatures)
    q = len(signatures)
    out = np.empty(q * (q - 1) // 2)
    offsets = [i * q - i * (i + 1) // 2 for i in range(q)]

    def run(start: int) -> None:
        stop = min(start + block, q - 1)
        d = cdist(m[start:stop], m, metric="cityblock")
        for i in range(start, stop):
            out[offsets[i]:offsets[i] + q - i - 1] = d[i - start, i + 1:]

    starts = range(0, q - 1, block)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return PairTable([s.entity_id for s in signatures], out)


def detect_sockpuppets(pairs: PairTable, rule: ThresholdRule = ThresholdRule()) -> DetectionReport:
    if len(pairs) < 4:
        raise InputError("sockpuppet detection needs at least 4 pairs")
    thr = rule.threshold(pairs.values)
    hit = np.flatnonzero(pairs.values < thr)
    ii, jj = pairs.pair_indices()
    flagged = [(pairs.ids[ii[k]], pairs.ids[jj[k]]) for k in hit]
    return DetectionReport(flagged, thr, DistributionStats.from_samples(pairs.values, require_kurtosis=False),
                           rule.r, "sockpuppets", {"pair_count": len(pairs)})


def detect_front_users(distances: Mapping[str, float], rule: ThresholdRule = ThresholdRule()) -> DetectionReport:
    if len(distances) < 4:
        raise InputError("front-user detection needs at least 4 entities")
    ids = sorted(distances)
    values = np.array([distances[e] for e in ids])
    thr = rule.threshold(values)
    flagged = [e for e, v in zip(ids, values) if v < thr]
    return DetectionReport(flagged, thr, DistributionStats.from_samples(values, require_kurtosis=False),
                           rule.r, "front_users", {"entity_count": len(ids)})


def make_virtual_entities(docs: Sequence[EntityDocument], docs_range: tuple[int, int], count: int,
                          seed: int, prefix: str = "virtual") -> dict[str, list[EntityDocument]]:
    """Assemble ``count`` synthetic entities from randomly drawn documents.

    Each virtual entity draws its size uniformly from ``docs_range``
    (inclusive) and then that many distinct documents uniformly from the
    whole pool. Documents keep their text and timestamp; ``doc_id`` records
    the origin as ``<entity>/<doc>``.
    """
    lo, hi = docs_range
    if lo < 1 or hi < lo:
        raise InputError(f"bad document range {docs_range!r}")
    if count < 1:
        raise InputError("count must be >= 1")
    pool = sorted(docs, key=lambda d: (d.entity_id, d.doc_id))
    if len(pool) < hi:
        raise SamplingError(f"need at least {hi} documents to draw from, have {len(pool)}")
    rng = np.random.default_rng(seed)
    width = max(3, len(str(count - 1)))
    out = {}
    for k in range(count):
        name = f"{prefix}_{k:0{width}d}"
        size = int(rng.integers(lo, hi + 1))
        picks = rng.choice(len(pool), size=size, replace=False)
        out[name] = [EntityDocument(name, f"{pool[i].entity_id}/{pool[i].doc_id}", pool[i].text,
                                    pool[i].timestamp, pool[i].element_counts) for i in sorted(picks)]
    return out


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    mean_a: float = math.nan
    mean_b: float = math.nan


def ttest_independent(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Pooled-variance two-sample t-test, two-sided."""
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    n1, n2 = x.size, y.size
    if n1 < 2 or n2 < 2:
        raise InputError("each sample needs at least 2 values")
    df = n1 + n2 - 2
    pooled = (((x - x.mean()) ** 2).sum() + ((y - y.mean()) ** 2).sum()) / df
    if pooled == 0:
        raise DegenerateDistributionError("pooled variance is zero")
    t = (x.mean() - y.mean()) / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return TTestResult(float(t), df, p, float(x.mean()), float(y.mean()))


def tfidf_baseline(counts: CountTable) -> PairTable:
    """Cosine similarity of raw-count TF-IDF vectors, one document per entity."""
    ids = counts.entity_ids
    q = len(ids)
    if q < 2:
        raise DegenerateDistributionError("TF-IDF needs at least 2 entities")
    vocab = sorted(counts.global_counts)
    col = {e: k for k, e in enumerate(vocab)}
    rows, cols, vals = [], [], []
    for i, eid in enumerate(ids):
        for e, c in counts.per_entity[eid].items():
            rows.append(i)
            cols.append(col[e])
            vals.append(float(c))
    tf = sparse.csr_matrix((vals, (rows, cols)), shape=(q, len(vocab)))
    df = np.bincount(cols, minlength=len(vocab))
    w = tf @ sparse.diags(np.log(q / df))
    norms = np.sqrt(np.asarray(w.multiply(w).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    unit = sparse.diags(scale) @ w
    sim = np.clip((unit @ unit.T).toarray(), 0.0, 1.0)
    iu = np.triu_indices(q, k=1)
    return PairTable(ids, sim[iu])


def detect_tfidf(similarities: PairTable, rule: ThresholdRule = ThresholdRule()) -> DetectionReport:
    """Flag pairs whose similarity is strictly above ``mean + r * std``."""
    thr = rule.threshold(similarities.values, upper=True)
    hit = np.flatnonzero(similarities.values > thr)
    ii, jj = similarities.pair_indices()
    flagged = [(similarities.ids[ii[k]], similarities.ids[jj[k]]) for k in hit]
    return DetectionReport(flagged, thr,
                           DistributionStats.from_samples(similarities.values, require_kurtosis=False),
                           rule.r, "tfidf_pairs", {"pair_count": len(similarities)})


def precision_recall(flagged: Iterable, truth: Iterable) -> tuple[float, float, float]:
    """Precision, recall and F1 of a flagged set against ground truth.

    Pairs are compared unordered.
    """
    norm = lambda x: frozenset(x) if isinstance(x, (tuple, list)) else x  # noqa: E731
    f = {norm(x) for x in flagged}
    t = {norm(x) for x in truth}
    tp = len(f & t)
    precision = tp / len(f) if f else 0.0
    recall = tp / len(t) if t else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1
