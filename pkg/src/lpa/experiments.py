"""Validation experiments with known ground truth.

Each function takes plain documents, runs the whole pipeline and returns a
small result object. The acceptance suite and the ``lpa`` command line both
drive these, so the numbers they report are the same.

Conventions: book corpora carry the book in ``entity_id`` and the chapter in
``doc_id``; review corpora carry the user in ``entity_id``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .detect import (DetectionReport, PairTable, ThresholdRule, TTestResult, detect_front_users,
                     detect_sockpuppets, make_virtual_entities, pairwise_distances, precision_recall, ttest_independent)
from .errors import InputError, SamplingError
from .ingest import (CountTable, EntityDocument, PipelineConfig, build_counts, document_counts, filter_counts,
                     tokenize)
from .metrics import kld_eps
from .signature import DEFAULT_N, build_signature, build_signatures, contributions, signature_distance
from .vectorspace import FrequencyVector, build_dvr, build_pvrs, default_epsilon

# the fixtures are pseudo-words, so stemming only costs time; no entity-size filter
# because chapters are single documents
EXPERIMENT_CONFIG = PipelineConfig(stemming=False, min_docs_per_entity=0)


def group_by_entity(docs: Sequence[EntityDocument]) -> dict[str, list[EntityDocument]]:
    out: dict[str, list[EntityDocument]] = {}
    for d in docs:
        out.setdefault(d.entity_id, []).append(d)
    return out


def _as_entity(doc: EntityDocument, entity_id: str) -> EntityDocument:
    return EntityDocument(entity_id, doc.doc_id, doc.text, doc.timestamp, doc.element_counts)


def _chapter_table(chapters: Sequence[EntityDocument], config: PipelineConfig) -> CountTable:
    """Counts with one entity per chapter, keyed ``<book>/<chapter>``."""
    per = {f"{d.entity_id}/{d.doc_id}": document_counts(d, config) for d in chapters}
    return filter_counts(CountTable.from_entity_counts(per), config)


def _mean_distance_from_domain(table: CountTable) -> float:
    dvr = build_dvr(table)
    eps = default_epsilon(table)
    return float(np.mean([kld_eps(p, dvr, eps) for p in build_pvrs(table).values()]))


def _draw_virtual(pool: Sequence[EntityDocument], size_range: tuple[int, int], count: int,
                  rng: np.random.Generator, authors: Mapping[str, str] | None = None,
                  min_authors: int = 1, max_attempts: int = 1000) -> list[list[EntityDocument]]:
    """Random documents without replacement, resampling draws that span too few authors."""
    lo, hi = size_range
    if lo < 1 or hi < lo:
        raise InputError(f"bad size range {size_range!r}")
    if len(pool) < hi:
        raise SamplingError(f"need at least {hi} documents to draw from, have {len(pool)}")
    out = []
    for _ in range(count):
        for _attempt in range(max_attempts):
            picks = rng.choice(len(pool), size=int(rng.integers(lo, hi + 1)), replace=False)
            group = [pool[i] for i in sorted(picks)]
            owners = {(authors or {}).get(d.entity_id, d.entity_id) for d in group}
            if len(owners) >= min_authors:
                out.append(group)
                break
        else:
            raise SamplingError(f"could not draw a group spanning {min_authors} authors")
    return out


@dataclass
class ChapterDomainResult:
    """Mean chapter distance per domain, authentic books against virtual ones."""

    authentic: dict[str, float]
    virtual: dict[str, float]
    ttest: TTestResult


def chapter_domain_test(docs: Sequence[EntityDocument], n_virtual: int | None = None,
                        chapters_range: tuple[int, int] = (19, 31), seed: int = 0,
                        config: PipelineConfig = EXPERIMENT_CONFIG) -> ChapterDomainResult:
    """Each book as its own domain against randomly assembled books.

    For every real book the chapters are scored against that book's DVR;
    for every virtual book, assembled from random chapters of the whole
    corpus, against the virtual book's DVR. The per-book mean distances
    are compared with a pooled two-sample t-test (authentic minus virtual).
    """
    books = group_by_entity(docs)
    if len(books) < 2:
        raise InputError("need at least 2 books")
    rng = np.random.default_rng(seed)
    authentic = {b: _mean_distance_from_domain(_chapter_table(books[b], config)) for b in sorted(books)}
    pool = sorted(docs, key=lambda d: (d.entity_id, d.doc_id))
    groups = _draw_virtual(pool, chapters_range, n_virtual or len(books), rng)
    virtual = {f"virtual_{k:03d}": _mean_distance_from_domain(_chapter_table(g, config))
               for k, g in enumerate(groups)}
    return ChapterDomainResult(authentic, virtual, ttest_independent(list(authentic.values()),
                                                                     list(virtual.values())))


def _restricted_pvr(docs: Sequence[EntityDocument], dvr: FrequencyVector, config: PipelineConfig) -> FrequencyVector:
    counts: Counter = Counter()
    for d in docs:
        counts.update(document_counts(d, config))
    kept = {e: c for e, c in counts.items() if e in dvr.index}
    if not kept:
        raise InputError("entity has no element in the domain")
    return FrequencyVector.from_counts(kept)


@dataclass
class SuperpositionResult:
    authentic: dict[str, float]
    virtual: dict[str, float]
    virtual_authors: dict[str, int]

    def summary(self) -> dict:
        a, v = np.array(list(self.authentic.values())), np.array(list(self.virtual.values()))
        return {"authentic_mean": float(a.mean()), "authentic_std": float(a.std()),
                "virtual_mean": float(v.mean()), "virtual_std": float(v.std())}


def superposition_test(docs: Sequence[EntityDocument], authors: Mapping[str, str], n_virtual: int = 30,
                       chapters_range: tuple[int, int] = (15, 28), min_authors: int = 5, seed: int = 0,
                       config: PipelineConfig = EXPERIMENT_CONFIG) -> SuperpositionResult:
    """Distances of authentic and multi-author virtual books from the corpus DVR.

    The DVR is built from the authentic books only; virtual books reuse
    their chapters, so they add nothing to it.
    """
    table = build_counts(docs, config)
    dvr = build_dvr(table)
    eps = default_epsilon(table)
    authentic = {b: kld_eps(p, dvr, eps) for b, p in build_pvrs(table).items()}
    rng = np.random.default_rng(seed)
    pool = sorted(docs, key=lambda d: (d.entity_id, d.doc_id))
    groups = _draw_virtual(pool, chapters_range, n_virtual, rng, authors, min_authors)
    virtual, spans = {}, {}
    for k, g in enumerate(groups):
        name = f"virtual_{k:03d}"
        virtual[name] = kld_eps(_restricted_pvr(g, dvr, config), dvr, eps)
        spans[name] = len({authors.get(d.entity_id, d.entity_id) for d in g})
    return SuperpositionResult(authentic, virtual, spans)


@dataclass
class VirtualUserResult:
    authentic: dict[str, float]
    virtual: dict[str, float]
    ttest: TTestResult


def virtual_user_test(docs: Sequence[EntityDocument], count: int, docs_range: tuple[int, int], seed: int = 0,
                      config: PipelineConfig = PipelineConfig()) -> VirtualUserResult:
    """Distances from the DVR of authentic entities against randomly assembled ones.

    The DVR comes from the authentic entities; virtual entities are drawn
    from their documents and scored against it. The t-test is authentic
    minus virtual.
    """
    table = build_counts(docs, config)
    dvr = build_dvr(table)
    eps = default_epsilon(table)
    authentic = {e: kld_eps(p, dvr, eps) for e, p in build_pvrs(table).items()}
    pool = sorted((d for d in docs if d.entity_id in table.per_entity), key=lambda d: (d.entity_id, d.doc_id))
    groups = make_virtual_entities(pool, docs_range, count, seed)
    virtual = {name: kld_eps(_restricted_pvr(g, dvr, config), dvr, eps) for name, g in groups.items()}
    return VirtualUserResult(authentic, virtual, ttest_independent(list(authentic.values()), list(virtual.values())))


def split_entity_docs(docs: Sequence[EntityDocument], seed: int, suffixes=("a", "b")) -> list[EntityDocument]:
    """Halve one entity's documents at random into two new entities."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(docs))
    half = len(docs) // 2
    return [_as_entity(docs[i], f"{docs[i].entity_id}_{suffixes[0] if rank < half else suffixes[1]}")
            for rank, i in enumerate(order)]


@dataclass
class ThresholdSweep:
    """Detection at several ``r`` against a known truth set."""

    reports: dict[int, DetectionReport]
    truth: list
    scores: dict[int, tuple[float, float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self.scores = {r: precision_recall(rep.flagged, self.truth) for r, rep in self.reports.items()}

    def nested(self) -> bool:
        """True when every stricter threshold flags a subset of the looser one."""
        rs = sorted(self.reports)
        sets = [{frozenset(f) if isinstance(f, (tuple, list)) else f for f in self.reports[r].flagged} for r in rs]
        return all(b <= a for a, b in zip(sets, sets[1:]))

    def rows(self) -> list[dict]:
        return [{"r": r, "flagged": len(self.reports[r].flagged), "threshold": self.reports[r].threshold,
                 "precision": p, "recall": rc, "f1": f1} for r, (p, rc, f1) in sorted(self.scores.items())]


@dataclass
class SplitAuthorResult:
    pairs: PairTable
    truth: list[tuple[str, str]]
    sweep: ThresholdSweep


def split_author_test(docs: Sequence[EntityDocument], n_entities: int = 100, n_split: int = 10, seed: int = 0,
                      rs: Sequence[int] = (1, 2, 3, 4), n: int = DEFAULT_N,
                      config: PipelineConfig = EXPERIMENT_CONFIG, threads: int = 1) -> SplitAuthorResult:
    """Plant ``n_split`` halved entities among ``n_entities`` and look for the halves."""
    by = group_by_entity(docs)
    ids = sorted(by)
    if len(ids) < n_entities:
        raise SamplingError(f"need {n_entities} entities, have {len(ids)}")
    if not 0 < n_split <= n_entities:
        raise InputError("n_split must lie in [1, n_entities]")
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(ids, size=n_entities, replace=False).tolist())
    split = set(rng.choice(chosen, size=n_split, replace=False).tolist())
    planted: list[EntityDocument] = []
    truth = []
    for k, eid in enumerate(chosen):
        if eid in split:
            planted += split_entity_docs(by[eid], seed=seed + k)
            truth.append((f"{eid}_a", f"{eid}_b"))
        else:
            planted += by[eid]
    table = build_counts(planted, config)
    dvr = build_dvr(table)
    sigs = build_signatures(build_pvrs(table), dvr, default_epsilon(table), n)
    pairs = pairwise_distances(sigs, threads=threads)
    reports = {r: detect_sockpuppets(pairs, ThresholdRule(r)) for r in rs}
    return SplitAuthorResult(pairs, truth, ThresholdSweep(reports, truth))


@dataclass
class FrontUserResult:
    distances: dict[str, float]
    truth: list[str]
    sweep: ThresholdSweep


def front_user_test(docs: Sequence[EntityDocument], n_authentic: int = 100, n_merged: int = 10,
                    authors_per_merged: int = 5, share: float = 1.0, seed: int = 0, rs: Sequence[int] = (1,),
                    config: PipelineConfig = EXPERIMENT_CONFIG) -> FrontUserResult:
    """Plant accounts shared by several authors among authentic ones.

    Each merged account takes a random ``share`` of every one of its
    authors' documents; ``share=1 / authors_per_merged`` keeps it near the
    size of a single authentic account.
    """
    if not 0 < share <= 1:
        raise InputError("share must lie in (0, 1]")
    by = group_by_entity(docs)
    ids = sorted(by)
    need = n_authentic + n_merged * authors_per_merged
    if len(ids) < need:
        raise SamplingError(f"need {need} entities, have {len(ids)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ids).tolist()
    authentic, donors = order[:n_authentic], order[n_authentic:need]
    planted = [d for eid in authentic for d in by[eid]]
    truth = []
    for k in range(n_merged):
        name = f"merged_{k:03d}"
        truth.append(name)
        for donor in donors[k * authors_per_merged:(k + 1) * authors_per_merged]:
            own = by[donor]
            take = max(1, round(len(own) * share))
            for i in sorted(rng.choice(len(own), size=take, replace=False)):
                d = own[i]
                planted.append(EntityDocument(name, f"{donor}/{d.doc_id}", d.text, d.timestamp, d.element_counts))
    table = build_counts(planted, config)
    dvr = build_dvr(table)
    eps = default_epsilon(table)
    distances = {eid: kld_eps(p, dvr, eps) for eid, p in build_pvrs(table).items()}
    reports = {r: detect_front_users(distances, ThresholdRule(r)) for r in rs}
    return FrontUserResult(distances, truth, ThresholdSweep(reports, truth))


def working_set(pvrs: Mapping[str, FrequencyVector], dvr: FrequencyVector, epsilon: float,
                sizes: Sequence[int] = (50, 100, 500, 1000)) -> dict[int, float]:
    """Mean share of each entity's distance carried by its top-``n`` elements, for each ``n``."""
    if not pvrs:
        raise InputError("no entities")
    acc = {n: [] for n in sizes}
    for eid in sorted(pvrs):
        c = contributions(pvrs[eid], dvr, epsilon)
        total = c.total
        top = np.sort(c.values)[::-1]
        csum = np.cumsum(top)
        for n in sizes:
            acc[n].append(float(csum[min(n, len(top)) - 1]) / total if total > 0 else 0.0)
    return {n: float(np.mean(v)) for n, v in acc.items()}


def _truncated_table(tokens: Mapping[str, list[str]], limit: int | None, config: PipelineConfig) -> CountTable:
    per = {cid: Counter(toks if limit is None else toks[:limit]) for cid, toks in tokens.items()}
    return filter_counts(CountTable.from_entity_counts({k: v for k, v in per.items() if v}), config)


@dataclass
class SampleSizeResult:
    fractions: tuple[float, ...]
    distances: dict[float, list[float]]

    def medians(self) -> dict[float, float]:
        return {f: float(np.median(self.distances[f])) for f in self.fractions}

    def inversions(self) -> int:
        m = [self.medians()[f] for f in self.fractions]
        return sum(1 for a, b in zip(m, m[1:]) if b > a)


def sample_size_test(docs: Sequence[EntityDocument], fractions: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0),
                     n: int = DEFAULT_N, config: PipelineConfig = EXPERIMENT_CONFIG) -> SampleSizeResult:
    """How far truncated-chapter signatures sit from full-chapter signatures.

    Every book is its own domain and every chapter an entity. A chapter
    sample keeps its first ``fraction * X`` tokens, ``X`` being the book's
    mean chapter length; the sampled book's DVR is rebuilt from the samples.
    """
    if not fractions or any(f <= 0 for f in fractions):
        raise InputError("fractions must be positive")
    out: dict[float, list[float]] = {f: [] for f in fractions}
    for book, chapters in sorted(group_by_entity(docs).items()):
        tokens = {f"{book}/{d.doc_id}": _doc_tokens(d, config) for d in chapters}
        mean_len = float(np.mean([len(t) for t in tokens.values()]))
        full = _signatures(_truncated_table(tokens, None, config), n)
        for f in fractions:
            sampled = _signatures(_truncated_table(tokens, max(1, math.floor(f * mean_len)), config), n)
            out[f] += [signature_distance(sampled[c], full[c], strict=False) for c in sorted(sampled) if c in full]
    return SampleSizeResult(tuple(fractions), out)


def _doc_tokens(doc: EntityDocument, config: PipelineConfig) -> list[str]:
    if doc.text is None:
        raise InputError(f"document {doc.doc_id!r} has no text to truncate")
    return tokenize(doc.text, config, doc.doc_id)


def _signatures(table: CountTable, n: int) -> dict:
    dvr = build_dvr(table)
    eps = default_epsilon(table)
    return {eid: build_signature(contributions(p, dvr, eps), n, entity_id=eid)
            for eid, p in build_pvrs(table).items()}
