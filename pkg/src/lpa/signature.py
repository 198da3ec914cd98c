"""Signed signatures: the elements contributing most to an entity's divergence from its domain."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ComparisonError, InputError
from .metrics import divergence_terms, resolve_log_base
from .vectorspace import FrequencyVector, extend_vector

OVERUSED = "overused"
UNDERUSED = "underused"
DEFAULT_N = 500


@dataclass(frozen=True)
class SignatureTerm:
    element: str
    contribution: float
    sign: str

    @property
    def overused(self) -> bool:
        return self.sign == OVERUSED


@dataclass(frozen=True)
class Signature:
    entity_id: str
    terms: tuple[SignatureTerm, ...]
    n: int
    total_distance: float
    fingerprint: str | None = field(default=None, compare=False)

    def __len__(self):
        return len(self.terms)

    @property
    def elements(self) -> list[str]:
        return [t.element for t in self.terms]

    def contribution_fraction(self) -> float:
        """Share of the entity's total distance carried by the signature's terms."""
        if self.total_distance == 0:
            return 0.0
        return sum(t.contribution for t in self.terms) / self.total_distance

    def missing_fraction(self, pvr: FrequencyVector) -> float:
        """Share of the signature's own distance carried by elements the entity never uses."""
        total = sum(t.contribution for t in self.terms)
        if total == 0:
            return 0.0
        return sum(t.contribution for t in self.terms if t.element not in pvr) / total


@dataclass(frozen=True)
class Contributions:
    """Per-element addends of the divergence, aligned with the domain's rank order."""

    elements: tuple[str, ...]
    values: np.ndarray
    overused: np.ndarray
    present: np.ndarray
    fingerprint: str

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def terms(self) -> list[SignatureTerm]:
        return [SignatureTerm(e, float(v), OVERUSED if o else UNDERUSED)
                for e, v, o in zip(self.elements, self.values, self.overused)]


def contributions(pvr: FrequencyVector, dvr: FrequencyVector, epsilon: float, base=math.e) -> Contributions:
    base = resolve_log_base(base)
    ext = extend_vector(pvr, dvr, epsilon)
    values = divergence_terms(ext.probs, dvr.probs, base)
    return Contributions(dvr.elements, values, ext.probs > dvr.probs, ext.present, dvr.fingerprint(epsilon))


def term_contributions(pvr: FrequencyVector, dvr: FrequencyVector, epsilon: float, base=math.e) -> list[SignatureTerm]:
    """One term per domain element; the contributions sum to ``kld_eps(pvr, dvr)``."""
    return contributions(pvr, dvr, epsilon, base).terms()


def _top_order(elements, values, n: int) -> np.ndarray:
    """Indices of the ``n`` largest values; ties go to the lexicographically smaller element."""
    keys = np.asarray(elements, dtype=object)
    values = np.asarray(values, dtype=float)
    if n < len(values):
        # the cut-off value, then everything at or above it, then an exact sort
        kth = np.partition(-values, n - 1)[n - 1]
        cand = np.flatnonzero(-values <= kth)
    else:
        cand = np.arange(len(values))
    order = sorted(cand.tolist(), key=lambda i: (-values[i], keys[i]))
    return np.array(order[:n], dtype=np.intp)


def build_signature(terms: Iterable[SignatureTerm] | Contributions, n: int = DEFAULT_N,
                    entity_id: str = "", total_distance: float | None = None,
                    fingerprint: str | None = None) -> Signature:
    if n < 1:
        raise InputError("signature size n must be >= 1")
    if isinstance(terms, Contributions):
        c = terms
        idx = _top_order(c.elements, c.values, n)
        picked = tuple(SignatureTerm(c.elements[i], float(c.values[i]), OVERUSED if c.overused[i] else UNDERUSED)
                       for i in idx)
        total = c.total if total_distance is None else total_distance
        return Signature(entity_id, picked, n, total, fingerprint or c.fingerprint)
    terms = list(terms)
    idx = _top_order([t.element for t in terms], [t.contribution for t in terms], n)
    total = sum(t.contribution for t in terms) if total_distance is None else total_distance
    return Signature(entity_id, tuple(terms[i] for i in idx), n, total, fingerprint)


def signature_for(entity_id: str, pvr: FrequencyVector, dvr: FrequencyVector, epsilon: float,
                  n: int = DEFAULT_N, base=math.e) -> Signature:
    return build_signature(contributions(pvr, dvr, epsilon, base), n, entity_id=entity_id)


def build_signatures(pvrs: Mapping[str, FrequencyVector], dvr: FrequencyVector, epsilon: float,
                     n: int = DEFAULT_N, base=math.e) -> list[Signature]:
    return [signature_for(eid, pvrs[eid], dvr, epsilon, n, base) for eid in sorted(pvrs)]


def transform_weights(sig: Signature) -> dict[str, float]:
    """Overused terms map to ``w + 1``, underused terms to ``w - 1``."""
    return {t.element: (t.contribution + 1.0 if t.overused else t.contribution - 1.0) for t in sig.terms}


def check_same_domain(sig1: Signature, sig2: Signature) -> None:
    if sig1.fingerprint != sig2.fingerprint:
        raise ComparisonError(
            f"signatures {sig1.entity_id!r} and {sig2.entity_id!r} were built against different domains"
        )


def signature_distance(sig1: Signature, sig2: Signature, *, strict: bool = True) -> float:
    """L1 distance between transformed weights over the union of both signatures.

    An element missing from one signature counts as weight 0 there.
    ``strict=False`` skips the domain check, for deliberate cross-domain
    comparisons such as sampled versus full-text signatures.
    """
    if strict:
        check_same_domain(sig1, sig2)
    t1, t2 = transform_weights(sig1), transform_weights(sig2)
    return math.fsum(abs(t1.get(e, 0.0) - t2.get(e, 0.0)) for e in sorted(t1.keys() | t2.keys()))


def write_signatures_csv(signatures: Iterable[Signature], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity_id", "rank", "element", "contribution", "sign"])
        for sig in signatures:
            for rank, t in enumerate(sig.terms, 1):
                w.writerow([sig.entity_id, rank, t.element, repr(t.contribution), t.sign])


def read_signatures_csv(path: str | Path, fingerprint: str | None = None, n: int = DEFAULT_N) -> list[Signature]:
    grouped: dict[str, list[SignatureTerm]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["sign"] not in (OVERUSED, UNDERUSED):
                raise InputError(f"{path}: bad sign {row['sign']!r}")
            grouped.setdefault(row["entity_id"], []).append(
                SignatureTerm(row["element"], float(row["contribution"]), row["sign"]))
    return [Signature(eid, tuple(terms), max(n, len(terms)), sum(t.contribution for t in terms), fingerprint)
            for eid, terms in grouped.items()]
