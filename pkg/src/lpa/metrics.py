"""Distance measures between frequency vectors and between ranked lists.

All four measures are semi-metrics: non-negative, symmetric and zero only
on identical inputs. The triangle inequality is not required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .vectorspace import FrequencyVector, extend_vector

METRICS = ("rbd", "cosine", "l1", "kld_eps")
LOG_BASES = {"e": math.e, "2": 2.0, "10": 10.0}


@dataclass(frozen=True)
class RboConfig:
    p: float = 0.9
    truncation_depth: int | None = None  # None: length of the longer list

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InputError(f"RBO p must lie in (0, 1), got {self.p!r}")
        if self.truncation_depth is not None and self.truncation_depth < 1:
            raise InputError("truncation_depth must be >= 1")


def resolve_log_base(base) -> float:
    if isinstance(base, str):
        try:
            return LOG_BASES[base]
        except KeyError:
            raise InputError(f"log base must be one of {sorted(LOG_BASES)}, got {base!r}") from None
    base = float(base)
    if base <= 0 or base == 1:
        raise InputError(f"invalid log base {base!r}")
    return base


def _check_unique(ranked: Sequence, name: str) -> None:
    if len(set(ranked)) != len(ranked):
        raise InputError(f"{name} contains a duplicate element")


def rbo(ranked1: Sequence, ranked2: Sequence, config: RboConfig = RboConfig()) -> float:
    """Rank-biased overlap with the geometric tail closed at the last agreement."""
    _check_unique(ranked1, "ranked1")
    _check_unique(ranked2, "ranked2")
    if not ranked1 and not ranked2:
        return 1.0
    if not ranked1 or not ranked2:
        return 0.0
    p = config.p
    depth = config.truncation_depth or max(len(ranked1), len(ranked2))
    seen1: set = set()
    seen2: set = set()
    overlap = 0
    total = 0.0
    weight = 1.0 - p  # (1 - p) p^(d-1)
    agreement = 0.0
    for d in range(1, depth + 1):
        a = ranked1[d - 1] if d <= len(ranked1) else None
        b = ranked2[d - 1] if d <= len(ranked2) else None
        if a is not None and b is not None and a == b:
            overlap += 1
        else:
            if a is not None and a in seen2:
                overlap += 1
            if b is not None and b in seen1:
                overlap += 1
        if a is not None:
            seen1.add(a)
        if b is not None:
            seen2.add(b)
        agreement = overlap / d
        total += weight * agreement
        weight *= p
    # sum_{d > depth} (1 - p) p^(d-1) A_depth = A_depth p^depth
    total += agreement * p ** depth
    return min(max(total, 0.0), 1.0)


def rbd(ranked1: Sequence, ranked2: Sequence, config: RboConfig = RboConfig()) -> float:
    return 1.0 - rbo(ranked1, ranked2, config)


def _aligned(v1: FrequencyVector, v2: FrequencyVector) -> tuple[np.ndarray, np.ndarray]:
    union = sorted(set(v1.elements) | set(v2.elements))
    a = np.fromiter((v1.get(e) for e in union), dtype=float, count=len(union))
    b = np.fromiter((v2.get(e) for e in union), dtype=float, count=len(union))
    return a, b


def cosine_distance(v1: FrequencyVector, v2: FrequencyVector) -> float:
    a, b = _aligned(v1, v2)
    n1, n2 = float(np.sqrt(a @ a)), float(np.sqrt(b @ b))
    if n1 == 0 or n2 == 0:
        raise InputError("cosine distance is undefined for a zero vector")
    if v1 == v2:
        return 0.0
    sim = float(a @ b) / (n1 * n2)
    return min(max(1.0 - sim, 0.0), 1.0)


def l1_distance(v1: FrequencyVector, v2: FrequencyVector) -> float:
    a, b = _aligned(v1, v2)
    return 0.5 * float(np.abs(a - b).sum())


def divergence_terms(a: np.ndarray, b: np.ndarray, base: float = math.e) -> np.ndarray:
    """Per-element addends (a - b) * log(a / b) for strictly positive aligned vectors."""
    terms = (a - b) * np.log(a / b)
    if base != math.e:
        terms = terms / math.log(base)
    # every addend is non-negative in exact arithmetic; rounding can leave -0.0 or tiny negatives
    return np.maximum(terms, 0.0)


def kld_eps(pvr: FrequencyVector, dvr: FrequencyVector, epsilon: float, base=math.e) -> float:
    """Symmetric KL divergence after epsilon back-off.

    The usual call has ``pvr``'s support inside ``dvr``'s: only the PVR is
    extended. When neither support contains the other, both vectors are
    extended over the union so the measure stays symmetric.
    """
    base = resolve_log_base(base)
    if all(e in dvr.index for e in pvr.elements):
        ext = extend_vector(pvr, dvr, epsilon)
        return float(divergence_terms(ext.probs, dvr.probs, base).sum())
    if all(e in pvr.index for e in dvr.elements):
        ext = extend_vector(dvr, pvr, epsilon)
        return float(divergence_terms(pvr.probs, ext.probs, base).sum())
    union = sorted(set(pvr.elements) | set(dvr.elements))
    domain = FrequencyVector(union, np.full(len(union), 1.0 / len(union)), check=False)
    a = extend_vector(pvr, domain, epsilon).probs
    b = extend_vector(dvr, domain, epsilon).probs
    return float(divergence_terms(a, b, base).sum())


def ranked(vec: FrequencyVector) -> tuple:
    """Elements by descending weight; the input RBD compares."""
    return vec.elements


def distance(metric: str, pvr: FrequencyVector, dvr: FrequencyVector, *, epsilon: float | None = None,
             rbo_config: RboConfig = RboConfig(), base=math.e) -> float:
    """Dispatch on metric name."""
    if metric == "rbd":
        return rbd(ranked(pvr), ranked(dvr), rbo_config)
    if metric == "cosine":
        return cosine_distance(pvr, dvr)
    if metric == "l1":
        return l1_distance(pvr, dvr)
    if metric == "kld_eps":
        if epsilon is None:
            raise InputError("kld_eps needs an epsilon")
        return kld_eps(pvr, dvr, epsilon, base)
    raise InputError(f"unknown metric {metric!r}; expected one of {METRICS}")
