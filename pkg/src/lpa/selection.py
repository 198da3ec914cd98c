"""Metric-selection study: distribution width, missing-head contribution, tail sensitivity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateDistributionError, InputError, LPAError
from .metrics import METRICS, RboConfig, distance, divergence_terms, resolve_log_base
from .vectorspace import FrequencyVector, extend_vector

DEFAULT_HEAD_K = 1000


@dataclass(frozen=True)
class DistributionStats:
    min: float
    max: float
    mean: float
    std: float
    median: float
    kurtosis_excess: float
    count: int = 0

    @classmethod
    def from_samples(cls, samples: Iterable[float], *, require_kurtosis: bool = True) -> "DistributionStats":
        x = np.asarray(list(samples), dtype=float)
        if x.size == 0:
            raise InputError("no samples to summarize")
        try:
            kurt = excess_kurtosis(x)
        except DegenerateDistributionError:
            if require_kurtosis:
                raise
            kurt = math.nan
        return cls(float(x.min()), float(x.max()), float(x.mean()), float(x.std()),
                   float(np.median(x)), kurt, int(x.size))

    def as_dict(self) -> dict:
        return asdict(self)


def excess_kurtosis(samples: Sequence[float]) -> float:
    """Population-moment excess kurtosis, m4 / m2**2 - 3."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InputError("excess kurtosis needs at least 4 samples")
    dev = x - x.mean()
    m2 = float(np.mean(dev ** 2))
    if m2 <= 1e-300 or np.ptp(x) == 0:
        raise DegenerateDistributionError("samples have zero variance; kurtosis is undefined")
    if x.size < 4:
        raise InputError("excess kurtosis needs at least 4 samples")
    m4 = float(np.mean(dev ** 4))
    return m4 / (m2 * m2) - 3.0


@dataclass(frozen=True)
class HeadTailSplit:
    head_k: int
    head_elements: tuple[str, ...]
    tail_elements: tuple[str, ...]

    @classmethod
    def from_dvr(cls, dvr: FrequencyVector, head_k: int = DEFAULT_HEAD_K) -> "HeadTailSplit":
        if head_k < 1:
            raise InputError("head_k must be >= 1")
        return cls(head_k, dvr.elements[:head_k], dvr.elements[head_k:])

    def part(self, name: str) -> tuple[str, ...]:
        if name == "head":
            return self.head_elements
        if name == "tail":
            return self.tail_elements
        raise InputError(f"split part must be 'head' or 'tail', got {name!r}")


def entity_distances(pvrs: Mapping[str, FrequencyVector], dvr: FrequencyVector, metric: str = "kld_eps", *,
                     epsilon: float | None = None, rbo_config: RboConfig = RboConfig(),
                     base=math.e) -> dict[str, float]:
    """Each entity's distance from the domain vector, keyed by entity id."""
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}; expected one of {METRICS}")
    out = {}
    for eid in sorted(pvrs):
        try:
            out[eid] = distance(metric, pvrs[eid], dvr, epsilon=epsilon, rbo_config=rbo_config, base=base)
        except LPAError as exc:
            raise type(exc)(f"entity {eid!r}: {exc}") from exc
    return out


def distance_distribution(pvrs: Mapping[str, FrequencyVector], dvr: FrequencyVector, metric: str = "kld_eps",
                          **kwargs) -> DistributionStats:
    if len(pvrs) < 4:
        raise InputError("a distance distribution needs at least 4 entities")
    return DistributionStats.from_samples(entity_distances(pvrs, dvr, metric, **kwargs).values())


def _restricted_terms(pvr: FrequencyVector, dvr: FrequencyVector, elements: Sequence[str], metric: str,
                      epsilon: float | None, base) -> tuple[np.ndarray, np.ndarray]:
    """Per-element addends of ``metric`` on ``elements`` and a mask of those absent from the entity.

    Weights are used as they are over the full domain; nothing is renormalized.
    """
    idx = np.fromiter((dvr.index[e] for e in elements), dtype=np.intp, count=len(elements))
    dense = pvr.dense(dvr)
    missing = dense[idx] == 0
    if metric == "l1":
        return 0.5 * np.abs(dense[idx] - dvr.probs[idx]), missing
    if metric == "kld_eps":
        if epsilon is None:
            raise InputError("kld_eps needs an epsilon")
        ext = extend_vector(pvr, dvr, epsilon)
        terms = divergence_terms(ext.probs[idx], dvr.probs[idx], resolve_log_base(base))
        return terms, missing
    if metric == "cosine":
        # cosine distance is a function of the dot product alone, whose addends
        # vanish wherever either vector is zero
        a = dense[idx] / np.linalg.norm(dense)
        b = dvr.probs[idx] / np.linalg.norm(dvr.probs)
        return a * b, missing
    raise InputError(f"missing-element contribution is not defined for metric {metric!r}")


def restricted_distance(pvr: FrequencyVector, dvr: FrequencyVector, elements: Sequence[str], metric: str,
                        epsilon: float | None = None, base=math.e) -> float:
    if metric == "cosine":
        raise InputError("cosine distance does not decompose over element subsets")
    terms, _ = _restricted_terms(pvr, dvr, elements, metric, epsilon, base)
    return float(terms.sum())


def missing_contribution(pvr: FrequencyVector, dvr: FrequencyVector, split: HeadTailSplit, metric: str = "kld_eps",
                         *, epsilon: float | None = None, base=math.e, part: str = "head") -> float:
    """Fraction of the restricted distance carried by elements the entity never uses."""
    terms, missing = _restricted_terms(pvr, dvr, split.part(part), metric, epsilon, base)
    total = float(terms.sum())
    if total == 0 or not missing.any():
        return 0.0
    return min(max(float(terms[missing].sum()) / total, 0.0), 1.0)


def tail_sensitivity(pvrs: Mapping[str, FrequencyVector], dvr: FrequencyVector, split: HeadTailSplit,
                     metric: str = "kld_eps", *, epsilon: float | None = None, base=math.e,
                     require_kurtosis: bool = False) -> DistributionStats:
    """Distribution of distances computed on the tail elements only."""
    values = []
    for eid in sorted(pvrs):
        try:
            values.append(restricted_distance(pvrs[eid], dvr, split.tail_elements, metric, epsilon, base))
        except LPAError as exc:
            raise type(exc)(f"entity {eid!r}: {exc}") from exc
    return DistributionStats.from_samples(values, require_kurtosis=require_kurtosis)


@dataclass(frozen=True)
class MetricReport:
    metric: str
    distances: DistributionStats
    missing_head_fraction: float | None
    tail: DistributionStats | None


def compare_metrics(pvrs: Mapping[str, FrequencyVector], dvr: FrequencyVector, epsilon: float,
                    head_k: int = DEFAULT_HEAD_K, rbo_config: RboConfig = RboConfig(),
                    base=math.e) -> list[MetricReport]:
    """All three criteria for every metric; the verdict is left to the reader."""
    split = HeadTailSplit.from_dvr(dvr, head_k)
    reports = []
    for metric in METRICS:
        stats = distance_distribution(pvrs, dvr, metric, epsilon=epsilon, rbo_config=rbo_config, base=base)
        missing = tail = None
        if metric in ("l1", "kld_eps", "cosine"):
            fr = [missing_contribution(pvrs[e], dvr, split, metric, epsilon=epsilon, base=base) for e in sorted(pvrs)]
            missing = float(np.mean(fr))
        if metric in ("l1", "kld_eps") and split.tail_elements:
            tail = tail_sensitivity(pvrs, dvr, split, metric, epsilon=epsilon, base=base)
        reports.append(MetricReport(metric, stats, missing, tail))
    return reports
