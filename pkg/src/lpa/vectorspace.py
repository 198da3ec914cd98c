"""Domain (DVR) and personal (PVR) frequency vectors and the epsilon back-off extension."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import EmptyDomainError, EpsilonTooLargeError, InputError, UnknownEntityError
from .ingest import CountTable

SUM_TOL = 1e-9


class FrequencyVector:
    """A sparse probability distribution over elements.

    Elements are held in rank order: descending weight, ties broken by the
    element string. ``probs`` is aligned with ``elements``.
    """

    def __init__(self, elements, probs, *, check: bool = True):
        elements = tuple(elements)
        probs = np.asarray(probs, dtype=float)
        if len(elements) != probs.shape[0]:
            raise InputError("elements and probabilities differ in length")
        if len(elements) == 0:
            raise EmptyDomainError("a frequency vector needs at least one element")
        order = sorted(range(len(elements)), key=lambda i: (-probs[i], elements[i]))
        self.elements = tuple(elements[i] for i in order)
        self.probs = probs[order]
        self.probs.setflags(write=False)
        if check:
            if len(set(self.elements)) != len(self.elements):
                raise InputError("duplicate element in frequency vector")
            if np.any(self.probs <= 0) or np.any(self.probs > 1):
                raise InputError("every probability must lie in (0, 1]")
            total = float(self.probs.sum())
            if abs(total - 1.0) > SUM_TOL:
                raise InputError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "FrequencyVector":
        items = [(e, c) for e, c in counts.items() if c > 0]
        if not items:
            raise EmptyDomainError("cannot normalize an empty count map")
        total = sum(c for _, c in items)
        return cls([e for e, _ in items], np.array([c for _, c in items], dtype=float) / total)

    @classmethod
    def from_weights(cls, weights: Mapping[str, float]) -> "FrequencyVector":
        return cls(list(weights), np.array(list(weights.values()), dtype=float))

    @cached_property
    def index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.elements)}

    @cached_property
    def weights(self) -> dict[str, float]:
        return dict(zip(self.elements, self.probs.tolist()))

    @property
    def support_size(self) -> int:
        return len(self.elements)

    def get(self, element: str, default: float = 0.0) -> float:
        i = self.index.get(element)
        return default if i is None else float(self.probs[i])

    def __contains__(self, element) -> bool:
        return element in self.index

    def __len__(self):
        return len(self.elements)

    def __eq__(self, other):
        if not isinstance(other, FrequencyVector):
            return NotImplemented
        return self.elements == other.elements and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.elements, self.probs.tobytes()))

    def __repr__(self):
        head = ", ".join(f"{e}: {p:.4g}" for e, p in zip(self.elements[:4], self.probs[:4]))
        more = ", ..." if len(self) > 4 else ""
        return f"FrequencyVector({{{head}{more}}}, support={len(self)})"

    def dense(self, domain: "FrequencyVector") -> np.ndarray:
        """This vector's weights laid out in ``domain`` order (zeros where absent)."""
        out = np.zeros(len(domain))
        idx = domain.index
        try:
            pos = np.fromiter((idx[e] for e in self.elements), dtype=np.intp, count=len(self))
        except KeyError as exc:
            raise InputError(f"element {exc.args[0]!r} is not part of the domain") from exc
        out[pos] = self.probs
        return out

    def fingerprint(self, epsilon: float | None = None) -> str:
        h = hashlib.sha256()
        for e in sorted(self.elements):
            h.update(e.encode("utf-8"))
            h.update(b"\0")
        if epsilon is not None:
            h.update(repr(float(epsilon)).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ExtendedVector:
    """A PVR padded with epsilon on every domain element it lacks.

    ``probs`` is aligned with ``domain.elements``.
    """

    domain: FrequencyVector
    probs: np.ndarray
    epsilon: float
    beta: float
    missing_count: int
    present: np.ndarray  # boolean mask, True where the source PVR had the element

    @property
    def weights(self) -> dict[str, float]:
        return dict(zip(self.domain.elements, self.probs.tolist()))


@dataclass(frozen=True)
class EpsilonPolicy:
    mode: str = "auto"
    fixed_value: float | None = None

    def __post_init__(self):
        if self.mode not in ("auto", "fixed"):
            raise InputError(f"epsilon mode must be 'auto' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed" and not (self.fixed_value is not None and 0 < self.fixed_value < 1):
            raise InputError("a fixed epsilon must lie in (0, 1)")

    @classmethod
    def parse(cls, text: str | float | None) -> "EpsilonPolicy":
        if text is None or text == "auto":
            return cls()
        try:
            return cls("fixed", float(text))
        except ValueError as exc:
            raise InputError(f"epsilon must be 'auto' or a float, got {text!r}") from exc

    def resolve(self, counts: CountTable) -> float:
        return default_epsilon(counts) if self.mode == "auto" else float(self.fixed_value)


def build_dvr(counts: CountTable) -> FrequencyVector:
    if counts.total_tokens <= 0:
        raise EmptyDomainError("the domain has no tokens")
    return FrequencyVector.from_counts(counts.global_counts)


def build_pvr(counts: CountTable, entity_id: str) -> FrequencyVector:
    try:
        entity = counts.per_entity[entity_id]
    except KeyError:
        raise UnknownEntityError(f"unknown entity {entity_id!r}") from None
    return FrequencyVector.from_counts(entity)


def build_pvrs(counts: CountTable) -> dict[str, FrequencyVector]:
    return {eid: build_pvr(counts, eid) for eid in counts.entity_ids}


def default_epsilon(counts: CountTable) -> float:
    """Half the frequency of a single occurrence in the domain."""
    return 1.0 / (2 * counts.total_tokens)


def extend_vector(pvr: FrequencyVector, domain: FrequencyVector, epsilon: float) -> ExtendedVector:
    if not 0 < epsilon < 1:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    dense = pvr.dense(domain)
    present = dense > 0
    missing = len(domain) - len(pvr)
    if missing * epsilon >= 1:
        raise EpsilonTooLargeError(
            f"epsilon {epsilon:g} times {missing} missing elements is >= 1; "
            "the entity is too small for this domain"
        )
    beta = 1.0 - missing * epsilon
    probs = np.where(present, beta * dense, epsilon)
    probs.setflags(write=False)
    return ExtendedVector(domain, probs, float(epsilon), beta, missing, present)


def write_vector_csv(vec: FrequencyVector, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element", "weight"])
        for e, p in zip(vec.elements, vec.probs):
            w.writerow([e, repr(float(p))])


def vector_to_json(vec: FrequencyVector) -> str:
    return json.dumps({"support_size": vec.support_size, "weights": vec.weights}, ensure_ascii=False, indent=1)
