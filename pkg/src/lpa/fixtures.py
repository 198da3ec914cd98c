"""Seeded synthetic corpora with known authorship.

Two generators share one author model. Every author writes from a
Zipfian domain distribution distorted by a personal style: multiplicative
log-normal noise on every word, a handful of domain-popular words the
author avoids, and a set of pet words from the tail the author overuses.

* ``books_corpus``: books split into chapters; each book adds its own
  topical words on top of the author's style, each chapter a few more.
* ``reviews_corpus``: short timestamped posts per user, each post mixing
  the user's style with the vocabulary of a shared "item" (a film, say).

Elements are pronounceable pseudo-words so the text survives the default
tokenizer untouched (use ``stemming=False`` to keep them intact).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .ingest import EntityDocument, default_stopwords

_ONSETS = ("b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z",
           "br", "cl", "dr", "gr", "pl", "st", "tr", "sk")
_VOWELS = ("a", "e", "i", "o", "u", "ai", "ou", "ea")
_CODAS = ("", "", "n", "r", "l", "m", "k", "x")
_FILLERS = ("the", "and", "of", "a", "to", "in", "was", "it", "that", "with")


def pseudo_vocabulary(size: int, rng: np.random.Generator) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    stop = default_stopwords()
    while len(words) < size:
        n = int(rng.integers(2, 5))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n))
        w += _CODAS[rng.integers(len(_CODAS))]
        if w not in seen and w not in stop:
            seen.add(w)
            words.append(w)
    return words


def zipf_weights(size: int, exponent: float = 1.07, offset: float = 2.7) -> np.ndarray:
    w = (np.arange(1, size + 1) + offset) ** -exponent
    return w / w.sum()


@dataclass(frozen=True)
class StyleModel:
    vocab_size: int = 8000
    style_sigma: float = 0.8
    avoid_head: int = 400
    avoid_fraction: float = 0.06
    pet_words: int = 40
    pet_mass: float = 0.06

    def author(self, base: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        w = base * np.exp(self.style_sigma * rng.standard_normal(base.size))
        avoid = rng.choice(self.avoid_head, size=int(self.avoid_head * self.avoid_fraction), replace=False)
        w[avoid] = 0.0
        pets = rng.choice(np.arange(self.avoid_head, base.size), size=self.pet_words, replace=False)
        w /= w.sum()
        boost = rng.dirichlet(np.ones(self.pet_words)) * self.pet_mass
        w = w * (1 - self.pet_mass)
        w[pets] += boost
        return w / w.sum()


def _topic(size: int, k: int, mass: float, rng: np.random.Generator, low: int = 100) -> np.ndarray:
    t = np.zeros(size)
    idx = rng.choice(np.arange(low, size), size=k, replace=False)
    t[idx] = rng.dirichlet(np.ones(k)) * mass
    return t


def _mix(dist: np.ndarray, topic: np.ndarray) -> np.ndarray:
    m = dist * (1 - topic.sum()) + topic
    return m / m.sum()


def _render(tokens: np.ndarray, vocab: np.ndarray, rng: np.random.Generator, fillers: bool) -> str:
    words = vocab[tokens].tolist()
    if fillers:
        # sprinkle stop-words and sentence punctuation; the tokenizer removes both
        out = []
        for i, w in enumerate(words):
            if rng.random() < 0.25:
                out.append(_FILLERS[rng.integers(len(_FILLERS))])
            out.append(w + ("." if i % 12 == 11 else ""))
        words = out
    return " ".join(words)


def books_corpus(n_authors: int = 8, books_per_author=(1, 2), chapters=(18, 28), chapter_len=(700, 2200),
                 seed: int = 7, model: StyleModel = StyleModel(), fillers: bool = False
                 ) -> tuple[list[EntityDocument], dict[str, str]]:
    """Books by several authors, one document per chapter.

    Returns the documents (``entity_id`` = book, ``doc_id`` = chapter
    number) and a map from book id to author id.
    """
    rng = np.random.default_rng(seed)
    vocab = np.array(pseudo_vocabulary(model.vocab_size, rng))
    base = zipf_weights(model.vocab_size)
    docs: list[EntityDocument] = []
    authors: dict[str, str] = {}
    for a in range(n_authors):
        style = model.author(base, rng)
        author_id = f"author{a:02d}"
        for b in range(int(rng.integers(books_per_author[0], books_per_author[1] + 1))):
            book_id = f"{author_id}_book{b}"
            authors[book_id] = author_id
            book = _mix(style, _topic(model.vocab_size, 60, 0.10, rng))
            for c in range(int(rng.integers(chapters[0], chapters[1] + 1))):
                dist = _mix(book, _topic(model.vocab_size, 15, 0.05, rng))
                n = int(rng.integers(chapter_len[0], chapter_len[1] + 1))
                tokens = rng.choice(model.vocab_size, size=n, p=dist)
                docs.append(EntityDocument(book_id, f"ch{c + 1:02d}", _render(tokens, vocab, rng, fillers)))
    return docs, authors


def reviews_corpus(n_users: int = 150, reviews=(35, 80), review_len=(50, 110), n_items: int = 300,
                   seed: int = 11, model: StyleModel = StyleModel(), start: str = "2010-01-01",
                   span_days: int = 900, fillers: bool = False) -> list[EntityDocument]:
    """Timestamped posts by ``n_users`` independent users.

    Posting days come in bursts: a user picks a few active periods and
    posts on random days inside them, sometimes several times a day.
    """
    rng = np.random.default_rng(seed)
    vocab = np.array(pseudo_vocabulary(model.vocab_size, rng))
    base = zipf_weights(model.vocab_size)
    items = [_topic(model.vocab_size, 12, 0.12, rng, low=50) for _ in range(n_items)]
    t0 = datetime.fromisoformat(start).replace(tzinfo=timezone.utc)
    width = max(3, len(str(n_users - 1)))
    docs: list[EntityDocument] = []
    for u in range(n_users):
        style = model.author(base, rng)
        user = f"user{u:0{width}d}"
        n_reviews = int(rng.integers(reviews[0], reviews[1] + 1))
        days = _bursty_days(n_reviews, span_days, rng)
        for r in range(n_reviews):
            dist = _mix(style, items[int(rng.integers(n_items))])
            n = int(rng.integers(review_len[0], review_len[1] + 1))
            tokens = rng.choice(model.vocab_size, size=n, p=dist)
            ts = t0 + timedelta(days=int(days[r]), seconds=int(rng.integers(0, 86400)))
            docs.append(EntityDocument(user, f"r{r:03d}", _render(tokens, vocab, rng, fillers), ts))
    return docs


def _bursty_days(n: int, span: int, rng: np.random.Generator) -> np.ndarray:
    n_bursts = int(rng.integers(2, 6))
    centers = rng.integers(0, span, size=n_bursts)
    which = rng.integers(0, n_bursts, size=n)
    offsets = np.rint(rng.exponential(6.0, size=n) * rng.choice((-1, 1), size=n)).astype(int)
    return np.sort(np.clip(centers[which] + offsets, 0, span - 1))
