"""Document loading, normalization into bag-of-elements counts, and filtering."""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import snowballstemmer

from .errors import EmptyDomainError, IngestError

FORMATS = ("jsonl_text", "csv_counts")

_TOKEN_RE = re.compile(r"\w+(?:['’]\w+)*")
_INNER_PUNCT_RE = re.compile(r"['’_]")


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    text = resources.files("lpa").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def read_wordlist(path: str | Path) -> frozenset[str]:
    """One word per line; blank lines and ``#`` comments are skipped."""
    words = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.append(line)
    return frozenset(words)


@dataclass(frozen=True)
class PipelineConfig:
    lowercase: bool = True
    strip_punctuation: bool = True
    stopword_list: frozenset[str] = field(default_factory=default_stopwords)
    stemming: bool = True
    min_element_count: int = 5
    min_docs_per_entity: int = 30
    allow_list: frozenset[str] | None = None
    deny_list: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.min_element_count < 0 or self.min_docs_per_entity < 0:
            raise IngestError("min_element_count and min_docs_per_entity must be >= 0")
        object.__setattr__(self, "stopword_list", frozenset(self.stopword_list))
        object.__setattr__(self, "deny_list", frozenset(self.deny_list))
        if self.allow_list is not None:
            object.__setattr__(self, "allow_list", frozenset(self.allow_list))

    @classmethod
    def for_format(cls, fmt: str, **overrides) -> "PipelineConfig":
        """Defaults per input format: stemming is on for text, off for generic elements."""
        if fmt not in FORMATS:
            raise IngestError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        base = {"stemming": fmt == "jsonl_text"}
        base.update(overrides)
        return cls(**base)

    def element_allowed(self, element: str) -> bool:
        if element in self.deny_list:
            return False
        return self.allow_list is None or element in self.allow_list


@dataclass(frozen=True)
class EntityDocument:
    entity_id: str
    doc_id: str
    text: str | None = None
    timestamp: datetime | None = None
    element_counts: Mapping[str, int] | None = None

    def __post_init__(self):
        if (self.text is None) == (self.element_counts is None):
            raise IngestError(
                f"document {self.entity_id}/{self.doc_id}: exactly one of text and element_counts must be set"
            )
        if self.element_counts is not None:
            for element, count in self.element_counts.items():
                if not isinstance(count, int) or isinstance(count, bool) or count <= 0:
                    raise IngestError(
                        f"document {self.entity_id}/{self.doc_id}: count for {element!r} must be a positive integer"
                    )
            object.__setattr__(self, "element_counts", dict(self.element_counts))


@dataclass
class CountTable:
    """Per-entity and domain-wide element counts.

    ``doc_counts`` keeps the number of documents behind each entity so the
    entity-size filter can be re-applied to an already built table.
    """

    per_entity: dict[str, Counter]
    global_counts: Counter
    total_tokens: int
    doc_counts: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_entity_counts(cls, per_entity: Mapping[str, Mapping[str, int]],
                           doc_counts: Mapping[str, int] | None = None) -> "CountTable":
        per = {eid: Counter({e: c for e, c in counts.items() if c > 0}) for eid, counts in per_entity.items()}
        glob: Counter = Counter()
        for counts in per.values():
            glob.update(counts)
        docs = dict(doc_counts) if doc_counts is not None else {eid: 1 for eid in per}
        return cls(per, glob, sum(glob.values()), docs)

    @property
    def entity_ids(self) -> list[str]:
        return sorted(self.per_entity)

    def subset(self, entity_ids: Iterable[str]) -> "CountTable":
        ids = list(entity_ids)
        return CountTable.from_entity_counts(
            {eid: self.per_entity[eid] for eid in ids},
            {eid: self.doc_counts.get(eid, 1) for eid in ids},
        )


def _stemmer():
    return snowballstemmer.stemmer("porter")


def tokenize(text: str | bytes, config: PipelineConfig | None = None, doc_id: str | None = None) -> list[str]:
    """Normalize ``text`` into a list of elements, preserving order."""
    config = config or PipelineConfig()
    label = doc_id or "<text>"
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"document {label}: invalid UTF-8 ({exc.reason} at byte {exc.start})") from exc
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise IngestError(f"document {label}: text is not valid UTF-8 ({exc.reason})") from exc

    if config.lowercase:
        text = text.lower()
    if config.strip_punctuation:
        tokens = [_INNER_PUNCT_RE.sub("", t) for t in _TOKEN_RE.findall(text)]
        tokens = [t for t in tokens if t]
    else:
        tokens = text.split()
    stop = config.stopword_list
    tokens = [t for t in tokens if t not in stop]
    if config.stemming:
        tokens = _stemmer().stemWords(tokens)
    return [t for t in tokens if t and config.element_allowed(t)]


def _parse_timestamp(value, where: str) -> datetime | None:
    if value is None or value == "":
        return None
    if not isinstance(value, str):
        raise IngestError(f"{where}: timestamp must be an RFC 3339 string")
    s = value.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(s)
    except ValueError as exc:
        raise IngestError(f"{where}: bad timestamp {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def _load_jsonl(path: Path) -> list[EntityDocument]:
    docs = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            where = f"{path}:{lineno}"
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise IngestError(f"{where}: invalid UTF-8 ({exc.reason})") from exc
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{where}: malformed JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise IngestError(f"{where}: record must be a JSON object")
            try:
                entity_id, doc_id = str(rec["entity_id"]), str(rec["doc_id"])
            except KeyError as exc:
                raise IngestError(f"{where}: missing key {exc.args[0]!r}") from exc
            text = rec.get("text")
            counts = rec.get("element_counts")
            if text is not None and not isinstance(text, str):
                raise IngestError(f"{where}: text must be a string")
            if counts is not None and not isinstance(counts, dict):
                raise IngestError(f"{where}: element_counts must be an object")
            try:
                docs.append(EntityDocument(entity_id, doc_id, text,
                                           _parse_timestamp(rec.get("timestamp"), where), counts))
            except IngestError as exc:
                raise IngestError(f"{where}: {exc}") from exc
    return docs


def _load_csv_counts(path: Path) -> list[EntityDocument]:
    docs = []
    try:
        fh = open(path, newline="", encoding="utf-8")
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return []
            header = [h.strip() for h in header]
            if header != ["entity_id", "element", "count"]:
                raise IngestError(f"{path}:1: expected header entity_id,element,count, got {','.join(header)}")
            for row in reader:
                lineno = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise IngestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
                entity_id, element, count = (c.strip() for c in row)
                if not count.isdigit() or int(count) == 0:
                    raise IngestError(f"{path}:{lineno}: count must be a positive unsigned integer, got {count!r}")
                docs.append(EntityDocument(entity_id, element, element_counts={element: int(count)}))
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path}: invalid UTF-8 ({exc.reason})") from exc
    return docs


def load_documents(path: str | Path, format: str = "jsonl_text") -> list[EntityDocument]:
    """Read documents from ``path``.

    ``jsonl_text``: one object per line with entity_id, doc_id, text and an
    optional RFC 3339 timestamp. ``csv_counts``: header entity_id,element,count,
    one counts document per row (doc_id is the element).
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: no such file")
    if format == "jsonl_text":
        docs = _load_jsonl(path)
    elif format == "csv_counts":
        docs = _load_csv_counts(path)
    else:
        raise IngestError(f"unknown format {format!r}; expected one of {FORMATS}")
    seen = set()
    for doc in docs:
        key = (doc.entity_id, doc.doc_id)
        if key in seen:
            raise IngestError(f"{path}: duplicate document {doc.entity_id}/{doc.doc_id}")
        seen.add(key)
    return docs


def write_jsonl(docs: Iterable[EntityDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            rec = {"entity_id": doc.entity_id, "doc_id": doc.doc_id}
            if doc.text is not None:
                rec["text"] = doc.text
            else:
                rec["element_counts"] = dict(sorted(doc.element_counts.items()))
            if doc.timestamp is not None:
                rec["timestamp"] = doc.timestamp.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def document_counts(doc: EntityDocument, config: PipelineConfig) -> Counter:
    if doc.text is not None:
        return Counter(tokenize(doc.text, config, doc_id=f"{doc.entity_id}/{doc.doc_id}"))
    return Counter({e: c for e, c in doc.element_counts.items() if config.element_allowed(e)})


def filter_counts(table: CountTable, config: PipelineConfig) -> CountTable:
    """Apply the entity-size and element-frequency filters to a built table.

    Entities left without any element after element filtering are dropped.
    """
    kept = [eid for eid in sorted(table.per_entity) if table.doc_counts.get(eid, 0) >= config.min_docs_per_entity]
    glob: Counter = Counter()
    for eid in kept:
        glob.update(table.per_entity[eid])
    retained = {e for e, c in glob.items() if c >= config.min_element_count}
    per = {}
    for eid in kept:
        counts = Counter({e: c for e, c in table.per_entity[eid].items() if e in retained})
        if counts:
            per[eid] = counts
    if not per:
        raise EmptyDomainError("every entity was filtered out; the domain is empty")
    return CountTable.from_entity_counts(per, {eid: table.doc_counts[eid] for eid in per})


def build_counts(docs: Iterable[EntityDocument], config: PipelineConfig | None = None) -> CountTable:
    config = config or PipelineConfig()
    per: dict[str, Counter] = {}
    ndocs: Counter = Counter()
    for doc in docs:
        per.setdefault(doc.entity_id, Counter()).update(document_counts(doc, config))
        ndocs[doc.entity_id] += 1
    if not per:
        raise EmptyDomainError("no documents to count")
    raw = CountTable.from_entity_counts(per, ndocs)
    return filter_counts(raw, config)
