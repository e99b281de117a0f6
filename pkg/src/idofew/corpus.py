"""Dataset ingestion, preprocessing, and seeded splitting/sampling."""

from __future__ import annotations

import json
import math
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateId, EmptyCorpus, MalformedRecord, NotEnoughLabels, ValidationError


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    gold_label: str | None = None


@dataclass(frozen=True)
class TokenizedDocument:
    id: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...] = ()
    label_set: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        docs = tuple(self.documents)
        object.__setattr__(self, "documents", docs)
        seen = set()
        for doc in docs:
            if not doc.id:
                raise ValidationError("document id must be nonempty")
            if doc.id in seen:
                raise DuplicateId(doc.id)
            seen.add(doc.id)
        labels = sorted({d.gold_label for d in docs if d.gold_label is not None})
        object.__setattr__(self, "label_set", tuple(labels))

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    def label_indices(self, label_set: Sequence[str] | None = None) -> np.ndarray:
        """Gold labels as indices into `label_set` (defaults to this corpus's own)."""
        index = {lab: i for i, lab in enumerate(label_set or self.label_set)}
        return np.array([index[d.gold_label] for d in self.documents], dtype=np.int64)

    def without_labels(self) -> "Corpus":
        return Corpus(tuple(Document(d.id, d.text, None) for d in self.documents))


def load_corpus(path: str | Path, format: str = "jsonl", allow_empty: bool = False) -> Corpus:
    if format != "jsonl":
        raise ValidationError(f"unsupported corpus format {format!r}")
    docs = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, str(exc)) from None
            if not isinstance(rec, dict):
                raise MalformedRecord(line_no, "record is not an object")
            doc_id, text, label = rec.get("id"), rec.get("text"), rec.get("label")
            if not isinstance(doc_id, str) or not doc_id:
                raise MalformedRecord(line_no, "missing or non-string 'id'")
            if not isinstance(text, str):
                raise MalformedRecord(line_no, "missing or non-string 'text'")
            if label is not None and not isinstance(label, str):
                raise MalformedRecord(line_no, "'label' must be a string or null")
            if not text and not allow_empty:
                raise MalformedRecord(line_no, "empty text")
            if doc_id in seen:
                raise DuplicateId(doc_id)
            seen[doc_id] = line_no
            docs.append(Document(doc_id, text, label))
    return Corpus(tuple(docs))


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in corpus:
            fh.write(json.dumps({"id": d.id, "text": d.text, "label": d.gold_label}, ensure_ascii=False))
            fh.write("\n")


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    text = resources.files("idofew").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip() for w in fh if w.strip())


def _is_strippable(ch: str) -> bool:
    # punctuation (P*) and symbols (S*): "$$$" must vanish like "!!!"
    return unicodedata.category(ch)[0] in "PS"


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> tuple[str, ...]:
    stop = default_stopwords() if stopwords is None else stopwords
    cleaned = "".join(ch for ch in text.lower() if not _is_strippable(ch))
    return tuple(tok for tok in cleaned.split() if tok and tok not in stop)


def preprocess(doc: Document, stopwords: Iterable[str] | None = None) -> TokenizedDocument:
    return TokenizedDocument(doc.id, tokenize(doc.text, stopwords))


def preprocess_corpus(corpus: Corpus, stopwords: Iterable[str] | None = None) -> list[TokenizedDocument]:
    stop = default_stopwords() if stopwords is None else frozenset(stopwords)
    return [preprocess(d, stop) for d in corpus]


def split(corpus: Corpus, train_ratio: float = 0.8, seed: int = 0) -> tuple[Corpus, Corpus]:
    if not 0.0 < train_ratio < 1.0:
        raise ValidationError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    n = len(corpus)
    if n == 0:
        raise EmptyCorpus()
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(train_ratio * n)
    docs = corpus.documents
    return (
        Corpus(tuple(docs[i] for i in perm[:n_train])),
        Corpus(tuple(docs[i] for i in perm[n_train:])),
    )


def fraction_size(n: int, fraction: float) -> int:
    return max(1, math.floor(fraction * n + 0.5))


def sample_fraction(corpus: Corpus, fraction: float, seed: int = 0) -> Corpus:
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    n = len(corpus)
    if n == 0:
        raise EmptyCorpus()
    idx = np.random.default_rng(seed).permutation(n)[: fraction_size(n, fraction)]
    return Corpus(tuple(corpus.documents[i] for i in idx))


def _stratified_quotas(sizes: list[int], m: int, rng: np.random.Generator) -> list[int]:
    """Spread m draws over classes as evenly as their sizes allow."""
    quotas = [0] * len(sizes)
    remaining = m
    open_classes = [c for c, s in enumerate(sizes) if s > 0]
    while remaining > 0:
        share, extra = divmod(remaining, len(open_classes))
        bonus = set(rng.permutation(open_classes)[:extra].tolist())
        for c in open_classes:
            quotas[c] += share + (1 if c in bonus else 0)
        remaining = 0
        for c in open_classes:
            if quotas[c] > sizes[c]:
                remaining += quotas[c] - sizes[c]
                quotas[c] = sizes[c]
        open_classes = [c for c in open_classes if quotas[c] < sizes[c]]
    return quotas


def sample_labeled(corpus: Corpus, m: int, seed: int = 0, stratified: bool = False) -> Corpus:
    labeled = [d for d in corpus if d.gold_label is not None]
    if m < 1:
        raise ValidationError(f"m must be positive, got {m}")
    if len(labeled) < m:
        raise NotEnoughLabels(len(labeled), m)
    rng = np.random.default_rng(seed)
    if not stratified:
        idx = rng.permutation(len(labeled))[:m]
        return Corpus(tuple(labeled[i] for i in idx))

    classes = sorted({d.gold_label for d in labeled})
    members = {c: [d for d in labeled if d.gold_label == c] for c in classes}
    quotas = _stratified_quotas([len(members[c]) for c in classes], m, rng)
    picked = []
    for c, q in zip(classes, quotas):
        idx = rng.permutation(len(members[c]))[:q]
        picked.extend(members[c][i] for i in idx)
    order = rng.permutation(len(picked))
    return Corpus(tuple(picked[i] for i in order))
