"""Sentence-embedding providers: a text -> fixed-size vector map.

Two implementations are shipped.  `FileProvider` serves vectors precomputed by
an external sentence encoder (e.g. a 384-dim MiniLM model), keyed by document
id.  `ProjectionProvider` is a self-contained fallback: a seeded Gaussian
random projection of the document's TF-IDF row, L2-normalized.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, Document, tokenize
from .errors import DimensionMismatch, MalformedRecord, MissingEmbedding, ValidationError
from .tfidf import Vocabulary, vectorize

DEFAULT_DIM = 384
MAX_TOKENS = 256


def truncate(tokens: Sequence[str], max_len: int = MAX_TOKENS) -> list[str]:
    return list(tokens[:max_len])


class EmbeddingProvider:
    dim: int

    def embed(self, doc: Document) -> np.ndarray:
        raise NotImplementedError

    def embed_corpus(self, docs: Corpus | Iterable[Document]) -> np.ndarray:
        rows = [self.embed(d) for d in docs]
        if not rows:
            return np.zeros((0, self.dim))
        return np.vstack(rows)


class FileProvider(EmbeddingProvider):
    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.dim = dim
        self._vectors = vectors

    @classmethod
    def load(cls, path: str | Path, dim: int = DEFAULT_DIM) -> "FileProvider":
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    doc_id = rec["id"]
                    vec = np.asarray(rec["vector"], dtype=np.float64)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise MalformedRecord(line_no, str(exc)) from None
                if vec.ndim != 1 or vec.shape[0] != dim:
                    raise DimensionMismatch(
                        f"line {line_no}: vector for {doc_id!r} has length {vec.size}, expected {dim}"
                    )
                if not np.all(np.isfinite(vec)):
                    raise ValidationError(f"line {line_no}: non-finite entries for {doc_id!r}")
                vec.setflags(write=False)
                vectors[doc_id] = vec
        return cls(vectors, dim)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._vectors

    def embed(self, doc: Document | str) -> np.ndarray:
        doc_id = doc if isinstance(doc, str) else doc.id
        try:
            return self._vectors[doc_id].copy()
        except KeyError:
            raise MissingEmbedding(doc_id) from None

    def missing(self, corpus: Corpus) -> list[str]:
        return [d.id for d in corpus if d.id not in self._vectors]


def file_provider(path: str | Path, dim: int = DEFAULT_DIM) -> FileProvider:
    return FileProvider.load(path, dim)


class ProjectionProvider(EmbeddingProvider):
    def __init__(self, vocab: Vocabulary, dim: int = DEFAULT_DIM, seed: int = 0,
                 stopwords: Iterable[str] | None = None, max_len: int = MAX_TOKENS):
        if dim < 2:
            raise ValidationError(f"dim must be at least 2, got {dim}")
        self.vocab = vocab
        self.dim = dim
        self.max_len = max_len
        self.stopwords = None if stopwords is None else frozenset(stopwords)
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((len(vocab), dim)) / np.sqrt(dim)
        self.projection.setflags(write=False)

    def embed_tokens(self, token_lists: Sequence[Sequence[str]]) -> np.ndarray:
        rows = vectorize([truncate(t, self.max_len) for t in token_lists], self.vocab)
        out = np.asarray(rows @ self.projection)
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        return np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)

    def embed(self, doc: Document) -> np.ndarray:
        return self.embed_tokens([tokenize(doc.text, self.stopwords)])[0]

    def embed_corpus(self, docs) -> np.ndarray:
        return self.embed_tokens([tokenize(d.text, self.stopwords) for d in docs])


def projection_provider(vocab: Vocabulary, dim: int = DEFAULT_DIM, seed: int = 0, **kwargs) -> ProjectionProvider:
    return ProjectionProvider(vocab, dim, seed, **kwargs)


def write_embeddings(ids: Sequence[str], vectors: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, v in zip(ids, vectors):
            fh.write(json.dumps({"id": doc_id, "vector": [float(x) for x in v]}) + "\n")
