"""Vocabulary construction and log-TF x IDF document-term matrices.

Matrices are `scipy.sparse.csr_matrix` with sorted column indices; absent
terms are never stored, so an empty document is an empty row.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedDocument
from .errors import EmptyCorpus

DEFAULT_MAX_TERMS = 10_000


def _tokens(doc) -> Sequence[str]:
    return doc.tokens if isinstance(doc, TokenizedDocument) else doc


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def idf_vector(self) -> np.ndarray:
        return np.log(self.n_docs / np.asarray(self.df, dtype=np.float64))


def build_vocabulary(corpus, max_terms: int = DEFAULT_MAX_TERMS) -> Vocabulary:
    """Keep the `max_terms` most frequent terms (ties broken lexicographically).

    `corpus` is a sequence of TokenizedDocument or of plain token lists.
    """
    docs = [_tokens(d) for d in corpus]
    if not docs:
        raise EmptyCorpus()
    total: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for toks in docs:
        total.update(toks)
        df.update(set(toks))
    ranked = sorted(total, key=lambda t: (-total[t], t))[:max_terms]
    return Vocabulary(tuple(ranked), tuple(df[t] for t in ranked), len(docs))


def log_tf(tf):
    return 1.0 + np.log1p(tf) if isinstance(tf, np.ndarray) else 1.0 + math.log1p(tf)


def idf(vocab: Vocabulary, term_id: int) -> float:
    return math.log(vocab.n_docs / vocab.df[term_id])


def vectorize(corpus, vocab: Vocabulary) -> sp.csr_matrix:
    idf_vec = vocab.idf_vector()
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in corpus:
        counts = Counter(t for t in _tokens(doc) if t in vocab.index)
        cols = sorted(vocab.index[t] for t in counts)
        for c in cols:
            w = log_tf(counts[vocab.terms[c]]) * idf_vec[c]
            if w != 0.0:
                indices.append(c)
                data.append(w)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(indptr) - 1, len(vocab)),
    )


def row_normalize(m: sp.csr_matrix) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.float64, copy=True)
    sums = np.asarray(m.sum(axis=1)).ravel()
    # stored rows always have a nonzero sum; divide (not multiply by 1/sum) so x/x == 1 exactly
    m.data /= np.repeat(sums, np.diff(m.indptr))
    return m


def matrix_rows(m: sp.csr_matrix) -> list[list[tuple[int, float]]]:
    return [
        list(zip(m.indices[m.indptr[i]:m.indptr[i + 1]].tolist(), m.data[m.indptr[i]:m.indptr[i + 1]].tolist()))
        for i in range(m.shape[0])
    ]


def dump_matrix(m: sp.csr_matrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(matrix_rows(m)):
            fh.write(json.dumps({"row": i, "entries": [[c, w] for c, w in row]}) + "\n")
