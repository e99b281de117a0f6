"""Planted-class synthetic corpora with a tunable token-level noise rate."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Corpus, Document
from .errors import ValidationError


@dataclass(frozen=True)
class PlantedSpec:
    n_classes: int = 4
    docs_per_class: int = 500
    vocab_per_class: int = 50
    shared_vocab: int = 200
    doc_length: int = 20
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "docs_per_class", "vocab_per_class", "shared_vocab", "doc_length"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 <= self.noise < 1.0:
            raise ValidationError(f"noise must lie in [0, 1), got {self.noise}")

    def to_dict(self) -> dict:
        return asdict(self)


def class_word(c: int, j: int) -> str:
    return f"c{c}w{j}"


def shared_word(j: int) -> str:
    return f"sw{j}"


def generate(spec: PlantedSpec) -> Corpus:
    """Each token comes from the class's private vocabulary with prob. 1 - noise,
    otherwise from the shared vocabulary.  Documents are emitted class by class."""
    rng = np.random.default_rng(spec.seed)
    width = len(str(spec.n_classes * spec.docs_per_class - 1))
    docs = []
    i = 0
    for c in range(spec.n_classes):
        for _ in range(spec.docs_per_class):
            from_shared = rng.random(spec.doc_length) < spec.noise
            private = rng.integers(0, spec.vocab_per_class, size=spec.doc_length)
            shared = rng.integers(0, spec.shared_vocab, size=spec.doc_length)
            words = [
                shared_word(s) if use_shared else class_word(c, p)
                for use_shared, p, s in zip(from_shared, private, shared)
            ]
            docs.append(Document(f"doc{i:0{width}d}", " ".join(words), f"class{c}"))
            i += 1
    return Corpus(tuple(docs))
