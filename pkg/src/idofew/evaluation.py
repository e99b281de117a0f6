"""Accuracy and information-theoretic agreement between labelings (in nats)."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .errors import EmptyInput, LengthMismatch


def _labels(x) -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != 1:
        a = a.ravel()
    return a


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = _labels(a), _labels(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"labelings have lengths {a.size} and {b.size}")
    if a.size == 0:
        raise EmptyInput("labelings are empty")
    return a, b


def accuracy(pred, gold) -> float:
    p, g = _pair(pred, gold)
    return float(np.mean(p == g))


def _entropy_from_counts(counts, n: int) -> float:
    return 0.0 - math.fsum(c / n * math.log(c / n) for c in counts if c)


def entropy(labels) -> float:
    a = _labels(labels)
    if a.size == 0:
        raise EmptyInput("labeling is empty")
    return _entropy_from_counts(Counter(a.tolist()).values(), a.size)


def _counts(a, b):
    a, b = _pair(a, b)
    la, lb = a.tolist(), b.tolist()
    return Counter(la), Counter(lb), Counter(zip(la, lb)), len(la)


def contingency(a, b) -> np.ndarray:
    """Joint counts; rows follow sorted labels of `a`, columns those of `b`."""
    _, _, joint, _ = _counts(a, b)
    ua = sorted({x for x, _ in joint})
    ub = sorted({y for _, y in joint})
    ra, rb = {x: i for i, x in enumerate(ua)}, {y: j for j, y in enumerate(ub)}
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    for (x, y), c in joint.items():
        table[ra[x], rb[y]] = c
    return table


def _mi(ca, cb, joint, n) -> float:
    # fsum is exactly rounded, so the result does not depend on argument order
    return math.fsum(c / n * math.log(c * n / (ca[x] * cb[y])) for (x, y), c in joint.items())


def mutual_information(a, b) -> float:
    return _mi(*_counts(a, b))


def nmi(a, b) -> float:
    """I(a;b) / sqrt(H(a) H(b)); 1.0 when both labelings are constant,
    0.0 when exactly one is."""
    ca, cb, joint, n = _counts(a, b)
    ha = _entropy_from_counts(ca.values(), n)
    hb = _entropy_from_counts(cb.values(), n)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    value = _mi(ca, cb, joint, n) / math.sqrt(ha * hb)
    assert -1e-12 <= value <= 1.0 + 1e-12, value
    return min(1.0, max(0.0, value))
