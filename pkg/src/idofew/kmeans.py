"""Lloyd's KMeans with k-means++ seeding over dense row vectors."""

from __future__ import annotations

import logging

import numpy as np

from .clustering import Clustering
from .errors import DimensionMismatch, TooFewPoints, ValidationError

log = logging.getLogger(__name__)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise DimensionMismatch(f"expected a 2-D matrix with dim > 0, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("matrix contains non-finite values")
    return X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    if X.shape[1] != C.shape[1]:
        raise DimensionMismatch(f"points have dim {X.shape[1]}, centroids {C.shape[1]}")
    # explicit differences (not the |x|^2 - 2xc + |c|^2 expansion) keep exact ties exact
    out = np.empty((X.shape[0], C.shape[0]))
    step = max(1, (1 << 22) // max(1, C.size))
    for lo in range(0, X.shape[0], step):
        diff = X[lo:lo + step, None, :] - C[None, :, :]
        out[lo:lo + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def kmeanspp_init(X, k: int, seed: int = 0) -> np.ndarray:
    X = _as_matrix(X)
    n = X.shape[0]
    if n < k:
        raise TooFewPoints(n, k)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    closest = ((X - X[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen centroid
            nxt = int(rng.integers(n))
        chosen.append(nxt)
        closest = np.minimum(closest, ((X - X[nxt]) ** 2).sum(1))
    return X[chosen].copy()


def assign(X, centroids) -> np.ndarray:
    """Nearest centroid by squared Euclidean distance; ties go to the lower index."""
    X = _as_matrix(X)
    C = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    return np.argmin(_sq_dists(X, C), axis=1)


def update(X, assignment, k: int | None = None, previous=None) -> np.ndarray:
    """Cluster means; an empty cluster is re-seeded at the point farthest from
    its currently assigned centroid (distinct points for several empties)."""
    X = _as_matrix(X)
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != (X.shape[0],):
        raise DimensionMismatch("assignment length differs from number of rows")
    if k is None:
        k = int(a.max()) + 1 if previous is None else len(previous)
    counts = np.bincount(a, minlength=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, a, X)
    C = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        ref = C if previous is None else np.asarray(previous, dtype=np.float64)
        resid = ((X - ref[a]) ** 2).sum(1)
        far = np.argsort(-resid, kind="stable")
        for j, idx in zip(empty, far):
            C[j] = X[idx]
    return C


def sse(X, centroids, assignment) -> float:
    X = _as_matrix(X)
    C = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if X.shape[1] != C.shape[1]:
        raise DimensionMismatch(f"points have dim {X.shape[1]}, centroids {C.shape[1]}")
    a = np.asarray(assignment, dtype=np.int64)
    return float(((X - C[a]) ** 2).sum())


def kmeans_cluster(X, k: int, max_iter: int = 300, tol: float = 1e-6, seed: int = 0) -> Clustering:
    """Lloyd iterations from k-means++ seeds.

    The trace holds, per iteration, the SSE of that iteration's assignment
    against the updated means, so the last entry is the final objective.
    """
    X = _as_matrix(X)
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    if X.shape[0] < k:
        raise TooFewPoints(X.shape[0], k)
    C = kmeanspp_init(X, k, seed)
    trace: list[float] = []
    a = None
    it = 0
    for it in range(1, max_iter + 1):
        a_new = assign(X, C)
        C_new = update(X, a_new, k, previous=C)
        trace.append(sse(X, C_new, a_new))
        shift = float(np.sqrt(((C_new - C) ** 2).sum(1)).max())
        stable = a is not None and np.array_equal(a, a_new)
        a, C = a_new, C_new
        if shift < tol or stable:
            break
    log.debug("kmeans: %d iterations, sse=%.6g", it, trace[-1])
    return Clustering(k, a, tuple(trace), it)


def kmeans_fit(X, k: int, max_iter: int = 300, tol: float = 1e-6, seed: int = 0) -> tuple[Clustering, np.ndarray]:
    """Like `kmeans_cluster` but also returns the final centroids."""
    cl = kmeans_cluster(X, k, max_iter, tol, seed)
    return cl, update(X, cl.assignment, k)
