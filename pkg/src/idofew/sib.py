"""Sequential Information Bottleneck (sIB) hard clustering.

Documents are rows of a row-normalized sparse matrix, i.e. distributions
p(term | doc), each with uniform prior 1/n.  A cluster is summarized by its
mass (sum of member priors) and its centroid distribution p(term | cluster).

Each sweep draws every document once in random order, pulls it out of its
cluster as a singleton and re-merges it where the information loss is
smallest.  That loss is the prior-weighted Jensen-Shannon divergence

    cost(x, c) = (w_x + M_c) * JS_{pi}(p_x, p_c),   pi = (w_x, M_c) / (w_x + M_c)

which expands to ``w_x * KL(p_x || m) + M_c * KL(p_c || m)`` with ``m`` the
weighted mixture.  The tracked objective is the total information loss
``sum_x w_x KL(p_x || p_{c(x)})``; every re-merge is at worst neutral, so the
per-sweep trace never increases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .clustering import Clustering
from .errors import InvalidDistribution, TooFewDocuments, ValidationError

log = logging.getLogger(__name__)

MASS_TOL = 1e-9


@dataclass
class ClusterProfile:
    centroid_distribution: np.ndarray
    mass: float


def _check_distribution(v: np.ndarray, name: str) -> None:
    if np.any(v < 0):
        raise InvalidDistribution(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > MASS_TOL:
        raise InvalidDistribution(f"{name} sums to {v.sum():.12g}, expected 1")


def _kl_terms(p: np.ndarray, m: np.ndarray) -> float:
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / m[nz])))


def js_divergence(p, q, w_p: float = 1.0, w_q: float = 1.0) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidDistribution("p and q differ in shape")
    _check_distribution(p, "p")
    _check_distribution(q, "q")
    if w_p < 0 or w_q < 0 or w_p + w_q <= 0:
        raise InvalidDistribution("weights must be nonnegative with positive sum")
    pi_p = w_p / (w_p + w_q)
    pi_q = w_q / (w_p + w_q)
    m = pi_p * p + pi_q * q
    return pi_p * _kl_terms(p, m) + pi_q * _kl_terms(q, m)


def merge_cost(doc_dist, doc_prior: float, profile: ClusterProfile) -> float:
    if profile.mass <= 0:
        return 0.0
    return (doc_prior + profile.mass) * js_divergence(
        doc_dist, profile.centroid_distribution, doc_prior, profile.mass
    )


def init_partition(n_docs: int, k: int, seed: int = 0) -> Clustering:
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    if n_docs < k:
        raise TooFewDocuments(n_docs, k)
    rng = np.random.default_rng(seed)
    return Clustering(k, rng.integers(0, k, size=n_docs))


def _merge_costs(cols: np.ndarray, vals: np.ndarray, w: float, sums: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Cost of merging one document into every cluster at once.

    Only the document's support is touched: outside it the mixture is
    ``pi_c * p_c``, so the centroid's KL there collapses to
    ``(1 - p_c(support)) * log(1 / pi_c)``.
    """
    live = masses > 0
    costs = np.zeros(masses.shape[0])
    if not live.any():
        return costs
    M = masses[live]
    q = np.maximum(sums[live][:, cols], 0.0) / M[:, None]
    tot = w + M
    pi_p = (w / tot)[:, None]
    pi_q = (M / tot)[:, None]
    mix = pi_p * vals[None, :] + pi_q * q
    kl_p = np.sum(vals[None, :] * np.log(vals[None, :] / mix), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_q_in = np.where(q > 0, q * np.log(q / mix), 0.0).sum(axis=1)
    outside = np.maximum(1.0 - q.sum(axis=1), 0.0)
    kl_q = kl_q_in + outside * np.log(tot / M)
    costs[live] = w * kl_p + M * kl_q
    return costs


def cluster_sums(matrix: sp.csr_matrix, assignment: np.ndarray, k: int, priors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized profiles: per cluster sum of w_x * p_x and total mass."""
    n = matrix.shape[0]
    nonempty = np.diff(matrix.indptr) > 0
    member = sp.csr_matrix(
        (priors[nonempty], (assignment[nonempty], np.flatnonzero(nonempty))), shape=(k, n)
    )
    sums = np.asarray((member @ matrix).todense())
    masses = np.bincount(assignment[nonempty], weights=priors[nonempty], minlength=k).astype(np.float64)
    return sums, masses


def profiles(matrix: sp.csr_matrix, assignment: np.ndarray, k: int) -> list[ClusterProfile]:
    n = matrix.shape[0]
    sums, masses = cluster_sums(matrix, np.asarray(assignment), k, np.full(n, 1.0 / n))
    out = []
    for s, m in zip(sums, masses):
        out.append(ClusterProfile(s / m if m > 0 else np.zeros_like(s), float(m)))
    return out


def information_loss(matrix: sp.csr_matrix, assignment: np.ndarray, k: int) -> float:
    """sum_x w_x KL(p_x || p_{c(x)}) with uniform priors, profiles rebuilt from scratch."""
    n = matrix.shape[0]
    priors = np.full(n, 1.0 / n)
    assignment = np.asarray(assignment)
    sums, masses = cluster_sums(matrix, assignment, k, priors)
    rows = np.repeat(np.arange(n), np.diff(matrix.indptr))
    p = matrix.data
    keep = p > 0
    c = assignment[rows[keep]]
    q = sums[c, matrix.indices[keep]] / masses[c]
    return float(np.sum(priors[rows[keep]] * p[keep] * np.log(p[keep] / q)))


def sib_cluster(
    matrix: sp.csr_matrix,
    k: int,
    max_sweeps: int = 15,
    tol: float = 0.02,
    seed: int = 0,
    *,
    initial: np.ndarray | None = None,
    visit_orders: Sequence[np.ndarray] | None = None,
    check_profiles: bool = False,
) -> Clustering:
    """Cluster the rows of `matrix` (probability vectors; empty rows allowed).

    `initial` and `visit_orders` override the seeded random start and the
    per-sweep visiting order; they exist so tests can replay a run on a
    permuted matrix.  With `check_profiles`, the incrementally maintained
    profiles are compared against a from-scratch rebuild after every sweep.
    """
    matrix = sp.csr_matrix(matrix, dtype=np.float64)
    matrix.sort_indices()
    n = matrix.shape[0]
    if k < 2:
        raise ValidationError(f"k must be at least 2, got {k}")
    if n < k:
        raise TooFewDocuments(n, k)
    if max_sweeps < 1:
        raise ValidationError("max_sweeps must be positive")

    rng = np.random.default_rng(seed)
    if initial is None:
        assignment = init_partition(n, k, seed=int(rng.integers(2**63))).assignment.copy()
    else:
        assignment = np.array(initial, dtype=np.int64)
        if assignment.shape != (n,) or assignment.min() < 0 or assignment.max() >= k:
            raise ValidationError("initial partition does not match matrix/k")

    row_nnz = np.diff(matrix.indptr)
    nonempty = row_nnz > 0
    row_mass = np.asarray(matrix.sum(axis=1)).ravel()
    if np.any(np.abs(row_mass[nonempty] - 1.0) > 1e-6) or np.any(matrix.data < 0):
        raise InvalidDistribution("rows must be probability vectors (call row_normalize first)")
    assignment[~nonempty] = 0

    w = 1.0 / n
    priors = np.full(n, w)
    sums, masses = cluster_sums(matrix, assignment, k, priors)
    trace: list[float] = []
    sweeps = 0
    active = np.flatnonzero(nonempty)

    for sweep in range(max_sweeps):
        if visit_orders is not None:
            order = np.asarray(visit_orders[sweep])
        else:
            order = rng.permutation(n)
        changed = 0
        for x in order:
            if not nonempty[x]:
                continue
            lo, hi = matrix.indptr[x], matrix.indptr[x + 1]
            cols = matrix.indices[lo:hi]
            vals = matrix.data[lo:hi]
            old = assignment[x]
            sums[old, cols] -= w * vals
            masses[old] -= w
            if masses[old] < 0.5 * w:
                # last member left: reset exactly to avoid drift
                masses[old] = 0.0
                sums[old] = 0.0
            costs = _merge_costs(cols, vals, w, sums, masses)
            new = int(np.argmin(costs))
            sums[new, cols] += w * vals
            masses[new] += w
            if new != old:
                assignment[x] = new
                changed += 1
        sweeps += 1
        trace.append(information_loss(matrix, assignment, k))
        if check_profiles:
            fresh_sums, fresh_masses = cluster_sums(matrix, assignment, k, priors)
            assert np.allclose(fresh_sums, sums, atol=1e-9, rtol=0), "profile drift"
            assert np.allclose(fresh_masses, masses, atol=1e-9, rtol=0), "mass drift"
        log.debug("sib sweep %d: changed=%d loss=%.6g", sweep + 1, changed, trace[-1])
        if active.size and changed / n < tol:
            break
        if not active.size:
            break
        # re-sync against accumulated floating error once per sweep
        sums, masses = cluster_sums(matrix, assignment, k, priors)

    return Clustering(k, assignment, tuple(trace), sweeps)

