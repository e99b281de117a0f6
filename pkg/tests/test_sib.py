import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import jensenshannon

from idofew.corpus import preprocess_corpus
from idofew.errors import InvalidDistribution, TooFewDocuments
from idofew.evaluation import nmi
from idofew.sib import ClusterProfile, information_loss, init_partition, js_divergence, merge_cost, profiles, sib_cluster
from idofew.synth import PlantedSpec, generate
from idofew.tfidf import build_vocabulary, row_normalize, vectorize


def planted_matrix(**kw):
    corpus = generate(PlantedSpec(**kw))
    toks = preprocess_corpus(corpus)
    return row_normalize(vectorize(toks, build_vocabulary(toks))), corpus.label_indices()


def dense_loss(P, assignment, k):
    """Information loss with every centroid rebuilt by explicit loops."""
    n = P.shape[0]
    total = 0.0
    for c in range(k):
        members = [i for i in range(n) if assignment[i] == c and P[i].sum() > 0]
        if not members:
            continue
        centroid = sum(P[i] for i in members) / len(members)
        for i in members:
            for p, q in zip(P[i], centroid):
                if p > 0:
                    total += (1.0 / n) * p * math.log(p / q)
    return total


def brute_force_min(P, k=2):
    return min(dense_loss(P, a, k) for a in itertools.product(range(k), repeat=P.shape[0]))


class TestJS:
    def test_identical(self):
        assert js_divergence([0.2, 0.8], [0.2, 0.8]) == 0.0

    def test_disjoint_equal_weights(self):
        assert js_divergence([1, 0], [0, 1]) == pytest.approx(math.log(2), abs=1e-12)

    def test_disjoint_weighted(self):
        # 0.75 ln(4/3) + 0.25 ln 4
        assert js_divergence([1, 0], [0, 1], 3, 1) == pytest.approx(0.5623351446188083, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=8), st.integers(0, 2**31))
    def test_matches_scipy_equal_weights(self, raw, seed):
        p = np.asarray(raw) + 1e-3
        p /= p.sum()
        q = np.random.default_rng(seed).dirichlet(np.ones(len(p)))
        want = jensenshannon(p, q) ** 2
        assert js_divergence(p, q) == pytest.approx(want, abs=1e-12)
        assert 0 <= js_divergence(p, q) <= math.log(2) + 1e-12

    @pytest.mark.parametrize("p, q", [([0.5, 0.6], [0.5, 0.5]), ([-0.1, 1.1], [0.5, 0.5])])
    def test_invalid(self, p, q):
        with pytest.raises(InvalidDistribution):
            js_divergence(p, q)


class TestMergeCost:
    def test_equal_centroid(self):
        assert merge_cost([0.5, 0.5], 0.25, ClusterProfile(np.array([0.5, 0.5]), 0.75)) == pytest.approx(0.0, abs=1e-15)

    def test_empty_cluster_free(self):
        assert merge_cost([1.0, 0.0], 0.25, ClusterProfile(np.zeros(2), 0.0)) == 0.0

    def test_disjoint(self):
        cost = merge_cost([1.0, 0.0], 0.25, ClusterProfile(np.array([0.0, 1.0]), 0.75))
        assert cost == pytest.approx(0.5623351446188083, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_equals_loss_increase(self, seed):
        """Merging x into cluster c raises the information loss by merge_cost."""
        rng = np.random.default_rng(seed)
        P = rng.dirichlet(np.ones(5), size=6)
        m = sp.csr_matrix(P)
        base = np.array([0, 0, 0, 1, 1, 2])
        prof = profiles(m[:5], base[:5], 3)
        # priors are 1/n over the full 6-doc set
        cluster = ClusterProfile(prof[0].centroid_distribution, 3 / 6)
        joined = information_loss(m, np.array([0, 0, 0, 1, 1, 0]), 3)
        alone = information_loss(m, base, 3)
        assert joined - alone == pytest.approx(merge_cost(P[5], 1 / 6, cluster), abs=1e-12)


class TestInit:
    def test_deterministic(self):
        assert init_partition(100, 20, 1) == init_partition(100, 20, 1)

    def test_k_equals_n(self):
        a = init_partition(5, 5, 0).assignment
        assert a.min() >= 0 and a.max() < 5

    def test_too_few(self):
        with pytest.raises(TooFewDocuments):
            init_partition(3, 4, 0)


class TestSIB:
    def test_disjoint_groups_recovered(self):
        m, gold = planted_matrix(n_classes=2, docs_per_class=40, noise=0.0, seed=3)
        cl = sib_cluster(m, 2, seed=0)
        assert nmi(gold, cl.assignment) == 1.0

    def test_identical_documents(self):
        m = row_normalize(sp.csr_matrix(np.tile([1.0, 2.0, 3.0], (10, 1))))
        cl = sib_cluster(m, 2, seed=0)
        assert cl.n_sweeps <= 15
        assert cl.objective == pytest.approx(0.0, abs=1e-12)

    def test_deterministic(self):
        m, _ = planted_matrix(n_classes=3, docs_per_class=30, noise=0.3, seed=1)
        assert sib_cluster(m, 3, seed=4) == sib_cluster(m, 3, seed=4)

    def test_empty_rows_cluster_zero(self):
        m, _ = planted_matrix(n_classes=2, docs_per_class=20, noise=0.0, seed=0)
        m = sp.vstack([m, sp.csr_matrix((2, m.shape[1]))]).tocsr()
        cl = sib_cluster(m, 2, seed=0)
        assert cl.assignment[-2:].tolist() == [0, 0]

    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidDistribution):
            sib_cluster(sp.csr_matrix(np.ones((4, 3))), 2)

    def test_too_few(self):
        with pytest.raises(TooFewDocuments):
            sib_cluster(row_normalize(sp.csr_matrix(np.ones((2, 3)))), 3)

    @pytest.mark.parametrize("seed", range(5))
    def test_monotone_and_profiles_consistent(self, seed):
        m, _ = planted_matrix(n_classes=4, docs_per_class=30, noise=0.3, seed=seed)
        cl = sib_cluster(m, 6, seed=seed, check_profiles=True)
        assert all(b <= a for a, b in zip(cl.objective_trace, cl.objective_trace[1:]))
        assert cl.objective == pytest.approx(dense_loss(m.toarray(), cl.assignment, 6), abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_exchangeability(self, seed):
        m, _ = planted_matrix(n_classes=3, docs_per_class=20, noise=0.3, seed=seed)
        n = m.shape[0]
        rng = np.random.default_rng(100 + seed)
        init = rng.integers(0, 3, n)
        orders = [rng.permutation(n) for _ in range(15)]
        a = sib_cluster(m, 3, initial=init, visit_orders=orders)

        perm = rng.permutation(n)
        inv = np.argsort(perm)
        b = sib_cluster(m[perm], 3, initial=init[perm], visit_orders=[inv[o] for o in orders])
        assert nmi(a.assignment[perm], b.assignment) == 1.0

    def test_small_corpus_brute_force(self):
        hits = 0
        for inst in range(10):
            rng = np.random.default_rng(inst)
            n = int(rng.integers(4, 9))
            P = rng.dirichlet(np.full(4, 0.5), size=n)
            best = brute_force_min(P)
            finals = [sib_cluster(sp.csr_matrix(P), 2, tol=0.0, seed=s).objective for s in range(10)]
            assert min(finals) >= best - 1e-12
            hits += abs(min(finals) - best) < 1e-9
        assert hits == 10
