import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idofew.errors import EmptyCorpus
from idofew.tfidf import (
    Vocabulary,
    build_vocabulary,
    dump_matrix,
    idf,
    log_tf,
    matrix_rows,
    row_normalize,
    vectorize,
)
import scipy.sparse as sp


def dense_tfidf(docs, terms):
    """Brute-force Eqs. 1-3 over an explicit term list, one cell at a time."""
    n = len(docs)
    out = np.zeros((n, len(terms)))
    for j, term in enumerate(terms):
        df = sum(1 for d in docs if term in d)
        for i, d in enumerate(docs):
            tf = d.count(term)
            if tf:
                out[i, j] = (1 + math.log(1 + tf)) * math.log(n / df)
    return out


class TestVocabulary:
    def test_tie_break_lexicographic(self):
        v = build_vocabulary([["a", "b"], ["b", "c"]], max_terms=2)
        assert v.terms == ("b", "a")

    def test_no_truncation(self):
        v = build_vocabulary([["a", "b"], ["b", "c"]], max_terms=10)
        assert set(v.terms) == {"a", "b", "c"}

    def test_single_doc(self):
        v = build_vocabulary([["a", "a", "a"]])
        assert v.terms == ("a",) and v.df == (1,) and v.n_docs == 1

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            build_vocabulary([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("abcdefgh"), max_size=8), min_size=1, max_size=6), st.integers(1, 10))
    def test_invariants(self, docs, max_terms):
        v = build_vocabulary(docs, max_terms)
        assert len(v) <= max_terms
        assert all(1 <= df <= v.n_docs for df in v.df)


class TestFormulas:
    @pytest.mark.parametrize("tf, expected", [(1, 1.6931471805599454), (9, 3.302585092994046), (0, 1.0)])
    def test_log_tf(self, tf, expected):
        assert log_tf(tf) == pytest.approx(expected, abs=1e-9)

    def test_log_tf_monotone(self):
        vals = [log_tf(t) for t in range(1, 50)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("n, df, expected", [(100, 10, 2.302585092994046), (7, 7, 0.0), (2, 1, 0.6931471805599453)])
    def test_idf(self, n, df, expected):
        v = Vocabulary(("t",), (df,), n)
        assert idf(v, 0) == pytest.approx(expected, abs=1e-9)

    def test_vectorize_two_doc_example(self):
        docs = [["a", "b"], ["a", "c"]]
        v = build_vocabulary(docs)
        m = vectorize(docs, v)
        b = v.index["b"]
        # (1 + ln 2) * ln 2, evaluated by hand
        assert m[0, b] == pytest.approx(1.1736001944781467, abs=1e-9)
        # "a" occurs everywhere: idf 0, never stored
        assert m[0, v.index["a"]] == 0.0 and v.index["a"] not in m[0].indices

    def test_oov_ignored_and_empty_row(self):
        v = build_vocabulary([["a"], ["b"]])
        m = vectorize([["zzz"], []], v)
        assert m.nnz == 0 and m.shape == (2, 2)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("abcdefghij"), max_size=12), min_size=1, max_size=5))
    def test_dense_oracle(self, docs):
        v = build_vocabulary(docs)
        got = vectorize(docs, v).toarray()
        want = dense_tfidf(docs, list(v.terms))
        np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.lists(st.sampled_from("abcdef"), max_size=8), min_size=1, max_size=5))
    def test_zero_iff_absent_or_ubiquitous(self, docs):
        v = build_vocabulary(docs)
        m = vectorize(docs, v).toarray()
        for i, d in enumerate(docs):
            for j, t in enumerate(v.terms):
                assert (m[i, j] == 0) == (t not in d or v.df[j] == v.n_docs)


class TestRowNormalize:
    def test_examples(self):
        m = sp.csr_matrix(np.array([[2.0, 0, 0, 2.0], [0, 0, 0, 0], [0, 1.173787, 0, 0]]))
        rows = matrix_rows(row_normalize(m))
        assert rows[0] == [(0, 0.5), (3, 0.5)]
        assert rows[1] == []
        assert rows[2] == [(1, 1.0)]

    def test_input_untouched(self):
        m = sp.csr_matrix(np.array([[2.0, 2.0]]))
        row_normalize(m)
        assert m.toarray().tolist() == [[2.0, 2.0]]


def test_dump_matrix(tmp_path):
    docs = [["a", "b"], ["a", "c"], []]
    m = vectorize(docs, build_vocabulary(docs))
    dump_matrix(m, tmp_path / "m.jsonl")
    lines = [json.loads(x) for x in (tmp_path / "m.jsonl").read_text().splitlines()]
    assert [r["row"] for r in lines] == [0, 1, 2]
    assert lines[2]["entries"] == []
    cols = [c for c, _ in lines[0]["entries"]]
    assert cols == sorted(cols)
