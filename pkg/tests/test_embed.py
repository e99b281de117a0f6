import json

import numpy as np
import pytest

from idofew.corpus import Corpus, Document, preprocess_corpus
from idofew.embed import FileProvider, ProjectionProvider, file_provider, truncate, write_embeddings
from idofew.errors import DimensionMismatch, MissingEmbedding
from idofew.synth import PlantedSpec, generate
from idofew.tfidf import build_vocabulary, vectorize


def test_truncate():
    toks = [f"t{i}" for i in range(300)]
    assert truncate(toks) == toks[:256]
    assert truncate(toks[:10]) == toks[:10]
    assert truncate([]) == []


class TestFileProvider:
    def test_lookup(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text(json.dumps({"id": "d1", "vector": [0.1, 0.2]}) + "\n")
        prov = file_provider(p, dim=2)
        np.testing.assert_array_equal(prov.embed(Document("d1", "whatever")), [0.1, 0.2])

    def test_missing(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text(json.dumps({"id": "d1", "vector": [0.1, 0.2]}) + "\n")
        with pytest.raises(MissingEmbedding):
            file_provider(p, 2).embed(Document("d2", "x"))

    def test_wrong_length(self, tmp_path):
        p = tmp_path / "e.jsonl"
        p.write_text(json.dumps({"id": "d1", "vector": [0.1, 0.2, 0.3]}) + "\n")
        with pytest.raises(DimensionMismatch):
            file_provider(p, 2)

    def test_roundtrip_and_missing_report(self, tmp_path):
        vecs = np.random.default_rng(0).normal(size=(3, 4))
        write_embeddings(["a", "b", "c"], vecs, tmp_path / "e.jsonl")
        prov = FileProvider.load(tmp_path / "e.jsonl", 4)
        np.testing.assert_array_equal(prov.embed("b"), vecs[1])
        corpus = Corpus((Document("a", "x"), Document("z", "y")))
        assert prov.missing(corpus) == ["z"]


@pytest.fixture(scope="module")
def planted():
    corpus = generate(PlantedSpec(n_classes=4, docs_per_class=60, noise=0.3, seed=11))
    toks = preprocess_corpus(corpus)
    return corpus, toks, build_vocabulary(toks)


class TestProjection:
    def test_deterministic_and_unit(self, planted):
        corpus, _, vocab = planted
        a = ProjectionProvider(vocab, seed=3)
        b = ProjectionProvider(vocab, seed=3)
        doc = corpus.documents[0]
        va, vb = a.embed(doc), b.embed(doc)
        assert va.tobytes() == vb.tobytes()
        assert va.shape == (384,)
        assert np.linalg.norm(va) == pytest.approx(1.0)

    def test_single_and_batch_agree(self, planted):
        corpus, _, vocab = planted
        prov = ProjectionProvider(vocab, seed=0)
        batch = prov.embed_corpus(corpus.documents[:5])
        for i, d in enumerate(corpus.documents[:5]):
            assert prov.embed(d).tobytes() == batch[i].tobytes()

    def test_empty_document_zero(self, planted):
        _, _, vocab = planted
        v = ProjectionProvider(vocab, seed=0).embed(Document("e", "the and !!!"))
        assert not v.any()

    def test_disjoint_documents_near_orthogonal(self):
        vocab = build_vocabulary([[f"a{i}" for i in range(20)], [f"b{i}" for i in range(20)], ["c"]])
        d1 = Document("1", " ".join(f"a{i}" for i in range(20)))
        d2 = Document("2", " ".join(f"b{i}" for i in range(20)))
        small = 0
        for seed in range(100):
            prov = ProjectionProvider(vocab, 384, seed)
            small += abs(prov.embed(d1) @ prov.embed(d2)) < 0.2
        assert small >= 99

    def test_cosine_geometry_preserved(self, planted):
        corpus, toks, vocab = planted
        T = vectorize(toks, vocab).toarray()
        T /= np.linalg.norm(T, axis=1, keepdims=True)
        rng = np.random.default_rng(0)
        pairs = rng.integers(0, len(corpus), size=(200, 2))
        close = total = 0
        for seed in range(10):
            E = ProjectionProvider(vocab, 384, seed).embed_corpus(corpus)
            for i, j in pairs:
                close += abs(E[i] @ E[j] - T[i] @ T[j]) < 0.15
                total += 1
        assert close / total >= 0.95
