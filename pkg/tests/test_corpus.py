import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from nbprocess.corpus import (CorpusError, SparseCountMatrix, drop_empty_documents, filter_min_df,
                              load_uci, split_holdout, write_uci)
from nbprocess.rng import rng_stream


def random_matrix(rng, J=50, V=30, density=0.3, max_count=6):
    dense = rng.integers(1, max_count, size=(J, V)) * (rng.random((J, V)) < density)
    dense[:, 0] += 1  # every document nonempty
    return SparseCountMatrix.from_dense(dense)


@st.composite
def count_matrices(draw):
    J = draw(st.integers(1, 8))
    V = draw(st.integers(1, 8))
    cells = draw(st.lists(st.integers(0, 5), min_size=J * V, max_size=J * V))
    dense = np.array(cells).reshape(J, V)
    return SparseCountMatrix.from_dense(dense)


class TestSparseCountMatrix:
    def test_sorted_and_read_only(self):
        m = SparseCountMatrix(V=3, J=2, docs=[1, 0, 0], terms=[0, 2, 1], counts=[1, 2, 3])
        assert_array_equal(m.docs, [0, 0, 1])
        assert_array_equal(m.terms, [1, 2, 0])
        with pytest.raises(ValueError):
            m.counts[0] = 7

    @pytest.mark.parametrize("kw", [
        dict(docs=[0, 0], terms=[1, 1], counts=[1, 2]),
        dict(docs=[0], terms=[1], counts=[0]),
        dict(docs=[2], terms=[1], counts=[1]),
        dict(docs=[0], terms=[3], counts=[1]),
    ])
    def test_invalid(self, kw):
        with pytest.raises(CorpusError):
            SparseCountMatrix(V=3, J=2, **kw)

    def test_tokens_roundtrip(self):
        m = random_matrix(rng_stream(1))
        d, w = m.tokens()
        assert d.size == m.total
        assert SparseCountMatrix.from_tokens(d, w, m.V, m.J) == m

    @settings(max_examples=50, deadline=None)
    @given(count_matrices())
    def test_dense_roundtrip(self, m):
        assert SparseCountMatrix.from_dense(m.to_dense()) == m
        assert_array_equal(m.doc_lengths(), m.to_dense().sum(axis=1))


class TestUci:
    def test_example(self, tmp_path):
        p = tmp_path / "docword.txt"
        p.write_text("2\n3\n2\n1 1 4\n2 3 1\n")
        m = load_uci(p)
        assert (m.J, m.V, m.nnz) == (2, 3, 2)
        assert_array_equal(m.doc_lengths(), [4, 1])

    @pytest.mark.parametrize("body, fragment", [
        ("2\n3\n2\n1 1 4\n1 1 2\n", "duplicate"),
        ("2\n3\n1\n1 1 0\n", ":4:"),
        ("2\n3\n1\n1 4 1\n", ":4:"),
        ("2\n3\n1\n1 x 1\n", ":4:"),
        ("2\n3\n3\n1 1 1\n", "NNZ"),
        ("2\n3\n", "truncated"),
        ("2\n3\n1\n1 1\n", ":4:"),
    ])
    def test_errors(self, tmp_path, body, fragment):
        p = tmp_path / "docword.txt"
        p.write_text(body)
        with pytest.raises(CorpusError, match=fragment):
            load_uci(p)

    def test_vocab_size_mismatch(self, tmp_path):
        (tmp_path / "d.txt").write_text("1\n3\n1\n1 1 1\n")
        (tmp_path / "v.txt").write_text("a\nb\n")
        with pytest.raises(CorpusError):
            load_uci(tmp_path / "d.txt", tmp_path / "v.txt")

    def test_roundtrip(self, tmp_path):
        m = random_matrix(rng_stream(2))
        m = SparseCountMatrix(m.V, m.J, m.docs, m.terms, m.counts, vocab=[f"t{i}é" for i in range(m.V)])
        write_uci(m, tmp_path / "d.txt", tmp_path / "v.txt")
        back = load_uci(tmp_path / "d.txt", tmp_path / "v.txt")
        assert back == m
        assert back.vocab == m.vocab


class TestFilters:
    def test_min_df(self):
        dense = np.array([[1, 0, 2], [1, 0, 0], [3, 1, 0]])
        m = filter_min_df(SparseCountMatrix.from_dense(dense, vocab=["a", "b", "c"]), 2)
        assert m.V == 1 and m.vocab == ["a"]
        assert_array_equal(m.to_dense()[:, 0], [1, 1, 3])

    def test_drop_empty(self):
        dense = np.array([[1, 0], [0, 0], [0, 2]])
        m = drop_empty_documents(SparseCountMatrix.from_dense(dense))
        assert_array_equal(m.to_dense(), [[1, 0], [0, 2]])


class TestSplit:
    def test_conservation(self):
        m = random_matrix(rng_stream(3))
        sp = split_holdout(m, 0.6, rng_stream(4))
        assert sp.train + sp.heldout == m
        frac = sp.train.doc_lengths()
        target = 0.6 * m.doc_lengths()
        assert np.all(np.abs(frac - target) <= 1)

    def test_deterministic(self):
        m = random_matrix(rng_stream(5))
        a = split_holdout(m, 0.4, rng_stream(6))
        b = split_holdout(m, 0.4, rng_stream(6))
        assert a.train == b.train and a.heldout == b.heldout

    def test_all_tokens_kept(self):
        m = SparseCountMatrix.from_dense(np.array([[1, 1]]))
        sp = split_holdout(m, 0.99, rng_stream(7))
        # 0.99 * 2 = 1.98 keeps both tokens 98% of the time; the held-out row may be empty
        assert sp.train.total + sp.heldout.total == 2

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.5, 1.2])
    def test_bad_fraction(self, f):
        with pytest.raises(CorpusError):
            split_holdout(random_matrix(rng_stream(0)), f, rng_stream(0))

    def test_empty_document_rejected(self):
        m = SparseCountMatrix.from_dense(np.array([[1, 0], [0, 0]]))
        with pytest.raises(CorpusError):
            split_holdout(m, 0.5, rng_stream(0))

    def test_token_level_uniformity(self):
        # tokens (a, a, a, b); all C(4, 2) training subsets are equally likely
        subsets = list(itertools.combinations([0, 0, 0, 1], 2))
        law = {}
        for s in subsets:
            key = s.count(0)
            law[key] = law.get(key, 0) + Fraction(1, len(subsets))
        assert law == {2: Fraction(1, 2), 1: Fraction(1, 2)}

        m = SparseCountMatrix.from_dense(np.array([[3, 1]]))
        rng = rng_stream(8)
        n = 20_000
        kept_a = np.empty(n, dtype=int)
        for i in range(n):
            tr = split_holdout(m, 0.5, rng).train
            assert tr.total == 2
            kept_a[i] = tr.to_dense()[0, 0]
        freq = np.bincount(kept_a, minlength=3) / n
        se = np.sqrt(0.25 / n)
        assert freq[0] == 0
        assert abs(freq[2] - 0.5) < 4 * se
        # each of the four tokens survives with probability 1/2
        assert abs(kept_a.mean() / 3 - 0.5) < 4 * se
