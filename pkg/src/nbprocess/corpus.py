"""Bag-of-words count matrices, UCI file I/O and held-out token splits."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data."""


@dataclass(frozen=True)
class SparseCountMatrix:
    """Term-document counts stored as (doc, term, count) triplets.

    Triplets are kept sorted by (doc, term) with strictly positive counts and no
    duplicates; ``docs`` and ``terms`` are 0-based.
    """

    V: int
    J: int
    docs: np.ndarray
    terms: np.ndarray
    counts: np.ndarray
    vocab: list[str] | None = field(default=None, compare=False)

    def __post_init__(self):
        docs = np.asarray(self.docs, dtype=np.int64)
        terms = np.asarray(self.terms, dtype=np.int64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if not (docs.shape == terms.shape == counts.shape) or docs.ndim != 1:
            raise CorpusError("docs, terms and counts must be 1-d arrays of equal length")
        if docs.size:
            if docs.min() < 0 or docs.max() >= self.J:
                raise CorpusError("document index out of range")
            if terms.min() < 0 or terms.max() >= self.V:
                raise CorpusError("term index out of range")
            if counts.min() <= 0:
                raise CorpusError("counts must be strictly positive")
        order = np.lexsort((terms, docs))
        docs, terms, counts = docs[order], terms[order], counts[order]
        if docs.size > 1:
            dup = (docs[1:] == docs[:-1]) & (terms[1:] == terms[:-1])
            if np.any(dup):
                i = int(np.flatnonzero(dup)[0]) + 1
                raise CorpusError(f"duplicate entry (doc={docs[i]}, term={terms[i]})")
        if self.vocab is not None and len(self.vocab) != self.V:
            raise CorpusError(f"vocabulary has {len(self.vocab)} terms, expected V={self.V}")
        for name, arr in (("docs", docs), ("terms", terms), ("counts", counts)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nnz(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def doc_lengths(self) -> np.ndarray:
        return np.bincount(self.docs, weights=self.counts, minlength=self.J).astype(np.int64)

    def to_dense(self) -> np.ndarray:
        """J x V dense count array."""
        out = np.zeros((self.J, self.V), dtype=np.int64)
        out[self.docs, self.terms] = self.counts
        return out

    @classmethod
    def from_dense(cls, dense, vocab=None) -> "SparseCountMatrix":
        dense = np.asarray(dense)
        j, v = np.nonzero(dense)
        return cls(V=dense.shape[1], J=dense.shape[0], docs=j, terms=v,
                   counts=dense[j, v], vocab=vocab)

    @classmethod
    def from_tokens(cls, docs, terms, V: int, J: int, vocab=None) -> "SparseCountMatrix":
        """Aggregate one (doc, term) pair per token into counts."""
        key = np.asarray(docs, dtype=np.int64) * V + np.asarray(terms, dtype=np.int64)
        uniq, cnt = np.unique(key, return_counts=True)
        return cls(V=V, J=J, docs=uniq // V, terms=uniq % V, counts=cnt, vocab=vocab)

    def tokens(self) -> tuple[np.ndarray, np.ndarray]:
        """Expand to per-token (doc, term) arrays in stored (doc, term) order."""
        return np.repeat(self.docs, self.counts), np.repeat(self.terms, self.counts)

    def __add__(self, other: "SparseCountMatrix") -> "SparseCountMatrix":
        if (self.V, self.J) != (other.V, other.J):
            raise CorpusError("shape mismatch")
        return SparseCountMatrix.from_dense(self.to_dense() + other.to_dense(), vocab=self.vocab)

    def __eq__(self, other):
        if not isinstance(other, SparseCountMatrix):
            return NotImplemented
        return ((self.V, self.J) == (other.V, other.J)
                and np.array_equal(self.docs, other.docs)
                and np.array_equal(self.terms, other.terms)
                and np.array_equal(self.counts, other.counts))

    __hash__ = None


# ---------------------------------------------------------------------------
# UCI bag-of-words format


def load_uci(docword_path, vocab_path=None) -> SparseCountMatrix:
    """Read a UCI ``docword`` file (D, W, NNZ header; 1-based triplets)."""
    docword_path = Path(docword_path)
    header: list[int] = []
    docs, terms, counts = [], [], []
    with open(docword_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            try:
                values = [int(x) for x in parts]
            except ValueError:
                raise CorpusError(f"{docword_path}:{lineno}: non-integer field in {line!r}") from None
            if len(header) < 3:
                if len(values) != 1:
                    raise CorpusError(f"{docword_path}:{lineno}: expected a single header value")
                header.append(values[0])
                continue
            if len(values) != 3:
                raise CorpusError(f"{docword_path}:{lineno}: expected 'docID termID count'")
            d, w, c = values
            if c <= 0:
                raise CorpusError(f"{docword_path}:{lineno}: count must be positive, got {c}")
            if not (1 <= d <= header[0]) or not (1 <= w <= header[1]):
                raise CorpusError(f"{docword_path}:{lineno}: id out of range ({d}, {w})")
            docs.append(d - 1)
            terms.append(w - 1)
            counts.append(c)
    if len(header) < 3:
        raise CorpusError(f"{docword_path}: truncated header")
    D, W, nnz = header
    if nnz != len(counts):
        raise CorpusError(f"{docword_path}: header declares NNZ={nnz} but found {len(counts)} entries")
    vocab = None
    if vocab_path is not None:
        with open(vocab_path, encoding="utf-8") as fh:
            vocab = [ln.rstrip("\n") for ln in fh if ln.rstrip("\n")]
        if len(vocab) != W:
            raise CorpusError(f"{vocab_path}: {len(vocab)} terms but header declares W={W}")
    try:
        return SparseCountMatrix(V=W, J=D, docs=np.array(docs, dtype=np.int64),
                                 terms=np.array(terms, dtype=np.int64),
                                 counts=np.array(counts, dtype=np.int64), vocab=vocab)
    except CorpusError as exc:
        raise CorpusError(f"{docword_path}: {exc}") from None


def write_uci(m: SparseCountMatrix, docword_path, vocab_path=None) -> None:
    lines = [str(m.J), str(m.V), str(m.nnz)]
    lines += [f"{d + 1} {w + 1} {c}" for d, w, c in zip(m.docs.tolist(), m.terms.tolist(), m.counts.tolist())]
    Path(docword_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if vocab_path is not None:
        vocab = m.vocab if m.vocab is not None else [f"w{v}" for v in range(m.V)]
        Path(vocab_path).write_text("\n".join(vocab) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Vocabulary / document filters


def filter_min_df(m: SparseCountMatrix, min_df: int) -> SparseCountMatrix:
    """Keep terms appearing in at least ``min_df`` documents; term ids are compacted."""
    df = np.bincount(m.terms, minlength=m.V)
    keep = np.flatnonzero(df >= min_df)
    remap = np.full(m.V, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    mask = remap[m.terms] >= 0
    vocab = [m.vocab[v] for v in keep] if m.vocab is not None else None
    return SparseCountMatrix(V=int(keep.size), J=m.J, docs=m.docs[mask],
                             terms=remap[m.terms[mask]], counts=m.counts[mask], vocab=vocab)


def drop_empty_documents(m: SparseCountMatrix) -> SparseCountMatrix:
    lengths = m.doc_lengths()
    keep = np.flatnonzero(lengths > 0)
    remap = np.full(m.J, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    return SparseCountMatrix(V=m.V, J=int(keep.size), docs=remap[m.docs], terms=m.terms,
                             counts=m.counts, vocab=m.vocab)


# ---------------------------------------------------------------------------
# Held-out split


@dataclass(frozen=True)
class HoldoutSplit:
    train: SparseCountMatrix
    heldout: SparseCountMatrix
    fraction: float
    seed: int | None = None


def split_holdout(m: SparseCountMatrix, fraction: float, rng: np.random.Generator,
                  seed: int | None = None) -> HoldoutSplit:
    """Keep a random ``fraction`` of each document's tokens for training.

    Tokens (not term types) are drawn without replacement. The per-document
    training size is floor(fraction * N_j) plus a Bernoulli draw on the
    fractional remainder.
    """
    if not 0.0 < fraction < 1.0:
        raise CorpusError(f"fraction must lie in (0, 1), got {fraction}")
    lengths = m.doc_lengths()
    if np.any(lengths < 1):
        raise CorpusError("every document needs at least one token")
    tok_doc, tok_term = m.tokens()
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    keep = np.zeros(tok_doc.size, dtype=bool)
    for j in range(m.J):
        n = int(lengths[j])
        target = fraction * n
        n_train = int(np.floor(target))
        if rng.random() < target - n_train:
            n_train += 1
        chosen = rng.permutation(n)[:n_train]
        keep[starts[j] + chosen] = True
    train = SparseCountMatrix.from_tokens(tok_doc[keep], tok_term[keep], m.V, m.J, vocab=m.vocab)
    held = SparseCountMatrix.from_tokens(tok_doc[~keep], tok_term[~keep], m.V, m.J, vocab=m.vocab)
    return HoldoutSplit(train=train, heldout=held, fraction=fraction, seed=seed)
