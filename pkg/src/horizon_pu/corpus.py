"""Survey documents, vocabulary fitting and Bag-of-Words vectors."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_MONTH_RE = re.compile(r"^(\d{4})-(0[1-9]|1[0-2])$")


class CorpusError(ValueError):
    """Malformed or inconsistent corpus input."""


class Kind(str, Enum):
    CURRENT = "current"
    FUTURE = "future"


@dataclass(frozen=True)
class Document:
    id: str
    period: int
    kind: Kind
    rank: int
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.rank not in (0, 1, 2, 3, 4):
            raise CorpusError(f"document {self.id!r}: rank {self.rank!r} outside 0..4")
        if len(self.tokens) == 0:
            raise CorpusError(f"document {self.id!r}: empty token list")

    @property
    def positive(self) -> bool:
        """Current-condition answers are the labeled positives; future answers are unlabeled."""
        return self.kind is Kind.CURRENT


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    period_labels: tuple[str, ...]
    period_index: dict[int, tuple[str, ...]] = field(repr=False)

    @property
    def T(self) -> int:
        return len(self.period_labels)

    def __len__(self):
        return len(self.documents)

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise CorpusError("duplicate document ids")
        for t in range(1, self.T + 1):
            if not self.period_index.get(t):
                raise CorpusError(f"period {t} has no documents")
        object.__setattr__(self, "_pos", {d.id: i for i, d in enumerate(self.documents)})

    @classmethod
    def from_documents(cls, docs: Iterable[Document], period_labels: Sequence[str]) -> "Corpus":
        docs = sorted(docs, key=lambda d: (d.period, d.id))
        if not docs:
            raise CorpusError("no documents")
        T = len(period_labels)
        index: dict[int, list[str]] = {t: [] for t in range(1, T + 1)}
        for d in docs:
            if not 1 <= d.period <= T:
                raise CorpusError(f"document {d.id!r}: period {d.period} outside 1..{T}")
            index[d.period].append(d.id)
        return cls(tuple(docs), tuple(period_labels), {t: tuple(v) for t, v in index.items()})

    def row(self, doc_id: str) -> int:
        return self._pos[doc_id]

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        return np.fromiter((self._pos[i] for i in ids), dtype=np.int64)

    def get(self, doc_id: str) -> Document:
        return self.documents[self._pos[doc_id]]

    def period_label(self, t: int) -> str:
        return self.period_labels[t - 1]

    def ranks(self) -> dict[str, int]:
        return {d.id: d.rank for d in self.documents}


def _parse_line(obj, lineno):
    try:
        doc_id = obj["id"]
        month = obj["period"]
        kind = Kind(obj["kind"])
        rank = obj["rank"]
        tokens = obj["tokens"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"line {lineno}: invalid document ({exc})") from None
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {lineno}: id must be a non-empty string")
    if not isinstance(month, str) or not _MONTH_RE.match(month):
        raise CorpusError(f"line {lineno}: period must be 'YYYY-MM', got {month!r}")
    if isinstance(rank, bool) or not isinstance(rank, int) or not 0 <= rank <= 4:
        raise CorpusError(f"line {lineno}: rank must be an integer in 0..4, got {rank!r}")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusError(f"line {lineno}: tokens must be a list of strings")
    if not tokens:
        raise CorpusError(f"line {lineno}: empty token list")
    return doc_id, month, kind, rank, tuple(tokens)


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Read a JSONL corpus; periods are numbered 1..T by sorted calendar month."""
    if format != "jsonl":
        raise CorpusError(f"unsupported corpus format {format!r}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: {exc.msg}") from None
            rows.append(_parse_line(obj, lineno))
    if not rows:
        raise CorpusError("no documents")
    months = sorted({r[1] for r in rows})
    period_of = {m: i + 1 for i, m in enumerate(months)}
    docs = [Document(i, period_of[m], k, r, toks) for i, m, k, r, toks in rows]
    return Corpus.from_documents(docs, months)


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.documents:
            obj = {
                "id": d.id,
                "period": corpus.period_label(d.period),
                "kind": d.kind.value,
                "rank": d.rank,
                "tokens": list(d.tokens),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# vocabulary and vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    index: dict[str, int]
    min_count: int = 1

    @property
    def dim(self) -> int:
        return len(self.index)

    def __contains__(self, token):
        return token in self.index

    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)


def build_vocabulary(corpus: Corpus | Iterable[Document], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    docs = corpus.documents if isinstance(corpus, Corpus) else list(corpus)
    if not docs:
        raise CorpusError("no documents")
    counts = Counter()
    for d in docs:
        counts.update(d.tokens)
    kept = sorted(tok for tok, c in counts.items() if c >= min_count)
    if not kept:
        raise CorpusError("empty vocabulary")
    return Vocabulary({tok: i for i, tok in enumerate(kept)}, min_count)


@dataclass(frozen=True)
class SparseVec:
    dim: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = self.indices
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dim or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be strictly increasing and < dim")

    def to_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def __add__(self, other: "SparseVec") -> "SparseVec":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        acc = Counter(self.to_dict())
        acc.update(other.to_dict())
        return sparse_from_dict(acc, self.dim)


def sparse_from_dict(mapping, dim: int) -> SparseVec:
    items = sorted((int(i), float(v)) for i, v in mapping.items() if v != 0)
    idx = np.array([i for i, _ in items], dtype=np.int64)
    val = np.array([v for _, v in items], dtype=np.float64)
    return SparseVec(dim, idx, val)


def vectorize(doc: Document | Sequence[str], vocab: Vocabulary) -> SparseVec:
    """Count vector of in-vocabulary tokens; unknown tokens are dropped."""
    tokens = doc.tokens if isinstance(doc, Document) else doc
    counts = Counter(vocab.index[t] for t in tokens if t in vocab.index)
    return sparse_from_dict(counts, vocab.dim)


@dataclass(frozen=True)
class CsrBatch:
    """Row-stacked sparse count vectors (CSR layout)."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    dim: int

    @property
    def n_rows(self) -> int:
        return self.indptr.shape[0] - 1

    def __len__(self):
        return self.n_rows

    @classmethod
    def from_vectors(cls, vecs: Sequence[SparseVec], dim: int | None = None) -> "CsrBatch":
        if dim is None:
            if not vecs:
                raise ValueError("dim required for an empty batch")
            dim = vecs[0].dim
        lengths = [len(v.indices) for v in vecs]
        indptr = np.zeros(len(vecs) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        if vecs:
            indices = np.concatenate([v.indices for v in vecs]).astype(np.int64)
            data = np.concatenate([v.values for v in vecs]).astype(np.float64)
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        return cls(indptr, indices, data, dim)

    @classmethod
    def from_dense(cls, X) -> "CsrBatch":
        X = np.asarray(X, dtype=np.float64)
        rows, cols = np.nonzero(X)
        indptr = np.zeros(X.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=X.shape[0]), out=indptr[1:])
        return cls(indptr, cols.astype(np.int64), X[rows, cols], X.shape[1])

    def take(self, rows) -> "CsrBatch":
        rows = np.asarray(rows, dtype=np.int64)
        starts = self.indptr[rows]
        lengths = self.indptr[rows + 1] - starts
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        # flat gather positions: start of each row plus offset within it
        offsets = np.arange(indptr[-1]) - np.repeat(indptr[:-1], lengths)
        pos = np.repeat(starts, lengths) + offsets
        return CsrBatch(indptr, self.indices[pos], self.data[pos], self.dim)

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        out = np.zeros((self.n_rows, self.dim), dtype=dtype)
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out

    def row(self, i: int) -> SparseVec:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVec(self.dim, self.indices[lo:hi].copy(), self.data[lo:hi].copy())


def vectorize_corpus(corpus: Corpus, vocab: Vocabulary) -> CsrBatch:
    """All documents, in corpus order, as one CSR batch."""
    return CsrBatch.from_vectors([vectorize(d, vocab) for d in corpus.documents], vocab.dim)


def period_slice(corpus: Corpus, t: int) -> tuple[list[str], list[str]]:
    """(positive ids, unlabeled ids) for period ``t``."""
    if not 1 <= t <= corpus.T:
        raise CorpusError(f"period {t} outside 1..{corpus.T}")
    pos, unl = [], []
    for doc_id in corpus.period_index[t]:
        (pos if corpus.get(doc_id).positive else unl).append(doc_id)
    label = corpus.period_label(t)
    if not pos:
        raise CorpusError(f"period {t} ({label}) has no positive (current) documents")
    if not unl:
        raise CorpusError(f"period {t} ({label}) has no unlabeled (future) documents")
    return pos, unl
