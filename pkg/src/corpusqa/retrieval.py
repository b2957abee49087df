"""Inverted-index document retrieval with BM25 scoring and ranking metrics."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import CorpusStore, tokenize

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

# K schedule used by the stock retriever reports.
DEFAULT_KS = (1, 3, 5, 7, 9, 13, 22, 30, 40, 60)

_INDEX_MAGIC = b"CQAIDX"
_INDEX_VERSION = 1


@dataclass
class InvertedIndex:
    """Term postings over a corpus.

    postings maps a term to (doc_id, term_frequency) pairs sorted by doc_id;
    doc_lengths maps doc_id to its token count.
    """

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    num_docs: int = field(init=False)
    avg_doc_len: float = field(init=False)

    def __post_init__(self) -> None:
        self.num_docs = len(self.doc_lengths)
        if self.num_docs == 0:
            raise ValueError("an index over zero documents is meaningless")
        self.avg_doc_len = sum(self.doc_lengths.values()) / self.num_docs

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    @property
    def doc_ids(self) -> list[str]:
        return list(self.doc_lengths)


def build_index(corpus: CorpusStore) -> InvertedIndex:
    """Index a corpus with the package tokenizer. Deterministic for fixed input."""
    if len(corpus) == 0:
        raise ValueError("cannot build an index over an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        counts: dict[str, int] = {}
        tokens = tokenize(doc.text)
        for tok in tokens:
            counts[tok.surface] = counts.get(tok.surface, 0) + 1
        doc_lengths[doc.doc_id] = len(tokens)
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
    # Corpus iteration is sorted by doc_id, so posting lists already are too.
    return InvertedIndex(postings={t: postings[t] for t in sorted(postings)}, doc_lengths=doc_lengths)


def _term_weight(tf: int, df: int, num_docs: int, doc_len: int, avg_doc_len: float,
                 k1: float, b: float) -> float:
    idf = math.log(1.0 + (num_docs - df + 0.5) / (df + 0.5))
    norm = k1 * (1.0 - b + b * doc_len / avg_doc_len)
    return idf * tf * (k1 + 1.0) / (tf + norm)


def score_bm25(index: InvertedIndex, query_terms: Sequence[str], doc_id: str,
               k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> float:
    """BM25 score of one document against a query term sequence.

    Terms absent from the index or from the document contribute zero. A
    repeated query term contributes once per occurrence.
    """
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc_id: {doc_id!r}")
    doc_len = index.doc_lengths[doc_id]
    score = 0.0
    for term in query_terms:
        plist = index.postings.get(term)
        if plist is None:
            continue
        tf = next((f for d, f in plist if d == doc_id), 0)
        if tf == 0:
            continue
        score += _term_weight(tf, len(plist), index.num_docs, doc_len,
                              index.avg_doc_len, k1, b)
    return score


@dataclass
class RankedList:
    """Retrieval result: (doc_id, score) entries in descending score order."""

    query: str
    entries: list[tuple[str, float]]

    def __post_init__(self) -> None:
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("RankedList scores must be non-increasing")
        ids = [d for d, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("RankedList doc_ids must be distinct")

    @classmethod
    def normalized(cls, query: str, entries: Iterable[tuple[str, float]],
                   k: int | None = None) -> "RankedList":
        """Build a valid RankedList from possibly unsorted or duplicated entries."""
        best: dict[str, float] = {}
        for doc_id, score in entries:
            if doc_id not in best or score > best[doc_id]:
                best[doc_id] = score
        ordered = sorted(best.items(), key=lambda e: (-e[1], e[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(query=query, entries=ordered)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return [d for d, _ in self.entries[:k]]


def retrieve(index: InvertedIndex, query: str, k: int,
             k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> RankedList:
    """Top-k documents by BM25, ties broken by ascending doc_id.

    Documents that share no term with the query score zero and are excluded,
    so the result may hold fewer than k entries.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    terms = [t.surface for t in tokenize(query)]
    scores: dict[str, float] = {}
    for term in terms:
        plist = index.postings.get(term)
        if plist is None:
            continue
        df = len(plist)
        for doc_id, tf in plist:
            w = _term_weight(tf, df, index.num_docs, index.doc_lengths[doc_id],
                             index.avg_doc_len, k1, b)
            scores[doc_id] = scores.get(doc_id, 0.0) + w
    ranked = sorted(scores.items(), key=lambda e: (-e[1], e[0]))[:k]
    return RankedList(query=query, entries=ranked)


def closest_fallback(index: InvertedIndex, query: str) -> str:
    """Lexically closest document for the always-answer fallback.

    Ranks by raw shared-token count (unweighted), ties by ascending doc_id;
    with no overlap anywhere, the first doc_id wins.
    """
    overlap: dict[str, int] = {}
    for term in set(t.surface for t in tokenize(query)):
        for doc_id, _ in index.postings.get(term, ()):
            overlap[doc_id] = overlap.get(doc_id, 0) + 1
    if overlap:
        return min(overlap.items(), key=lambda e: (-e[1], e[0]))[0]
    return min(index.doc_lengths)


# ---------------------------------------------------------------------------
# Ranking metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RetrieverEvalConfig:
    """K schedule for retriever evaluation; values must be strictly increasing."""

    ks: tuple[int, ...] = DEFAULT_KS

    def __post_init__(self) -> None:
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValueError("ks must be non-empty with every value >= 1")
        if any(a >= b for a, b in zip(self.ks, self.ks[1:])):
            raise ValueError("ks must be strictly increasing")


def precision_at_k(ranked: RankedList, relevant: set[str], k: int) -> float:
    """Strict precision: relevant hits in the top min(k, len) over denominator k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(ranked) == 0:
        return 0.0
    hits = sum(1 for doc_id in ranked.top(k) if doc_id in relevant)
    return hits / k


def hit_at_k(ranked: RankedList, gold: str, k: int) -> int:
    """1 iff the gold document appears within the first min(k, len) entries."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 1 if gold in ranked.top(k) else 0


# ---------------------------------------------------------------------------
# Persistence: single binary file, versioned, bit-exact round trip
# ---------------------------------------------------------------------------

def _write_str(out: list[bytes], s: str) -> None:
    data = s.encode("utf-8")
    out.append(struct.pack("<I", len(data)))
    out.append(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated index file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize the index to a single versioned binary file."""
    out: list[bytes] = [_INDEX_MAGIC, struct.pack("<H", _INDEX_VERSION)]
    doc_ids = sorted(index.doc_lengths)
    ordinal = {d: i for i, d in enumerate(doc_ids)}
    out.append(struct.pack("<I", len(doc_ids)))
    for doc_id in doc_ids:
        _write_str(out, doc_id)
        out.append(struct.pack("<I", index.doc_lengths[doc_id]))
    terms = sorted(index.postings)
    out.append(struct.pack("<I", len(terms)))
    for term in terms:
        _write_str(out, term)
        plist = index.postings[term]
        out.append(struct.pack("<I", len(plist)))
        for doc_id, tf in sorted(plist, key=lambda e: ordinal[e[0]]):
            out.append(struct.pack("<II", ordinal[doc_id], tf))
    Path(path).write_bytes(b"".join(out))


def load_index(path: str | Path) -> InvertedIndex:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(len(_INDEX_MAGIC)) != _INDEX_MAGIC:
        raise ValueError(f"not an index file: {path}")
    version = reader.u16()
    if version != _INDEX_VERSION:
        raise ValueError(f"unsupported index version {version}")
    num_docs = reader.u32()
    doc_ids: list[str] = []
    doc_lengths: dict[str, int] = {}
    for _ in range(num_docs):
        doc_id = reader.string()
        doc_ids.append(doc_id)
        doc_lengths[doc_id] = reader.u32()
    postings: dict[str, list[tuple[str, int]]] = {}
    for _ in range(reader.u32()):
        term = reader.string()
        plist = []
        for _ in range(reader.u32()):
            ordinal, tf = struct.unpack("<II", reader.take(8))
            plist.append((doc_ids[ordinal], tf))
        postings[term] = plist
    return InvertedIndex(postings=postings, doc_lengths=doc_lengths)


# ---------------------------------------------------------------------------
# Estimator facade
# ---------------------------------------------------------------------------

class BM25Retriever(BaseEstimator):
    """Lexical retriever with the usual fit/query surface.

    Parameters
    ----------
    k1, b : BM25 saturation and length-normalization constants.
    """

    def __init__(self, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        self.k1 = k1
        self.b = b

    def fit(self, corpus: CorpusStore, y=None) -> "BM25Retriever":
        """Build the inverted index over a corpus."""
        self.index_ = build_index(corpus)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "index_"):
            raise NotFittedError(
                "This BM25Retriever instance is not fitted yet; call fit or load first."
            )

    def retrieve(self, query: str, k: int = 5) -> RankedList:
        self._check_fitted()
        return retrieve(self.index_, query, k, k1=self.k1, b=self.b)

    def score_document(self, query: str, doc_id: str) -> float:
        self._check_fitted()
        terms = [t.surface for t in tokenize(query)]
        return score_bm25(self.index_, terms, doc_id, k1=self.k1, b=self.b)

    def save(self, path: str | Path) -> None:
        self._check_fitted()
        save_index(self.index_, path)

    @classmethod
    def load(cls, path: str | Path, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> "BM25Retriever":
        est = cls(k1=k1, b=b)
        est.index_ = load_index(path)
        return est
