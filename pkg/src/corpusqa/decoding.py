"""Turning per-token probabilities into spans and a final answer.

Three levels, each a pure function: pair up starts and ends inside one window,
merge window spans across a document, then pick the winning document.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .corpus import Document, Window
from .labels import YNN_LABELS

DEFAULT_THRESHOLD = 0.5
DEFAULT_MAX_SPAN_LEN = 30
DEFAULT_JOIN_SEPARATOR = " "


class WindowSpan(NamedTuple):
    """Window-local token span, both ends inclusive."""

    start: int
    end: int
    score: float


@dataclass(frozen=True)
class SpanCandidate:
    """A span in document coordinates, carrying its surface text."""

    doc_id: str
    start_tok: int        # inclusive, document token index
    end_tok: int          # inclusive
    char_start: int
    char_end: int         # exclusive
    score: float
    text: str


@dataclass(frozen=True)
class WindowDecoding:
    """One window's decoded spans plus its yes/no/none distribution."""

    window: Window
    spans: tuple[WindowSpan, ...]
    yn_probs: np.ndarray


@dataclass(frozen=True)
class DocumentAnswer:
    doc_id: str
    spans: tuple[SpanCandidate, ...]   # document order, non-overlapping
    ynn: str
    confidence: float


@dataclass(frozen=True)
class FinalAnswer:
    text: str
    spans: tuple[SpanCandidate, ...]
    ynn: str
    source_doc: str
    confidence: float

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "ynn": self.ynn,
            "source_doc": self.source_doc,
            "confidence": self.confidence,
            "spans": [
                {
                    "doc_id": s.doc_id,
                    "start_tok": s.start_tok,
                    "end_tok": s.end_tok,
                    "char_start": s.char_start,
                    "char_end": s.char_end,
                    "score": s.score,
                    "text": s.text,
                }
                for s in self.spans
            ],
        }


def _argmax_span(ps: np.ndarray, pe: np.ndarray, max_span_len: int) -> WindowSpan:
    """Best valid (i, j) by ps[i]+pe[j]; ties take the smallest i, then j."""
    n = ps.shape[0]
    best = None
    best_sum = -np.inf
    for i in range(n):
        hi = min(n, i + max_span_len)
        for j in range(i, hi):
            s = ps[i] + pe[j]
            if s > best_sum:
                best_sum = s
                best = (i, j)
    assert best is not None
    return WindowSpan(best[0], best[1], (ps[best[0]] + pe[best[1]]) / 2.0)


def decode_window(
    ps,
    pe,
    tau: float = DEFAULT_THRESHOLD,
    max_span_len: int = DEFAULT_MAX_SPAN_LEN,
) -> list[WindowSpan]:
    """Greedy left-to-right start/end pairing above the threshold.

    Each start claims the nearest unused end at or after it within
    max_span_len; starts that find no end are dropped. If nothing clears the
    threshold the single argmax span is returned, so there is always at least
    one span.
    """
    ps = np.asarray(ps, dtype=float)
    pe = np.asarray(pe, dtype=float)
    if ps.shape != pe.shape or ps.ndim != 1:
        raise ValueError(
            f"start/end probability shapes differ: {ps.shape} vs {pe.shape}"
        )
    if ps.shape[0] == 0:
        raise ValueError("cannot decode an empty window")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {tau}")
    if max_span_len < 1:
        raise ValueError("max_span_len must be >= 1")

    starts = [i for i in range(ps.shape[0]) if ps[i] > tau]
    ends = [j for j in range(pe.shape[0]) if pe[j] > tau]
    spans: list[WindowSpan] = []
    used = [False] * len(ends)
    for i in starts:
        for idx, j in enumerate(ends):
            if used[idx] or j < i:
                continue
            if j - i >= max_span_len:
                break  # ends are ascending; farther ones only get worse
            used[idx] = True
            spans.append(WindowSpan(i, j, (ps[i] + pe[j]) / 2.0))
            break
    if not spans:
        return [_argmax_span(ps, pe, max_span_len)]
    return spans


def _materialize(doc: Document, window: Window, span: WindowSpan) -> SpanCandidate:
    first = window.tokens[span.start]
    last = window.tokens[span.end]
    return SpanCandidate(
        doc_id=doc.doc_id,
        start_tok=window.first_token + span.start,
        end_tok=window.first_token + span.end,
        char_start=first.char_start,
        char_end=last.char_end,
        score=span.score,
        text=doc.text[first.char_start:last.char_end],
    )


def decode_document(
    doc: Document, results: Sequence[WindowDecoding]
) -> DocumentAnswer:
    """Merges window decodings into one per-document answer.

    Identical char ranges collapse to the best score; among distinct
    overlapping spans the higher-scoring one survives. The YNN verdict comes
    from the window that produced the best surviving span.
    """
    if not results:
        raise ValueError("decode_document needs at least one window result")

    candidates: list[tuple[SpanCandidate, int]] = []
    for win_index, result in enumerate(results):
        if result.window.doc_id != doc.doc_id:
            raise ValueError(
                f"window for doc {result.window.doc_id!r} passed with doc "
                f"{doc.doc_id!r}"
            )
        for span in result.spans:
            candidates.append((_materialize(doc, result.window, span), win_index))

    # Collapse duplicate char ranges, keeping the best score.
    by_range: dict[tuple[int, int], tuple[SpanCandidate, int]] = {}
    for cand, win_index in candidates:
        key = (cand.char_start, cand.char_end)
        if key not in by_range or cand.score > by_range[key][0].score:
            by_range[key] = (cand, win_index)

    # Resolve overlaps in favor of higher scores.
    ordered = sorted(
        by_range.values(),
        key=lambda item: (-item[0].score, item[0].char_start, item[0].char_end),
    )
    kept: list[tuple[SpanCandidate, int]] = []
    for cand, win_index in ordered:
        clash = any(
            cand.char_start < other.char_end and other.char_start < cand.char_end
            for other, _ in kept
        )
        if not clash:
            kept.append((cand, win_index))

    best_cand, best_win = kept[0]
    kept.sort(key=lambda item: (item[0].char_start, item[0].char_end))
    ynn = YNN_LABELS[int(np.argmax(results[best_win].yn_probs))]
    return DocumentAnswer(
        doc_id=doc.doc_id,
        spans=tuple(cand for cand, _ in kept),
        ynn=ynn,
        confidence=best_cand.score,
    )


def select_answer(
    doc_answers: Sequence[DocumentAnswer],
    join_separator: str = DEFAULT_JOIN_SEPARATOR,
) -> FinalAnswer:
    """Picks the highest-confidence document; ties keep the earliest rank."""
    if not doc_answers:
        raise ValueError("select_answer needs at least one document answer")
    winner = max(doc_answers, key=lambda d: d.confidence)
    return FinalAnswer(
        text=join_separator.join(span.text for span in winner.spans),
        spans=winner.spans,
        ynn=winner.ynn,
        source_doc=winner.doc_id,
        confidence=winner.confidence,
    )
