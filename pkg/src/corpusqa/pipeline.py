"""End-to-end orchestration: retrieve, extract, decode, evaluate."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import CorpusStore, Window, ingest_corpus, window_document
from .datasets import QAExample
from .decoding import (
    DEFAULT_JOIN_SEPARATOR,
    DEFAULT_MAX_SPAN_LEN,
    DEFAULT_THRESHOLD,
    DocumentAnswer,
    FinalAnswer,
    WindowDecoding,
    decode_document,
    decode_window,
    select_answer,
)
from .errors import ConfigurationError
from .extractor import SpanExtractor
from .metrics import QuestionScore, ScoreReport, exact_match, token_f1
from .remote import RemoteRetriever
from .retrieval import (
    DEFAULT_KS,
    BM25Retriever,
    InvertedIndex,
    RankedList,
    build_index,
    closest_fallback,
    hit_at_k,
    load_index,
    precision_at_k,
)

DEFAULT_TOP_K_DOCS = 5


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to reproduce a run, JSON round-trippable.

    retriever is either the literal "builtin" (BM25 over corpus_root) or an
    HTTP endpoint URL. index_path, when set, is a prebuilt index to load
    instead of indexing corpus_root at startup.
    """

    corpus_root: str
    checkpoint: str
    retriever: str = "builtin"
    index_path: str | None = None
    top_k_docs: int = DEFAULT_TOP_K_DOCS
    max_window_len: int = 384
    stride: int = 128
    tau: float = DEFAULT_THRESHOLD
    max_span_len: int = DEFAULT_MAX_SPAN_LEN
    join_separator: str = DEFAULT_JOIN_SEPARATOR
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_k_docs < 1:
            raise ConfigurationError("top_k_docs must be >= 1")
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError(f"tau must be in (0, 1), got {self.tau}")
        if self.max_window_len < 1 or self.stride < 1 or self.max_span_len < 1:
            raise ConfigurationError(
                "max_window_len, stride, and max_span_len must be >= 1"
            )
        if self.retriever != "builtin" and not self.retriever.startswith(
            ("http://", "https://")
        ):
            raise ConfigurationError(
                "retriever must be 'builtin' or an http(s) endpoint, got "
                f"{self.retriever!r}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigurationError(
                f"unknown config fields: {', '.join(sorted(unknown))}"
            )
        try:
            return cls(**payload)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        return cls.from_dict(payload)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )


@dataclass(frozen=True)
class ProvenanceEntry:
    doc_id: str
    retrieval_score: float
    extraction_confidence: float | None   # None when the doc was not extractable


@dataclass(frozen=True)
class Provenance:
    retrieved: tuple[ProvenanceEntry, ...]
    used_fallback: bool

    def to_dict(self) -> dict:
        return {
            "retrieved": [asdict(e) for e in self.retrieved],
            "used_fallback": self.used_fallback,
        }


@dataclass(frozen=True)
class AnswerRecord:
    final: FinalAnswer
    provenance: Provenance

    def to_dict(self) -> dict:
        payload = self.final.to_dict()
        payload["provenance"] = self.provenance.to_dict()
        return payload


def load_corpus(config: PipelineConfig) -> CorpusStore:
    root = Path(config.corpus_root)
    if not root.is_dir():
        raise ConfigurationError(f"corpus_root does not exist: {root}")
    corpus = ingest_corpus(root)
    if len(corpus) == 0:
        raise ConfigurationError(f"corpus contains no documents: {root}")
    return corpus


def build_retriever(config: PipelineConfig, corpus: CorpusStore | None = None):
    """The retriever the config asks for: builtin BM25 (from a prebuilt index
    file or the corpus) or a remote endpoint client."""
    if config.retriever != "builtin":
        return RemoteRetriever(config.retriever)
    bm25 = BM25Retriever()
    if config.index_path is not None:
        path = Path(config.index_path)
        if not path.is_file():
            raise ConfigurationError(f"index file not found: {path}")
        bm25.index_ = load_index(path)
    else:
        bm25.fit(corpus if corpus is not None else load_corpus(config))
    return bm25


class QAPipeline:
    """Wires corpus, retriever, extractor, and decoder behind answer().

    corpus/retriever/extractor keyword arguments override the config-driven
    construction; tests use them to inject stubs.
    """

    def __init__(
        self,
        config: PipelineConfig,
        *,
        corpus: CorpusStore | None = None,
        retriever=None,
        extractor: SpanExtractor | None = None,
    ) -> None:
        self.config = config
        self.corpus = corpus if corpus is not None else load_corpus(config)
        if len(self.corpus) == 0:
            raise ConfigurationError("corpus contains no documents")

        self._index: InvertedIndex | None = None
        if retriever is None:
            retriever = build_retriever(config, self.corpus)
        self.retriever = retriever
        if isinstance(retriever, BM25Retriever) and hasattr(retriever, "index_"):
            self._index = retriever.index_

        if extractor is not None:
            self.extractor = extractor
        else:
            path = Path(config.checkpoint)
            if not path.is_file():
                raise ConfigurationError(f"checkpoint not found: {path}")
            self.extractor = SpanExtractor.load(path)
        model_max = getattr(self.extractor, "max_window_len", None)
        if model_max is not None and config.max_window_len > model_max:
            raise ConfigurationError(
                f"config max_window_len {config.max_window_len} exceeds the "
                f"model's limit {model_max}"
            )

        self._window_cache: dict[str, list[Window]] = {}
        self.timing = {"retrieval_s": 0.0, "extraction_s": 0.0}

    def _fallback_index(self) -> InvertedIndex:
        if self._index is None:
            self._index = build_index(self.corpus)
        return self._index

    def _windows(self, doc_id: str) -> list[Window]:
        if doc_id not in self._window_cache:
            self._window_cache[doc_id] = window_document(
                self.corpus.get(doc_id),
                max_window_len=self.config.max_window_len,
                stride=self.config.stride,
            )
        return self._window_cache[doc_id]

    def _decode_doc(self, doc_id: str) -> DocumentAnswer | None:
        doc = self.corpus.get(doc_id)
        decodings = []
        for window in self._windows(doc_id):
            probs = self.extractor.predict_probs(window)
            decodings.append(
                WindowDecoding(
                    window=window,
                    spans=tuple(
                        decode_window(
                            probs.start,
                            probs.end,
                            tau=self.config.tau,
                            max_span_len=self.config.max_span_len,
                        )
                    ),
                    yn_probs=probs.yn,
                )
            )
        if not decodings:
            return None
        return decode_document(doc, decodings)

    def answer(self, question: str) -> AnswerRecord:
        """Retrieve, extract, decode; falls back to the lexically closest
        document when retrieval returns nothing, so an answer always exists."""
        t0 = time.perf_counter()
        ranked: RankedList = self.retriever.retrieve(
            question, k=self.config.top_k_docs
        )
        self.timing["retrieval_s"] += time.perf_counter() - t0

        used_fallback = False
        entries = list(ranked.entries)
        if not entries:
            used_fallback = True
            entries = [(closest_fallback(self._fallback_index(), question), 0.0)]

        t1 = time.perf_counter()
        doc_answers: list[DocumentAnswer] = []
        provenance: list[ProvenanceEntry] = []
        for doc_id, score in entries:
            if doc_id not in self.corpus:
                provenance.append(ProvenanceEntry(doc_id, score, None))
                continue
            decoded = self._decode_doc(doc_id)
            if decoded is None:
                provenance.append(ProvenanceEntry(doc_id, score, None))
                continue
            doc_answers.append(decoded)
            provenance.append(ProvenanceEntry(doc_id, score, decoded.confidence))
        self.timing["extraction_s"] += time.perf_counter() - t1

        if not doc_answers:
            # Every retrieved id was unusable; fall back lexically.
            used_fallback = True
            doc_id = closest_fallback(self._fallback_index(), question)
            decoded = self._decode_doc(doc_id)
            if decoded is None:
                raise ConfigurationError(
                    f"fallback document {doc_id!r} yields no decodable window"
                )
            doc_answers.append(decoded)
            provenance.append(ProvenanceEntry(doc_id, 0.0, decoded.confidence))

        final = select_answer(doc_answers, self.config.join_separator)
        return AnswerRecord(
            final=final,
            provenance=Provenance(tuple(provenance), used_fallback),
        )


# --- Evaluation --------------------------------------------------------------


@dataclass(frozen=True)
class RetrieverRow:
    k: int
    precision_at_k: float
    hit_at_k: float


@dataclass(frozen=True)
class RetrieverTable:
    rows: tuple[RetrieverRow, ...]

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "columns": ["k", "precision_at_k", "hit_at_k"],
        }

    def to_text(self) -> str:
        header = f"{'K':>4} {'strict P@K':>12} {'hit@K':>8}"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            lines.append(
                f"{row.k:>4} {row.precision_at_k:>12.4f} {row.hit_at_k:>8.4f}"
            )
        return "\n".join(lines)


def evaluate_retriever(
    examples: Sequence[QAExample],
    retriever,
    ks: Sequence[int] = DEFAULT_KS,
) -> RetrieverTable:
    """Mean strict P@K and hit@K per K; retriever is anything with
    retrieve(query, k) -> RankedList."""
    if not examples:
        raise ValueError("cannot evaluate a retriever on zero questions")
    missing = [ex.question_id for ex in examples if ex.gold_doc_id is None]
    if missing:
        raise ValueError(
            "examples lack gold_doc_id: " + ", ".join(sorted(missing))
        )
    ks = tuple(ks)
    max_k = max(ks)
    precisions = {k: 0.0 for k in ks}
    hits = {k: 0.0 for k in ks}
    for ex in examples:
        ranked = retriever.retrieve(ex.question, k=max_k)
        for k in ks:
            precisions[k] += precision_at_k(ranked, {ex.gold_doc_id}, k)
            hits[k] += hit_at_k(ranked, ex.gold_doc_id, k)
    n = len(examples)
    return RetrieverTable(
        rows=tuple(
            RetrieverRow(k, precisions[k] / n, hits[k] / n) for k in ks
        )
    )


@dataclass(frozen=True)
class EvalRunReport:
    """Retriever table + answer scores + the config that produced them."""

    scores: ScoreReport
    retriever_table: RetrieverTable | None
    config_snapshot: dict
    errors: tuple[tuple[str, str], ...]    # (question_id, message)
    timing: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        payload = {
            "scores": self.scores.to_dict(),
            "retriever_table": (
                self.retriever_table.to_dict()
                if self.retriever_table is not None
                else None
            ),
            "config": self.config_snapshot,
            "errors": [list(e) for e in self.errors],
        }
        if include_timing:
            payload["timing"] = dict(self.timing)
        return payload

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(
            self.to_dict(include_timing=include_timing), indent=2, sort_keys=True
        )

    def to_text(self, model_name: str = "model") -> str:
        parts = []
        if self.retriever_table is not None:
            parts.append(self.retriever_table.to_text())
        parts.append(self.scores.to_text(model_name=model_name))
        if self.errors:
            parts.append(f"errors: {len(self.errors)} question(s) failed")
        return "\n\n".join(parts)


def evaluate_e2e(
    examples: Sequence[QAExample],
    pipeline: QAPipeline,
    ks: Sequence[int] = DEFAULT_KS,
) -> EvalRunReport:
    """Runs answer() per question; per-question failures score zero and are
    recorded, the run continues."""
    if not examples:
        raise ValueError("cannot evaluate on zero questions")
    t0 = time.perf_counter()
    retriever_table = None
    if all(ex.gold_doc_id is not None for ex in examples):
        retriever_table = evaluate_retriever(examples, pipeline.retriever, ks)
    t1 = time.perf_counter()

    rows: list[QuestionScore] = []
    errors: list[tuple[str, str]] = []
    for ex in examples:
        try:
            record = pipeline.answer(ex.question)
        except Exception as exc:  # keep going; the report carries the failure
            errors.append((ex.question_id, f"{type(exc).__name__}: {exc}"))
            rows.append(QuestionScore(ex.question_id, 0.0, 0, 0))
            continue
        final = record.final
        rows.append(
            QuestionScore(
                question_id=ex.question_id,
                f1=token_f1(final.text, ex.gold_text),
                em=exact_match(final.text, ex.gold_text),
                ynn_correct=int(final.ynn == ex.gold_ynn),
            )
        )
    t2 = time.perf_counter()

    rows.sort(key=lambda r: r.question_id)
    return EvalRunReport(
        scores=ScoreReport.from_scores(rows),
        retriever_table=retriever_table,
        config_snapshot=pipeline.config.to_dict(),
        errors=tuple(sorted(errors)),
        timing={
            "retriever_eval_s": t1 - t0,
            "answer_eval_s": t2 - t1,
            "retrieval_s": pipeline.timing["retrieval_s"],
            "extraction_s": pipeline.timing["extraction_s"],
        },
    )
