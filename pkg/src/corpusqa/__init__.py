"""Open-book question answering over a document corpus.

BM25 retrieval, a small trainable span/YNN extractor, threshold span
decoding, and SQuAD-style scoring, glued together by QAPipeline.
"""

from .corpus import CorpusStore, Document, Token, Window, ingest_corpus, tokenize, window_document
from .datasets import (
    LabeledWindow,
    QAExample,
    label_examples,
    load_qa_eval,
    load_squad,
    make_training_windows,
    synth_generate,
    write_synth_fixture,
)
from .decoding import (
    DocumentAnswer,
    FinalAnswer,
    SpanCandidate,
    WindowDecoding,
    WindowSpan,
    decode_document,
    decode_window,
    select_answer,
)
from .errors import (
    ConfigurationError,
    DataFormatError,
    LabelingError,
    RetrieverTransportError,
    TrainingDivergedError,
)
from .extractor import (
    EncoderConfig,
    ModelParams,
    SpanExtractor,
    grad_check,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .labels import AnswerLabel, YNN_LABELS, normalize_ynn
from .metrics import (
    AnswerPair,
    ScoreReport,
    exact_match,
    normalize_answer,
    score_answers,
    token_f1,
    ynn_accuracy,
)
from .pipeline import (
    EvalRunReport,
    PipelineConfig,
    QAPipeline,
    evaluate_e2e,
    evaluate_retriever,
)
from .remote import RemoteRetriever
from .retrieval import (
    BM25Retriever,
    InvertedIndex,
    RankedList,
    build_index,
    hit_at_k,
    load_index,
    precision_at_k,
    retrieve,
    save_index,
    score_bm25,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerLabel",
    "AnswerPair",
    "BM25Retriever",
    "ConfigurationError",
    "CorpusStore",
    "DataFormatError",
    "Document",
    "DocumentAnswer",
    "EncoderConfig",
    "EvalRunReport",
    "FinalAnswer",
    "InvertedIndex",
    "LabeledWindow",
    "LabelingError",
    "ModelParams",
    "PipelineConfig",
    "QAExample",
    "QAPipeline",
    "RankedList",
    "RemoteRetriever",
    "RetrieverTransportError",
    "ScoreReport",
    "SpanCandidate",
    "SpanExtractor",
    "Token",
    "TrainingDivergedError",
    "Window",
    "WindowDecoding",
    "WindowSpan",
    "YNN_LABELS",
    "build_index",
    "decode_document",
    "decode_window",
    "evaluate_e2e",
    "evaluate_retriever",
    "exact_match",
    "grad_check",
    "hit_at_k",
    "ingest_corpus",
    "init_params",
    "label_examples",
    "load_checkpoint",
    "load_index",
    "load_qa_eval",
    "load_squad",
    "make_training_windows",
    "normalize_answer",
    "normalize_ynn",
    "precision_at_k",
    "retrieve",
    "save_checkpoint",
    "save_index",
    "score_answers",
    "score_bm25",
    "select_answer",
    "synth_generate",
    "token_f1",
    "tokenize",
    "train",
    "window_document",
    "write_synth_fixture",
    "ynn_accuracy",
]
