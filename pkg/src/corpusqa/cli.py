"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import ingest_corpus
from .datasets import (
    label_examples,
    load_qa_eval,
    load_squad,
    synth_generate,
    write_synth_fixture,
)
from .errors import (
    ConfigurationError,
    DataFormatError,
    LabelingError,
    RetrieverTransportError,
)
from .extractor import EncoderConfig, save_checkpoint, train
from .pipeline import (
    PipelineConfig,
    QAPipeline,
    build_retriever,
    evaluate_e2e,
    evaluate_retriever,
)
from .retrieval import build_index, load_index, retrieve, save_index

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here says 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="corpusqa", description="Open-book QA over a corpus.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build a BM25 index from a corpus directory")
    p.add_argument("corpus_root")
    p.add_argument("-o", "--output", required=True, help="index file to write")

    p = sub.add_parser("train", help="train an extractor on SQuAD-format data")
    p.add_argument("squad_json")
    p.add_argument("-o", "--output", required=True, help="checkpoint to write")
    p.add_argument("--version", default="v1.1", choices=["v1.1", "v2.0"])
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("retrieve", help="query a saved index")
    p.add_argument("index")
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=5)

    p = sub.add_parser("answer", help="answer one question (JSON on stdout)")
    p.add_argument("--config", required=True)
    p.add_argument("--question", required=True)

    p = sub.add_parser("eval-retriever", help="P@K / hit@K over a QA file")
    p.add_argument("--config", required=True)
    p.add_argument("--qa", required=True, help="JSON-lines evaluation file")

    p = sub.add_parser("eval-e2e", help="end-to-end evaluation report")
    p.add_argument("--config", required=True)
    p.add_argument("--qa", required=True, help="JSON-lines evaluation file")
    p.add_argument("-o", "--output", required=True, help="report JSON to write")

    p = sub.add_parser("gen-synth", help="write a synthetic corpus + QA fixture")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--questions", type=int, required=True)
    p.add_argument("-o", "--output", required=True, help="directory to write")

    return parser


def _cmd_index(args) -> int:
    corpus = ingest_corpus(args.corpus_root)
    for warning in corpus.warnings:
        print(f"skipped {warning.path}: {warning.reason}", file=sys.stderr)
    if len(corpus) == 0:
        print(f"no readable documents under {args.corpus_root}", file=sys.stderr)
        return EXIT_DATA
    index = build_index(corpus)
    save_index(index, args.output)
    print(f"indexed {index.num_docs} documents -> {args.output}")
    return EXIT_OK


def _cmd_train(args) -> int:
    examples = load_squad(args.squad_json, version=args.version)
    if not examples:
        print(f"no examples in {args.squad_json}", file=sys.stderr)
        return EXIT_DATA
    result = label_examples(examples)
    for qid, reason in result.skipped:
        print(f"skipped {qid}: {reason}", file=sys.stderr)
    if not result.windows:
        print("no labelable training windows", file=sys.stderr)
        return EXIT_DATA
    config = EncoderConfig(seed=args.seed)
    pairs = [(lw.window, lw.label) for lw in result.windows]
    params, history = train(
        pairs,
        config,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
    )
    save_checkpoint(params, args.output)
    print(
        f"trained on {len(pairs)} windows for {args.epochs} epochs "
        f"(final loss {history[-1]:.4f}) -> {args.output}"
    )
    return EXIT_OK


def _cmd_retrieve(args) -> int:
    if args.k < 1:
        raise ConfigurationError("-k must be >= 1")
    index = load_index(args.index)
    ranked = retrieve(index, args.query, k=args.k)
    for rank, (doc_id, score) in enumerate(ranked.entries, start=1):
        print(f"{rank}\t{doc_id}\t{score:.6f}")
    if not ranked.entries:
        print("no matching documents", file=sys.stderr)
    return EXIT_OK


def _cmd_answer(args) -> int:
    config = PipelineConfig.from_file(args.config)
    pipeline = QAPipeline(config)
    record = pipeline.answer(args.question)
    print(json.dumps(record.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_eval_retriever(args) -> int:
    config = PipelineConfig.from_file(args.config)
    examples = load_qa_eval(args.qa)
    if not examples:
        print(f"no questions in {args.qa}", file=sys.stderr)
        return EXIT_DATA
    try:
        table = evaluate_retriever(examples, build_retriever(config))
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc
    print(table.to_text())
    return EXIT_OK


def _cmd_eval_e2e(args) -> int:
    config = PipelineConfig.from_file(args.config)
    examples = load_qa_eval(args.qa)
    if not examples:
        print(f"no questions in {args.qa}", file=sys.stderr)
        return EXIT_DATA
    pipeline = QAPipeline(config)
    report = evaluate_e2e(examples, pipeline)
    Path(args.output).write_text(report.to_json(), encoding="utf-8")
    print(report.to_text(model_name=Path(config.checkpoint).name))
    print(f"\nreport written to {args.output}")
    return EXIT_OK


def _cmd_gen_synth(args) -> int:
    if args.docs < 1 or args.questions < 1:
        raise ConfigurationError("--docs and --questions must be >= 1")
    corpus, examples = synth_generate(args.seed, args.docs, args.questions)
    write_synth_fixture(args.output, corpus, examples)
    print(
        f"wrote {len(corpus)} documents and {len(examples)} questions "
        f"under {args.output}"
    )
    return EXIT_OK


_COMMANDS = {
    "index": _cmd_index,
    "train": _cmd_train,
    "retrieve": _cmd_retrieve,
    "answer": _cmd_answer,
    "eval-retriever": _cmd_eval_retriever,
    "eval-e2e": _cmd_eval_e2e,
    "gen-synth": _cmd_gen_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, LabelingError, RetrieverTransportError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
