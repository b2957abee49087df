"""Pipeline wiring, provenance, fallbacks, and the evaluation harness."""

from __future__ import annotations

import json

import numpy as np
import pytest

from corpusqa.datasets import QAExample, synth_generate
from corpusqa.errors import ConfigurationError
from corpusqa.extractor import EncoderConfig, init_params, save_checkpoint
from corpusqa.extractor.heads import HeadProbs
from corpusqa.labels import YNN_INDEX
from corpusqa.pipeline import (
    PipelineConfig,
    QAPipeline,
    build_retriever,
    evaluate_e2e,
    evaluate_retriever,
    load_corpus,
)
from corpusqa.remote import RemoteRetriever
from corpusqa.retrieval import BM25Retriever, RankedList


# --- Stubs -------------------------------------------------------------------


class OracleExtractor:
    """Emits probabilities that decode to each document's planted gold span."""

    max_window_len = 384

    def __init__(self, corpus, examples):
        self.golds = {}
        for ex in examples:
            start = (
                ex.answer_start
                if ex.answer_start is not None
                else ex.context.find(ex.gold_text)
            )
            self.golds[ex.gold_doc_id] = (
                start, start + len(ex.gold_text), ex.gold_ynn
            )

    def predict_probs(self, window) -> HeadProbs:
        n = len(window.tokens)
        start = np.full(n, 0.01)
        end = np.full(n, 0.01)
        yn = np.full(3, 0.05)
        gold = self.golds.get(window.doc_id)
        if gold is not None:
            gs, ge, ynn = gold
            inside = [
                k for k, t in enumerate(window.tokens)
                if t.char_end > gs and t.char_start < ge
            ]
            contains = (
                inside
                and window.tokens[0].char_start <= gs
                and window.tokens[-1].char_end >= ge
            )
            if contains:
                start[inside[0]] = 0.95
                end[inside[-1]] = 0.95
            yn[YNN_INDEX[ynn]] = 0.9
        return HeadProbs(start=start, end=end, yn=yn / yn.sum())


class BlankExtractor:
    """Never clears the threshold; every window decodes via the fallback."""

    max_window_len = 384

    def predict_probs(self, window) -> HeadProbs:
        n = len(window.tokens)
        return HeadProbs(
            start=np.full(n, 0.01), end=np.full(n, 0.01),
            yn=np.array([0.1, 0.1, 0.8]),
        )


class StubRetriever:
    def __init__(self, fn):
        self.fn = fn

    def retrieve(self, query: str, k: int = 5) -> RankedList:
        return self.fn(query, k)


def oracle_retriever(examples, corpus):
    by_question = {ex.question: ex.gold_doc_id for ex in examples}
    others = corpus.doc_ids

    def fn(query, k):
        gold = by_question[query]
        rest = [d for d in others if d != gold][: k - 1]
        entries = [(gold, 10.0)] + [(d, 10.0 - i - 1) for i, d in enumerate(rest)]
        return RankedList(query, entries[:k])

    return StubRetriever(fn)


def goldless_retriever(examples, corpus):
    by_question = {ex.question: ex.gold_doc_id for ex in examples}

    def fn(query, k):
        gold = by_question[query]
        rest = [d for d in corpus.doc_ids if d != gold][:k]
        return RankedList(query, [(d, 5.0 - i) for i, d in enumerate(rest)])

    return StubRetriever(fn)


@pytest.fixture(scope="module")
def synth():
    corpus, examples = synth_generate(seed=21, n_docs=12, n_questions=12)
    return corpus, examples


def _config(**overrides):
    base = dict(corpus_root="unused", checkpoint="unused")
    base.update(overrides)
    return PipelineConfig(**base)


def _pipeline(corpus, examples, retriever=None, extractor=None, **config_overrides):
    return QAPipeline(
        _config(**config_overrides),
        corpus=corpus,
        retriever=retriever or oracle_retriever(examples, corpus),
        extractor=extractor or OracleExtractor(corpus, examples),
    )


# --- Config ------------------------------------------------------------------


class TestPipelineConfig:
    def test_defaults(self):
        config = _config()
        assert config.retriever == "builtin"
        assert config.top_k_docs == 5
        assert config.tau == 0.5

    @pytest.mark.parametrize(
        "overrides",
        [
            {"top_k_docs": 0},
            {"tau": 0.0},
            {"tau": 1.0},
            {"stride": 0},
            {"max_window_len": 0},
            {"max_span_len": 0},
            {"retriever": "ftp://example.com"},
        ],
    )
    def test_validation(self, overrides):
        with pytest.raises(ConfigurationError):
            _config(**overrides)

    def test_http_retriever_accepted(self):
        assert _config(retriever="http://localhost:99/r").retriever.startswith("http")

    def test_dict_round_trip(self):
        config = _config(top_k_docs=3, tau=0.4)
        assert PipelineConfig.from_dict(config.to_dict()) == config

    def test_unknown_field_rejected(self):
        payload = _config().to_dict()
        payload["topk"] = 5
        with pytest.raises(ConfigurationError, match="topk"):
            PipelineConfig.from_dict(payload)

    def test_file_round_trip(self, tmp_path):
        config = _config(stride=64)
        path = tmp_path / "config.json"
        config.save(path)
        assert PipelineConfig.from_file(path) == config

    def test_from_file_errors_are_configuration_errors(self, tmp_path):
        with pytest.raises(ConfigurationError):
            PipelineConfig.from_file(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            PipelineConfig.from_file(bad)


class TestLoadCorpusAndRetriever:
    def test_missing_root(self, tmp_path):
        with pytest.raises(ConfigurationError, match="corpus_root"):
            load_corpus(_config(corpus_root=str(tmp_path / "nope")))

    def test_empty_root(self, tmp_path):
        with pytest.raises(ConfigurationError, match="no documents"):
            load_corpus(_config(corpus_root=str(tmp_path)))

    def test_builtin_from_corpus(self, synth):
        corpus, _ = synth
        retriever = build_retriever(_config(), corpus)
        assert isinstance(retriever, BM25Retriever)
        assert retriever.retrieve("entity000", k=1).doc_ids == ["doc0000.txt"]

    def test_builtin_from_index_file(self, synth, tmp_path):
        corpus, _ = synth
        BM25Retriever().fit(corpus).save(tmp_path / "idx.bin")
        retriever = build_retriever(_config(index_path=str(tmp_path / "idx.bin")))
        assert retriever.retrieve("entity003", k=1).doc_ids == ["doc0003.txt"]

    def test_missing_index_file(self):
        with pytest.raises(ConfigurationError, match="index"):
            build_retriever(_config(index_path="nowhere.bin"))

    def test_remote_url_builds_client(self):
        retriever = build_retriever(_config(retriever="http://localhost:1/r"))
        assert isinstance(retriever, RemoteRetriever)
        assert retriever.endpoint == "http://localhost:1/r"


# --- Answering ---------------------------------------------------------------


class TestAnswer:
    def test_oracle_stubs_answer_exactly(self, synth):
        corpus, examples = synth
        pipe = _pipeline(corpus, examples)
        for ex in examples[:6]:
            record = pipe.answer(ex.question)
            assert record.final.text == ex.gold_text
            assert record.final.ynn == ex.gold_ynn
            assert record.final.source_doc == ex.gold_doc_id
            assert not record.provenance.used_fallback

    def test_provenance_covers_every_retrieved_doc(self, synth):
        corpus, examples = synth
        pipe = _pipeline(corpus, examples, top_k_docs=4)
        record = pipe.answer(examples[0].question)
        assert len(record.provenance.retrieved) == 4
        for entry in record.provenance.retrieved:
            assert entry.doc_id in corpus
            assert isinstance(entry.retrieval_score, float)
            assert entry.extraction_confidence is not None
        assert record.final.source_doc in [
            e.doc_id for e in record.provenance.retrieved
        ]

    def test_unknown_doc_ids_skipped_with_null_confidence(self, synth):
        corpus, examples = synth
        ex = examples[0]
        retriever = StubRetriever(
            lambda q, k: RankedList(
                q, [("ghost.txt", 9.0), (ex.gold_doc_id, 8.0)]
            )
        )
        pipe = _pipeline(corpus, examples, retriever=retriever)
        record = pipe.answer(ex.question)
        by_doc = {e.doc_id: e for e in record.provenance.retrieved}
        assert by_doc["ghost.txt"].extraction_confidence is None
        assert by_doc[ex.gold_doc_id].extraction_confidence is not None
        assert record.final.text == ex.gold_text
        assert not record.provenance.used_fallback

    def test_empty_retrieval_falls_back_lexically(self, synth):
        corpus, examples = synth
        retriever = StubRetriever(lambda q, k: RankedList(q, []))
        pipe = _pipeline(corpus, examples, retriever=retriever)
        ex = examples[0]
        record = pipe.answer(ex.question)
        assert record.provenance.used_fallback
        assert record.final.text  # an answer always comes back
        (entry,) = record.provenance.retrieved
        assert entry.retrieval_score == 0.0
        # The question names its entity, so lexical overlap finds the gold doc.
        assert entry.doc_id == ex.gold_doc_id

    def test_all_unknown_ids_fall_back(self, synth):
        corpus, examples = synth
        retriever = StubRetriever(
            lambda q, k: RankedList(q, [("g1", 2.0), ("g2", 1.0)])
        )
        pipe = _pipeline(corpus, examples, retriever=retriever)
        record = pipe.answer(examples[0].question)
        assert record.provenance.used_fallback
        assert len(record.provenance.retrieved) == 3  # two ghosts + fallback
        assert record.final.text

    def test_answer_record_serializes(self, synth):
        corpus, examples = synth
        record = _pipeline(corpus, examples).answer(examples[0].question)
        payload = record.to_dict()
        assert json.dumps(payload, sort_keys=True)
        assert payload["provenance"]["used_fallback"] is False
        assert payload["text"] == examples[0].gold_text

    def test_blank_extractor_still_answers(self, synth):
        corpus, examples = synth
        pipe = _pipeline(corpus, examples, extractor=BlankExtractor())
        record = pipe.answer(examples[0].question)
        assert record.final.text
        assert record.final.confidence == pytest.approx(0.01)

    def test_timing_accumulates(self, synth):
        corpus, examples = synth
        pipe = _pipeline(corpus, examples)
        pipe.answer(examples[0].question)
        assert pipe.timing["retrieval_s"] >= 0.0
        assert pipe.timing["extraction_s"] > 0.0


class TestPipelineConstruction:
    def test_checkpoint_missing(self, synth, tmp_path):
        corpus, examples = synth
        config = _config(checkpoint=str(tmp_path / "missing.ckpt"))
        with pytest.raises(ConfigurationError, match="checkpoint"):
            QAPipeline(config, corpus=corpus,
                       retriever=oracle_retriever(examples, corpus))

    def test_window_len_must_fit_model(self, synth, tmp_path):
        corpus, examples = synth
        small = init_params(EncoderConfig(max_window_len=64))
        path = tmp_path / "small.ckpt"
        save_checkpoint(small, path)
        config = _config(checkpoint=str(path), max_window_len=384)
        with pytest.raises(ConfigurationError, match="max_window_len"):
            QAPipeline(config, corpus=corpus,
                       retriever=oracle_retriever(examples, corpus))

    def test_loads_real_extractor_from_checkpoint(self, synth, tmp_path):
        corpus, examples = synth
        params = init_params(EncoderConfig())
        path = tmp_path / "m.ckpt"
        save_checkpoint(params, path)
        pipe = QAPipeline(
            _config(checkpoint=str(path)),
            corpus=corpus,
            retriever=oracle_retriever(examples, corpus),
        )
        assert pipe.answer(examples[0].question).final.text


# --- Evaluation --------------------------------------------------------------


class TestEvaluateRetriever:
    def test_single_gold_precision_vs_hit(self, synth):
        corpus, examples = synth
        table = evaluate_retriever(
            examples, oracle_retriever(examples, corpus), ks=(1, 5)
        )
        rows = {row.k: row for row in table.rows}
        assert rows[1].precision_at_k == 1.0
        assert rows[1].hit_at_k == 1.0
        assert rows[5].precision_at_k == pytest.approx(0.2)
        assert rows[5].hit_at_k == 1.0

    def test_table_serialization_names_both_metrics(self, synth):
        corpus, examples = synth
        table = evaluate_retriever(
            examples, oracle_retriever(examples, corpus), ks=(1, 5)
        )
        assert table.to_dict()["columns"] == ["k", "precision_at_k", "hit_at_k"]
        text = table.to_text()
        assert "P@K" in text and "hit@K" in text

    def test_requires_gold_doc_ids(self, synth):
        corpus, examples = synth
        nameless = [
            QAExample("qx", "what?", "a", "none"),
            examples[0],
        ]
        with pytest.raises(ValueError, match="qx"):
            evaluate_retriever(nameless, oracle_retriever(examples, corpus))

    def test_requires_examples(self, synth):
        corpus, examples = synth
        with pytest.raises(ValueError):
            evaluate_retriever([], oracle_retriever(examples, corpus))


class TestEvaluateE2E:
    def test_perfect_stubs_score_one(self, synth):
        corpus, examples = synth
        report = evaluate_e2e(examples, _pipeline(corpus, examples), ks=(1, 5))
        assert report.scores.f1 == pytest.approx(1.0)
        assert report.scores.em == pytest.approx(1.0)
        assert report.scores.ynn_accuracy == pytest.approx(1.0)
        assert report.errors == ()
        assert report.retriever_table is not None
        assert report.config_snapshot == _pipeline(corpus, examples).config.to_dict()

    def test_better_retrieval_never_hurts(self, synth):
        corpus, examples = synth
        with_gold = evaluate_e2e(examples, _pipeline(corpus, examples), ks=(1,))
        without_gold = evaluate_e2e(
            examples,
            _pipeline(corpus, examples,
                      retriever=goldless_retriever(examples, corpus)),
            ks=(1,),
        )
        assert with_gold.scores.f1 >= without_gold.scores.f1
        assert with_gold.scores.em >= without_gold.scores.em

    def test_rows_sorted_by_question_id(self, synth):
        corpus, examples = synth
        shuffled = list(reversed(examples))
        report = evaluate_e2e(shuffled, _pipeline(corpus, examples), ks=(1,))
        ids = [r.question_id for r in report.scores.per_question]
        assert ids == sorted(ids)

    def test_failing_question_scores_zero_and_is_recorded(self, synth):
        corpus, examples = synth
        boom_doc = examples[3].gold_doc_id
        oracle = OracleExtractor(corpus, examples)

        class BoomExtractor:
            max_window_len = 384

            def predict_probs(self, window):
                if window.doc_id == boom_doc:
                    raise RuntimeError("extractor exploded")
                return oracle.predict_probs(window)

        # top_k_docs=1 keeps the poisoned doc out of the other questions' runs
        report = evaluate_e2e(
            examples,
            _pipeline(corpus, examples, extractor=BoomExtractor(),
                      top_k_docs=1),
            ks=(1,),
        )
        assert len(report.errors) == 1
        qid, message = report.errors[0]
        assert qid == examples[3].question_id
        assert "exploded" in message
        row = {r.question_id: r for r in report.scores.per_question}[qid]
        assert row.f1 == 0.0 and row.em == 0 and row.ynn_correct == 0
        # the other questions still score perfectly
        assert report.scores.em == pytest.approx(11 / 12)

    def test_no_gold_doc_ids_skips_retriever_table(self, synth):
        corpus, examples = synth
        stripped = [
            QAExample(ex.question_id, ex.question, ex.gold_text, ex.gold_ynn)
            for ex in examples[:3]
        ]
        retriever = StubRetriever(
            lambda q, k: RankedList(q, [(corpus.doc_ids[0], 1.0)])
        )
        report = evaluate_e2e(
            stripped, _pipeline(corpus, examples, retriever=retriever), ks=(1,)
        )
        assert report.retriever_table is None

    def test_report_json_shape_and_timing_toggle(self, synth):
        corpus, examples = synth
        report = evaluate_e2e(examples, _pipeline(corpus, examples), ks=(1, 5))
        with_timing = report.to_dict()
        assert set(with_timing) == {
            "scores", "retriever_table", "config", "errors", "timing",
        }
        assert "timing" not in report.to_dict(include_timing=False)
        parsed = json.loads(report.to_json(include_timing=False))
        assert parsed == report.to_dict(include_timing=False)

    def test_repeat_runs_byte_identical_without_timing(self, synth):
        corpus, examples = synth
        a = evaluate_e2e(examples, _pipeline(corpus, examples), ks=(1, 5))
        b = evaluate_e2e(examples, _pipeline(corpus, examples), ks=(1, 5))
        assert a.to_json(include_timing=False) == b.to_json(include_timing=False)

    def test_report_text_includes_table_and_scores(self, synth):
        corpus, examples = synth
        report = evaluate_e2e(examples, _pipeline(corpus, examples), ks=(1,))
        text = report.to_text(model_name="stub")
        assert "hit@K" in text and "stub" in text
