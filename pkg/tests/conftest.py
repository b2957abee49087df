"""Shared fixtures and small builders used across the test modules."""

from __future__ import annotations

import pytest

from corpusqa.corpus import Document, Window, window_document
from corpusqa.extractor import EncoderConfig


def toy_config(**overrides) -> EncoderConfig:
    """Smallest config that still exercises multi-head, multi-layer paths."""
    base = dict(layers=2, hidden=16, heads=2, vocab_hash_size=512,
                max_window_len=64, seed=0)
    base.update(overrides)
    return EncoderConfig(**base)


def one_window(text: str, doc_id: str = "doc.txt") -> tuple[Document, Window]:
    """A document short enough to fit a single window."""
    doc = Document(doc_id=doc_id, text=text)
    windows = window_document(doc, max_window_len=64, stride=32)
    assert len(windows) == 1
    return doc, windows[0]


@pytest.fixture(scope="session")
def synth_fixture_dir(tmp_path_factory):
    """A small generated corpus + QA fixture on disk, shared read-only."""
    from corpusqa.datasets import synth_generate, write_synth_fixture

    out = tmp_path_factory.mktemp("synth")
    corpus, examples = synth_generate(seed=3, n_docs=30, n_questions=30)
    write_synth_fixture(out, corpus, examples)
    return out
