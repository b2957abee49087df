"""Tokenizer, corpus store, ingestion, and sliding-window segmentation."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from corpusqa.corpus import (
    CorpusStore,
    Document,
    IngestWarning,
    ingest_corpus,
    tokenize,
    window_document,
)
from corpusqa.errors import ConfigurationError


class TestTokenize:
    def test_basic_with_offsets(self):
        toks = tokenize("Hello, World! 42")
        assert [t.surface for t in toks] == ["hello", "world", "42"]
        assert [(t.char_start, t.char_end) for t in toks] == [(0, 5), (7, 12), (14, 16)]

    def test_underscore_splits(self):
        assert [t.surface for t in tokenize("storage_types")] == ["storage", "types"]

    def test_casefold_and_unicode(self):
        assert [t.surface for t in tokenize("Łódź GROSSE")] == ["łódź", "grosse"]

    def test_empty_and_punctuation_only(self):
        assert tokenize("") == []
        assert tokenize("... !!! --") == []

    @given(st.text(max_size=200))
    def test_offsets_slice_back_to_surface(self, text):
        for tok in tokenize(text):
            assert text[tok.char_start:tok.char_end].casefold() == tok.surface

    @given(st.text(max_size=200))
    def test_tokens_ordered_and_disjoint(self, text):
        toks = tokenize(text)
        for a, b in zip(toks, toks[1:]):
            assert a.char_end <= b.char_start
        for tok in toks:
            assert tok.char_start < tok.char_end


class TestDocumentAndStore:
    def test_byte_len_utf8(self):
        assert Document("d", "abc").byte_len == 3
        assert Document("d", "łą").byte_len == 4

    def test_store_sorted_by_doc_id(self):
        store = CorpusStore([Document("b", "x"), Document("a", "y")])
        assert store.doc_ids == ["a", "b"]
        assert [d.doc_id for d in store] == ["a", "b"]

    def test_duplicate_doc_id_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            CorpusStore([Document("a", "x"), Document("a", "y")])

    def test_lookup(self):
        store = CorpusStore([Document("a", "y")])
        assert store.get("a").text == "y"
        assert "a" in store and "zz" not in store
        assert len(store) == 1
        with pytest.raises(KeyError, match="zz"):
            store.get("zz")

    def test_warnings_carried(self):
        store = CorpusStore([Document("a", "y")], [IngestWarning("p", "why")])
        assert store.warnings == (IngestWarning("p", "why"),)


class TestIngest:
    def test_nested_files_posix_ids(self, tmp_path):
        (tmp_path / "sub").mkdir()
        (tmp_path / "b.txt").write_text("beta", encoding="utf-8")
        (tmp_path / "sub" / "a.txt").write_text("alpha", encoding="utf-8")
        store = ingest_corpus(tmp_path)
        assert store.doc_ids == ["b.txt", "sub/a.txt"]
        assert store.get("sub/a.txt").text == "alpha"

    def test_skips_empty_and_non_utf8_with_warnings(self, tmp_path):
        (tmp_path / "good.txt").write_text("fine", encoding="utf-8")
        (tmp_path / "empty.txt").write_text("", encoding="utf-8")
        (tmp_path / "binary.bin").write_bytes(b"\xff\xfe\x00abc")
        store = ingest_corpus(tmp_path)
        assert store.doc_ids == ["good.txt"]
        reasons = {w.path: w.reason for w in store.warnings}
        assert "empty.txt" in reasons and "binary.bin" in reasons

    def test_missing_root_fatal(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ingest_corpus(tmp_path / "nope")


def _expected_starts(n: int, max_len: int, stride: int) -> list[int]:
    # Generation continues from start s while s < n - min(max_len, 2*stride);
    # the first start at or past that bound produces the final window.
    bound = n - min(max_len, 2 * stride)
    starts = [0]
    while starts[-1] < bound:
        starts.append(starts[-1] + stride)
    return starts


class TestWindowing:
    def _doc(self, n: int) -> Document:
        return Document("d", " ".join(f"w{i}" for i in range(n)))

    def test_short_doc_single_window(self):
        windows = window_document(self._doc(5), max_window_len=10, stride=5)
        assert len(windows) == 1
        assert (windows[0].first_token, windows[0].last_token) == (0, 4)
        assert len(windows[0]) == 5

    def test_empty_doc_no_windows(self):
        assert window_document(Document("d", "..."), 10, 5) == []

    def test_stride_validation(self):
        doc = self._doc(5)
        with pytest.raises(ConfigurationError):
            window_document(doc, max_window_len=10, stride=0)
        with pytest.raises(ConfigurationError):
            window_document(doc, max_window_len=10, stride=11)

    def test_overlap_between_full_windows(self):
        windows = window_document(self._doc(20), max_window_len=8, stride=4)
        for a, b in zip(windows, windows[1:]):
            assert b.first_token == a.first_token + 4
        full = [w for w in windows if len(w) == 8]
        assert len(full) >= 2  # consecutive full windows share 8 - 4 tokens

    @given(
        n=st.integers(min_value=1, max_value=60),
        max_len=st.integers(min_value=1, max_value=16),
        stride_frac=st.integers(min_value=1, max_value=16),
    )
    def test_windowing_rule_and_coverage(self, n, max_len, stride_frac):
        stride = min(stride_frac, max_len)
        windows = window_document(self._doc(n), max_window_len=max_len, stride=stride)
        assert [w.first_token for w in windows] == _expected_starts(n, max_len, stride)
        covered = set()
        for i, w in enumerate(windows):
            assert w.window_index == i
            assert w.last_token == min(w.first_token + max_len, n) - 1
            assert len(w.tokens) == w.last_token - w.first_token + 1
            covered.update(range(w.first_token, w.last_token + 1))
        assert covered == set(range(n))

    def test_tokens_carry_document_offsets(self):
        doc = self._doc(12)
        for w in window_document(doc, max_window_len=5, stride=3):
            for tok in w.tokens:
                assert doc.text[tok.char_start:tok.char_end] == tok.surface
