"""Corpus ingestion, tokenization, and sliding-window segmentation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence

from .errors import ConfigurationError

# A token is a maximal run of letters/digits; underscore is excluded on purpose
# so "storage_types" splits like "storage-types" does.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_MAX_WINDOW_LEN = 384
DEFAULT_WINDOW_STRIDE = 128


class Token(NamedTuple):
    surface: str
    char_start: int
    char_end: int


def tokenize(text: str) -> list[Token]:
    """Split text into case-folded alphanumeric tokens with character offsets.

    Offsets index into the original string, so spans can be sliced back out
    of the raw text exactly.
    """
    return [
        Token(m.group(0).casefold(), m.start(), m.end())
        for m in _TOKEN_RE.finditer(text)
    ]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    @property
    def byte_len(self) -> int:
        return len(self.text.encode("utf-8"))


@dataclass(frozen=True)
class IngestWarning:
    path: str
    reason: str


class CorpusStore:
    """Immutable set of documents, ordered by doc_id."""

    def __init__(self, documents: Sequence[Document], warnings: Sequence[IngestWarning] = ()):
        docs = sorted(documents, key=lambda d: d.doc_id)
        seen: set[str] = set()
        for doc in docs:
            if doc.doc_id in seen:
                raise ValueError(f"duplicate doc_id: {doc.doc_id!r}")
            seen.add(doc.doc_id)
        self._docs: tuple[Document, ...] = tuple(docs)
        self._by_id = {d.doc_id: d for d in docs}
        self.warnings: tuple[IngestWarning, ...] = tuple(warnings)

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id: {doc_id!r}") from None

    @property
    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self._docs]


def ingest_corpus(root_path: str | Path) -> CorpusStore:
    """Read every regular file under root_path into a CorpusStore.

    doc_id is the POSIX-style path relative to the root. Files that are not
    valid UTF-8, are unreadable, or are empty are skipped with a warning
    record; an unreadable root is fatal.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise ConfigurationError(f"corpus root is not a readable directory: {root}")

    documents: list[Document] = []
    warnings: list[IngestWarning] = []
    for path in sorted(root.rglob("*"), key=lambda p: p.relative_to(root).as_posix()):
        if not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8", errors="strict")
        except UnicodeDecodeError:
            warnings.append(IngestWarning(rel, "not valid UTF-8"))
            continue
        except OSError as exc:
            warnings.append(IngestWarning(rel, f"unreadable: {exc.strerror or exc}"))
            continue
        if not text:
            warnings.append(IngestWarning(rel, "empty file"))
            continue
        documents.append(Document(doc_id=rel, text=text))
    return CorpusStore(documents, warnings)


@dataclass(frozen=True)
class Window:
    """A fixed-length slice of a document's token stream.

    first_token/last_token are inclusive document-level token indices; tokens
    holds the corresponding Token slice, whose char offsets still index the
    original document text.
    """

    doc_id: str
    window_index: int
    first_token: int
    last_token: int
    tokens: tuple[Token, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.tokens)


def window_document(
    doc: Document,
    max_window_len: int = DEFAULT_MAX_WINDOW_LEN,
    stride: int = DEFAULT_WINDOW_STRIDE,
    tokens: Optional[Sequence[Token]] = None,
) -> list[Window]:
    """Segment a document into overlapping windows of at most max_window_len tokens.

    Windows start at token 0, stride, 2*stride, ... Generation keeps going
    while the current window stops short of the document end or while at
    least two strides of tokens remain ahead of the current start, so every
    token is covered and consecutive full windows overlap by
    max_window_len - stride tokens.
    """
    if stride <= 0 or stride > max_window_len:
        raise ConfigurationError(
            f"stride must be in 1..max_window_len, got stride={stride} "
            f"max_window_len={max_window_len}"
        )
    toks = list(tokens) if tokens is not None else tokenize(doc.text)
    num_tokens = len(toks)
    if num_tokens == 0:
        return []

    windows: list[Window] = []
    start = 0
    index = 0
    while True:
        end = min(start + max_window_len, num_tokens)
        windows.append(
            Window(
                doc_id=doc.doc_id,
                window_index=index,
                first_token=start,
                last_token=end - 1,
                tokens=tuple(toks[start:end]),
            )
        )
        if end >= num_tokens and start + 2 * stride >= num_tokens:
            break
        start += stride
        index += 1
    return windows
