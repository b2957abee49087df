"""Dataset loading, training-window labeling, and the synthetic fixture."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import CorpusStore, Document, Window, window_document
from .errors import DataFormatError, LabelingError
from .labels import AnswerLabel, normalize_ynn

DEFAULT_TRAIN_BUCKETS = 7  # question index % 10 < 7 → training split


@dataclass(frozen=True)
class QAExample:
    """One question with its gold answer.

    Evaluation sets carry gold_doc_id; SQuAD-style data carries the context
    paragraph directly (with the answer's character offset when known).
    """

    question_id: str
    question: str
    gold_text: str
    gold_ynn: str
    gold_doc_id: str | None = None
    context: str | None = None
    answer_start: int | None = None


@dataclass(frozen=True)
class LabeledWindow:
    window: Window
    label: AnswerLabel


def _get(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise DataFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def load_squad(path: str | Path, version: str = "v1.1") -> list[QAExample]:
    """Reads the standard nested SQuAD JSON; order preserved.

    v2.0 examples flagged is_impossible get an empty gold_text. Parse errors
    name the path into the JSON structure.
    """
    if version not in ("v1.1", "v2.0"):
        raise ValueError(f"unknown SQuAD version {version!r}")
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc

    examples: list[QAExample] = []
    articles = _get(payload, "data", str(path))
    for ai, article in enumerate(articles):
        a_where = f"data[{ai}]"
        for pi, para in enumerate(_get(article, "paragraphs", a_where)):
            p_where = f"{a_where}.paragraphs[{pi}]"
            context = _get(para, "context", p_where)
            for qi, qa in enumerate(_get(para, "qas", p_where)):
                q_where = f"{p_where}.qas[{qi}]"
                question = _get(qa, "question", q_where)
                qid = str(_get(qa, "id", q_where))
                impossible = version == "v2.0" and qa.get("is_impossible", False)
                if impossible:
                    gold_text, answer_start = "", None
                else:
                    answers = _get(qa, "answers", q_where)
                    if not answers:
                        raise DataFormatError(f"{q_where}.answers: empty")
                    first = answers[0]
                    gold_text = _get(first, "text", f"{q_where}.answers[0]")
                    answer_start = _get(
                        first, "answer_start", f"{q_where}.answers[0]"
                    )
                examples.append(
                    QAExample(
                        question_id=qid,
                        question=question,
                        gold_text=gold_text,
                        gold_ynn="none",
                        context=context,
                        answer_start=answer_start,
                    )
                )
    return examples


def load_qa_eval(path: str | Path) -> list[QAExample]:
    """Reads JSON-lines evaluation data; each line is one question.

    Expected fields: question_id, question, answer, ynn, doc_id. Errors carry
    the 1-based line number.
    """
    path = Path(path)
    examples: list[QAExample] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{where}: {exc}") from exc
        try:
            ynn = normalize_ynn(_get(row, "ynn", where))
        except ValueError as exc:
            raise DataFormatError(f"{where}: {exc}") from exc
        examples.append(
            QAExample(
                question_id=str(_get(row, "question_id", where)),
                question=_get(row, "question", where),
                gold_text=_get(row, "answer", where),
                gold_ynn=ynn,
                gold_doc_id=_get(row, "doc_id", where),
            )
        )
    return examples


def resolve_context(example: QAExample, corpus: CorpusStore) -> QAExample:
    """Fills context (and the answer offset) from the example's gold document."""
    if example.context is not None:
        return example
    if example.gold_doc_id is None or example.gold_doc_id not in corpus:
        raise LabelingError(
            f"{example.question_id}: no context and no resolvable gold doc "
            f"({example.gold_doc_id!r})"
        )
    text = corpus.get(example.gold_doc_id).text
    start = text.find(example.gold_text) if example.gold_text else None
    if example.gold_text and start < 0:
        raise LabelingError(
            f"{example.question_id}: gold answer not found in document "
            f"{example.gold_doc_id!r}"
        )
    return replace(example, context=text, answer_start=start)


def _window_label(
    window: Window, gold_start: int, gold_end: int, yn: str
) -> AnswerLabel:
    """Label for one window; empty/none unless the window holds the full span."""
    win_start = window.tokens[0].char_start
    win_end = window.tokens[-1].char_end
    if gold_start < win_start or gold_end > win_end:
        return AnswerLabel.empty()
    overlapping = [
        i
        for i, tok in enumerate(window.tokens)
        if tok.char_end > gold_start and tok.char_start < gold_end
    ]
    if not overlapping:
        return AnswerLabel.empty()
    return AnswerLabel.span(overlapping[0], overlapping[-1], yn=yn)


def make_training_windows(
    example: QAExample,
    max_window_len: int = 384,
    stride: int = 128,
) -> list[LabeledWindow]:
    """Windows the example's context and maps the gold span into each window.

    The gold character span snaps outward to whole tokens. Windows that do not
    fully contain the span are labeled empty/none, so a straddled answer is
    only ever supervised in the window that holds all of it.
    """
    if example.context is None:
        raise LabelingError(
            f"{example.question_id}: example has no context to window"
        )
    context = example.context
    doc = Document(
        doc_id=example.gold_doc_id or example.question_id, text=context
    )
    windows = window_document(doc, max_window_len=max_window_len, stride=stride)

    if not example.gold_text:
        return [LabeledWindow(w, AnswerLabel.empty()) for w in windows]

    gold_start = example.answer_start
    if gold_start is None:
        gold_start = context.find(example.gold_text)
    if (
        gold_start < 0
        or context[gold_start:gold_start + len(example.gold_text)]
        != example.gold_text
    ):
        raise LabelingError(
            f"{example.question_id}: gold answer not found at its stated "
            f"offset in the context"
        )
    gold_end = gold_start + len(example.gold_text)

    labeled = [
        LabeledWindow(w, _window_label(w, gold_start, gold_end, example.gold_ynn))
        for w in windows
    ]
    if all(not lw.label.start_positions for lw in labeled):
        raise LabelingError(
            f"{example.question_id}: no window fully contains the gold answer"
        )
    return labeled


@dataclass(frozen=True)
class LabelingResult:
    windows: tuple[LabeledWindow, ...]
    skipped: tuple[tuple[str, str], ...]   # (question_id, reason)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


def label_examples(
    examples: Iterable[QAExample],
    max_window_len: int = 384,
    stride: int = 128,
    corpus: CorpusStore | None = None,
) -> LabelingResult:
    """make_training_windows over many examples; failures are counted, not fatal."""
    windows: list[LabeledWindow] = []
    skipped: list[tuple[str, str]] = []
    for example in examples:
        try:
            if corpus is not None:
                example = resolve_context(example, corpus)
            windows.extend(
                make_training_windows(
                    example, max_window_len=max_window_len, stride=stride
                )
            )
        except LabelingError as exc:
            skipped.append((example.question_id, str(exc)))
    return LabelingResult(windows=tuple(windows), skipped=tuple(skipped))


# --- Synthetic fixture -------------------------------------------------------
#
# Construction rules the tests lean on:
#   - every document holds one fact sentence "<entity> maps onto <a> <b>";
#     the entity token appears in no other document, so a question mentioning
#     it can only match its own document;
#   - filler vocabulary is disjoint from every question word, so the gold
#     document is the only one with a positive retrieval score;
#   - value words for plain-fact documents and yes/no documents come from
#     disjoint pools, so whether a token starts/ends an answer is a property
#     of the token itself, learnable across the train/eval split.

_VALUES_A = (
    "amber", "crimson", "cobalt", "ivory", "scarlet", "golden", "silver",
    "violet", "emerald", "coral", "bronze", "copper", "indigo", "maroon",
    "olive", "teal", "azure", "magenta", "pearl", "ruby", "sable", "topaz",
    "umber", "jade", "onyx",
)
_VALUES_B = (
    "falcon", "heron", "otter", "badger", "lynx", "marten", "osprey",
    "plover", "raven", "stork", "weasel", "bison", "condor", "dolphin",
    "gazelle", "ibex", "jackal", "kestrel", "lemur", "marmot", "narwhal",
    "ocelot", "panther", "quail", "tapir",
)
_VALUES_C = (
    "woven", "carved", "braided", "forged", "molded", "etched", "welded",
    "knitted", "stitched", "hammered", "polished", "burnished", "lacquered",
    "gilded", "plated", "riveted", "soldered", "tempered", "varnished",
    "waxed", "glazed", "engraved", "embossed", "quilted", "threaded",
)
_VALUES_D = (
    "anvil", "beaker", "chisel", "dowel", "easel", "flask", "gimlet", "hasp",
    "ingot", "jig", "kiln", "lathe", "mallet", "nozzle", "oarlock", "pulley",
    "quern", "rasp", "spigot", "trowel", "vise", "winch", "yoke", "zither",
    "awl",
)
_FILLER = (
    "orchard", "meadow", "harbor", "valley", "canyon", "prairie", "tundra",
    "lagoon", "fjord", "mesa", "dune", "glacier", "ridge", "summit", "basin",
    "delta", "estuary", "grove", "thicket", "marsh", "moor", "steppe",
    "savanna", "foothill", "plateau", "ravine", "gulch", "knoll", "hollow",
    "bluff", "crag", "scarp", "terrace", "upland", "lowland", "headland",
    "isthmus", "atoll", "cay", "reef",
)

_YES_PHRASE = "supports halting without risk"
_NO_PHRASE = "never allows halting midway"


def _filler_sentence(rng: random.Random) -> str:
    words = rng.choices(_FILLER, k=rng.randint(4, 8))
    return " ".join(words) + "."


def _is_yn_doc(index: int) -> bool:
    return index % 3 == 2


def synth_generate(
    seed: int, n_docs: int, n_questions: int
) -> tuple[CorpusStore, list[QAExample]]:
    """Deterministic planted-fact corpus plus matching questions.

    Question i targets document i (mod n_docs); every third document carries a
    yes/no verdict sentence and gets a yes/no question instead of a fact
    question.
    """
    if n_docs < 1 or n_questions < 1:
        raise ValueError("n_docs and n_questions must be >= 1")
    rng = random.Random(seed)

    docs: list[Document] = []
    facts: list[tuple[str, str, str]] = []  # (entity, gold_text, ynn)
    for i in range(n_docs):
        entity = f"entity{i:03d}"
        yn_doc = _is_yn_doc(i)
        if yn_doc:
            a, b = rng.choice(_VALUES_C), rng.choice(_VALUES_D)
        else:
            a, b = rng.choice(_VALUES_A), rng.choice(_VALUES_B)
        fact = f"{entity} maps onto {a} {b}."
        sentences = [_filler_sentence(rng) for _ in range(rng.randint(1, 3))]
        sentences.append(fact)
        sentences.extend(_filler_sentence(rng) for _ in range(rng.randint(1, 3)))
        if yn_doc:
            answer_yes = (i % 6) == 2
            phrase = _YES_PHRASE if answer_yes else _NO_PHRASE
            sentences.append(f"{entity} {phrase}.")
            sentences.append(_filler_sentence(rng))
            facts.append((entity, phrase, "yes" if answer_yes else "no"))
        else:
            facts.append((entity, f"{a} {b}", "none"))
        docs.append(Document(doc_id=f"doc{i:04d}.txt", text=" ".join(sentences)))

    corpus = CorpusStore(docs)
    examples: list[QAExample] = []
    for q in range(n_questions):
        i = q % n_docs
        entity, gold_text, ynn = facts[i]
        if ynn == "none":
            question = f"which values does {entity} expose?"
        else:
            question = f"can {entity} be stopped safely?"
        context = docs[i].text
        examples.append(
            QAExample(
                question_id=f"q{q:04d}",
                question=question,
                gold_text=gold_text,
                gold_ynn=ynn,
                gold_doc_id=docs[i].doc_id,
                context=context,
                answer_start=context.find(gold_text),
            )
        )
    return corpus, examples


def split_synth(
    examples: Sequence[QAExample],
) -> tuple[list[QAExample], list[QAExample]]:
    """Deterministic 70/30 split by question position."""
    train = [ex for i, ex in enumerate(examples) if i % 10 < DEFAULT_TRAIN_BUCKETS]
    held_out = [
        ex for i, ex in enumerate(examples) if i % 10 >= DEFAULT_TRAIN_BUCKETS
    ]
    return train, held_out


def write_synth_fixture(
    out_dir: str | Path, corpus: CorpusStore, examples: Sequence[QAExample]
) -> None:
    """Writes corpus/*.txt, qa.jsonl, and a SQuAD-format file of the train split.

    Re-ingesting the corpus directory reproduces the CorpusStore exactly. The
    SQuAD file exists for the CLI training path; it carries no yes/no labels
    because the format has none.
    """
    out_dir = Path(out_dir)
    corpus_dir = out_dir / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for doc in corpus:
        (corpus_dir / doc.doc_id).write_text(doc.text, encoding="utf-8")

    with (out_dir / "qa.jsonl").open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "question_id": ex.question_id,
                        "question": ex.question,
                        "answer": ex.gold_text,
                        "ynn": ex.gold_ynn,
                        "doc_id": ex.gold_doc_id,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    train, _ = split_synth(examples)
    squad = {
        "version": "v1.1",
        "data": [
            {
                "title": "synthetic",
                "paragraphs": [
                    {
                        "context": ex.context,
                        "qas": [
                            {
                                "id": ex.question_id,
                                "question": ex.question,
                                "answers": [
                                    {
                                        "text": ex.gold_text,
                                        "answer_start": ex.answer_start,
                                    }
                                ],
                            }
                        ],
                    }
                    for ex in train
                ],
            }
        ],
    }
    (out_dir / "train_squad.json").write_text(
        json.dumps(squad, indent=2, sort_keys=True), encoding="utf-8"
    )
