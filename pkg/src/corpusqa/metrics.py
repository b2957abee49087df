"""Answer scoring: normalization, exact match, token F1, YNN accuracy."""

from __future__ import annotations

import json
import string
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .labels import normalize_ynn

_PUNCT = set(string.punctuation)
_ARTICLES = {"a", "an", "the"}


def normalize_answer(text: str) -> list[str]:
    """Lowercase, strip punctuation, drop articles, split on whitespace."""
    cleaned = "".join(ch for ch in text.lower() if ch not in _PUNCT)
    return [tok for tok in cleaned.split() if tok not in _ARTICLES]


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def token_f1(pred: str, gold: str) -> float:
    """Multiset token overlap F1; both empty → 1, exactly one empty → 0."""
    pred_toks = normalize_answer(pred)
    gold_toks = normalize_answer(gold)
    if not pred_toks and not gold_toks:
        return 1.0
    if not pred_toks or not gold_toks:
        return 0.0
    common = sum((Counter(pred_toks) & Counter(gold_toks)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_toks)
    recall = common / len(gold_toks)
    return 2.0 * precision * recall / (precision + recall)


def ynn_accuracy(preds: Sequence[str], golds: Sequence[str]) -> float:
    if len(preds) != len(golds):
        raise ValueError(
            f"got {len(preds)} predictions but {len(golds)} golds"
        )
    if not preds:
        raise ValueError("cannot compute accuracy over zero answers")
    hits = sum(
        normalize_ynn(p) == normalize_ynn(g) for p, g in zip(preds, golds)
    )
    return hits / len(preds)


class AnswerPair(NamedTuple):
    question_id: str
    pred_text: str
    gold_text: str
    pred_ynn: str
    gold_ynn: str


class QuestionScore(NamedTuple):
    question_id: str
    f1: float
    em: int
    ynn_correct: int


@dataclass(frozen=True)
class ScoreReport:
    """Aggregate answer scores; aggregates are means of the per-question rows."""

    f1: float
    em: float
    ynn_accuracy: float
    per_question: tuple[QuestionScore, ...]

    @classmethod
    def from_scores(cls, rows: Sequence[QuestionScore]) -> "ScoreReport":
        if not rows:
            raise ValueError("cannot build a report from zero questions")
        n = len(rows)
        return cls(
            f1=sum(r.f1 for r in rows) / n,
            em=sum(r.em for r in rows) / n,
            ynn_accuracy=sum(r.ynn_correct for r in rows) / n,
            per_question=tuple(rows),
        )

    def to_dict(self) -> dict:
        return {
            "f1": self.f1,
            "em": self.em,
            "ynn_accuracy": self.ynn_accuracy,
            "per_question": [r._asdict() for r in self.per_question],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def to_text(self, model_name: str = "model") -> str:
        header = f"{'model':<24} {'F1':>8} {'EM':>8} {'YNN acc':>8}"
        row = (
            f"{model_name:<24} {self.f1:>8.4f} {self.em:>8.4f} "
            f"{self.ynn_accuracy:>8.4f}"
        )
        return "\n".join([header, "-" * len(header), row])


def score_answers(rows: Sequence[AnswerPair]) -> ScoreReport:
    scored = [
        QuestionScore(
            question_id=r.question_id,
            f1=token_f1(r.pred_text, r.gold_text),
            em=exact_match(r.pred_text, r.gold_text),
            ynn_correct=int(normalize_ynn(r.pred_ynn) == normalize_ynn(r.gold_ynn)),
        )
        for r in rows
    ]
    return ScoreReport.from_scores(scored)
