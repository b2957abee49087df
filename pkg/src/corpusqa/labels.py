"""Answer labels: text-span positions plus the yes/no/none verdict."""

from __future__ import annotations

from dataclasses import dataclass

YNN_LABELS = ("yes", "no", "none")
YNN_INDEX = {label: i for i, label in enumerate(YNN_LABELS)}


def normalize_ynn(value: str) -> str:
    """Parse a yes/no/none label case-insensitively."""
    label = value.strip().lower()
    if label not in YNN_INDEX:
        raise ValueError(f"invalid yes/no/none label: {value!r}")
    return label


@dataclass(frozen=True)
class AnswerLabel:
    """Gold supervision for one window.

    start_positions/end_positions are window-local token indices; there can
    be several of each. Empty sets are only meaningful together with
    yn="none" (the window holds no answer).
    """

    start_positions: frozenset[int]
    end_positions: frozenset[int]
    yn: str

    def __post_init__(self) -> None:
        if self.yn not in YNN_INDEX:
            raise ValueError(f"invalid yes/no/none label: {self.yn!r}")
        if (self.start_positions or self.end_positions) and not (
            self.start_positions and self.end_positions
        ):
            raise ValueError("start and end position sets must be empty together")
        if not self.start_positions and self.yn != "none":
            raise ValueError("an empty label must carry yn='none'")
        if self.end_positions:
            lo = min(self.start_positions)
            if any(end < lo for end in self.end_positions):
                raise ValueError("every end position needs a start at or before it")

    @classmethod
    def empty(cls) -> "AnswerLabel":
        return cls(frozenset(), frozenset(), "none")

    @classmethod
    def span(cls, start: int, end: int, yn: str = "none") -> "AnswerLabel":
        if start > end:
            raise ValueError(f"span start {start} after end {end}")
        return cls(frozenset({start}), frozenset({end}), yn)

    def validate_for_length(self, window_len: int) -> None:
        for pos in self.start_positions | self.end_positions:
            if not 0 <= pos < window_len:
                raise ValueError(
                    f"label position {pos} outside window of {window_len} tokens"
                )
