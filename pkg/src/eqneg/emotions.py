"""Emotion alphabet, bounded histories, the emotion payoff game and WSLS selection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class Emotion(str, Enum):
    JOY = "joy"
    SADNESS = "sadness"
    ANGER = "anger"
    FEAR = "fear"
    SURPRISE = "surprise"
    DISGUST = "disgust"
    NEUTRAL = "neutral"

    @classmethod
    def parse(cls, value: str | Emotion) -> Emotion:
        if isinstance(value, Emotion):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown emotion label: {value!r}") from None

    @property
    def index(self) -> int:
        return EMOTIONS.index(self)

    def __str__(self) -> str:
        return self.value


# Canonical matrix order; matches the row/column order of the published tables.
EMOTIONS: tuple[Emotion, ...] = tuple(Emotion)
N_EMOTIONS = len(EMOTIONS)


class Valence(str, Enum):
    NEGATIVE = "negative"
    NON_NEGATIVE = "non_negative"


NEGATIVE_EMOTIONS = frozenset({Emotion.SADNESS, Emotion.ANGER, Emotion.FEAR, Emotion.DISGUST})


def valence(e: Emotion) -> Valence:
    return Valence.NEGATIVE if e in NEGATIVE_EMOTIONS else Valence.NON_NEGATIVE


def is_negative(e: Emotion) -> bool:
    return e in NEGATIVE_EMOTIONS


class HistoryOrderError(ValueError):
    """Raised when a history push does not advance the turn index."""


@dataclass(frozen=True)
class EmotionHistory:
    """Sliding window of (turn, emotion) entries, oldest first."""

    window: int = 5
    entries: tuple[tuple[int, Emotion], ...] = ()

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("history window must be >= 1")
        if len(self.entries) > self.window:
            raise ValueError("history longer than its window")
        turns = [t for t, _ in self.entries]
        if any(b <= a for a, b in zip(turns, turns[1:])):
            raise HistoryOrderError("turn indices must be strictly increasing")

    def push(self, turn: int, emotion: Emotion) -> EmotionHistory:
        return push_emotion(self, turn, emotion)

    @property
    def emotions(self) -> list[Emotion]:
        return [e for _, e in self.entries]

    @property
    def last_turn(self) -> int | None:
        return self.entries[-1][0] if self.entries else None

    def __len__(self) -> int:
        return len(self.entries)


def push_emotion(h: EmotionHistory, t: int, e: Emotion) -> EmotionHistory:
    if t < 0:
        raise HistoryOrderError(f"turn index must be >= 0, got {t}")
    if h.entries and t <= h.entries[-1][0]:
        raise HistoryOrderError(f"turn {t} does not follow turn {h.entries[-1][0]}")
    entries = h.entries + ((t, Emotion.parse(e)),)
    if len(entries) > h.window:
        entries = entries[-h.window:]
    return EmotionHistory(window=h.window, entries=entries)


# Client emotion (row) x agent emotion (column) -> (client payoff, agent payoff).
_DEFAULT_PAYOFF_ROWS = {
    Emotion.JOY:      [(4, 4), (2, 3), (1, 2), (2, 1), (3, 3), (2, 2), (3, 3)],
    Emotion.SADNESS:  [(3, 2), (3, 3), (1, 2), (2, 1), (2, 2), (1, 1), (2, 3)],
    Emotion.ANGER:    [(2, 1), (2, 1), (1, 1), (1, 0), (1, 2), (0, 1), (1, 2)],
    Emotion.FEAR:     [(1, 2), (1, 2), (0, 1), (2, 2), (1, 2), (0, 1), (2, 3)],
    Emotion.SURPRISE: [(3, 3), (2, 2), (2, 1), (2, 1), (4, 4), (1, 2), (3, 3)],
    Emotion.DISGUST:  [(2, 2), (1, 1), (1, 0), (1, 0), (2, 1), (2, 2), (2, 2)],
    Emotion.NEUTRAL:  [(3, 3), (2, 3), (2, 1), (3, 2), (3, 3), (2, 2), (3, 3)],
}


@dataclass(frozen=True, eq=False)
class PayoffMatrix:
    """7x7 grid of (client payoff, agent payoff) pairs.

    ``cells[d, e]`` holds the pair for client emotion ``d`` and agent emotion ``e``,
    both indexed in :data:`EMOTIONS` order.
    """

    cells: np.ndarray

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=float)
        if cells.shape != (N_EMOTIONS, N_EMOTIONS, 2):
            raise ValueError(f"payoff cells must have shape (7, 7, 2), got {cells.shape}")
        if not np.all(np.isfinite(cells)):
            raise ValueError("payoff cells must be finite")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def default(cls) -> PayoffMatrix:
        return cls(np.array([_DEFAULT_PAYOFF_ROWS[d] for d in EMOTIONS], dtype=float))

    @classmethod
    def zeros(cls) -> PayoffMatrix:
        return cls(np.zeros((N_EMOTIONS, N_EMOTIONS, 2)))

    def payoff(self, d: Emotion, e: Emotion) -> tuple[float, float]:
        p1, p2 = self.cells[d.index, e.index]
        return float(p1), float(p2)

    def agent_payoff(self, d: Emotion, e: Emotion) -> float:
        return float(self.cells[d.index, e.index, 1])

    @property
    def agent(self) -> np.ndarray:
        """Agent payoffs as a (client, agent) matrix."""
        return self.cells[:, :, 1]

    def to_dict(self) -> dict:
        rows = {}
        for d in EMOTIONS:
            rows[d.value] = {e.value: [_num(v) for v in self.cells[d.index, e.index]] for e in EMOTIONS}
        return {"rows": rows}

    @classmethod
    def from_dict(cls, doc: Mapping) -> PayoffMatrix:
        rows = doc.get("rows")
        if not isinstance(rows, Mapping):
            raise ValueError("payoff document needs a 'rows' object")
        cells = np.full((N_EMOTIONS, N_EMOTIONS, 2), np.nan)
        for d_label, row in rows.items():
            d = Emotion.parse(d_label)
            for e_label, pair in row.items():
                e = Emotion.parse(e_label)
                if len(pair) != 2:
                    raise ValueError(f"payoff cell ({d}, {e}) must be a pair")
                cells[d.index, e.index] = pair
        if np.isnan(cells).any():
            missing = [(d.value, e.value) for d in EMOTIONS for e in EMOTIONS
                       if np.isnan(cells[d.index, e.index]).any()]
            raise ValueError(f"payoff matrix incomplete, missing cells: {missing[:5]}")
        return cls(cells)

    @classmethod
    def load(cls, path: str | Path) -> PayoffMatrix:
        return cls.from_dict(json.loads(Path(path).read_text()))


def payoff(m: PayoffMatrix, d: Emotion, e: Emotion) -> tuple[float, float]:
    return m.payoff(d, e)


DEFAULT_TIE_BREAK: tuple[Emotion, ...] = (
    Emotion.NEUTRAL,
    Emotion.JOY,
    Emotion.SURPRISE,
    Emotion.SADNESS,
    Emotion.FEAR,
    Emotion.DISGUST,
    Emotion.ANGER,
)


@dataclass(frozen=True)
class WslsConfig:
    payoff_threshold: float = 2
    tie_break_order: tuple[Emotion, ...] = field(default=DEFAULT_TIE_BREAK)

    def __post_init__(self) -> None:
        order = tuple(Emotion.parse(e) for e in self.tie_break_order)
        if sorted(order, key=lambda e: e.index) != list(EMOTIONS):
            raise ValueError("tie_break_order must be a permutation of all 7 emotions")
        object.__setattr__(self, "tie_break_order", order)


# Scores closer than this are treated as tied.
SCORE_ATOL = 1e-12


def rank_emotions(
    scores: Mapping[Emotion, float],
    order: Sequence[Emotion] = DEFAULT_TIE_BREAK,
    atol: float = SCORE_ATOL,
) -> list[Emotion]:
    """Order emotions by descending score, ties resolved by ``order``.

    Ranking is done greedily: take the best remaining score, and among the
    candidates within ``atol`` of it pick the one earliest in ``order``.
    """
    remaining = [e for e in order if e in scores]
    ranked = []
    while remaining:
        top = max(scores[e] for e in remaining)
        pick = next(e for e in remaining if scores[e] >= top - atol)
        ranked.append(pick)
        remaining.remove(pick)
    return ranked


def wsls_scores(current_d: Emotion, m: PayoffMatrix) -> dict[Emotion, float]:
    return {e: m.agent_payoff(current_d, e) for e in EMOTIONS}


def wsls_select(
    current_d: Emotion,
    prev: tuple[Emotion, Emotion] | None,
    cfg: WslsConfig,
    m: PayoffMatrix,
) -> Emotion:
    """Win-Stay, Lose-Shift choice of the agent's next emotion.

    ``prev`` is (previous client emotion, agent emotion played against it).
    When that exchange paid the agent less than the threshold, the
    second-ranked emotion of the current row is returned instead of the best.
    """
    return wsls_decide(current_d, prev, cfg, m)[0]


def wsls_decide(
    current_d: Emotion,
    prev: tuple[Emotion, Emotion] | None,
    cfg: WslsConfig,
    m: PayoffMatrix,
) -> tuple[Emotion, bool, dict[Emotion, float]]:
    """Like :func:`wsls_select` but also reports whether the lose-shift fired."""
    scores = wsls_scores(current_d, m)
    ranked = rank_emotions(scores, cfg.tie_break_order)
    shifted = prev is not None and m.agent_payoff(*prev) < cfg.payoff_threshold
    return (ranked[1] if shifted else ranked[0]), shifted, scores


def count_negative(emotions: Iterable[Emotion]) -> int:
    return sum(1 for e in emotions if is_negative(e))


def _num(v: float) -> int | float:
    return int(v) if float(v).is_integer() else float(v)
