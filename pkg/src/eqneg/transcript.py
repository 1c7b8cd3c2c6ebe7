"""Dialogue records and the transcript JSONL format.

A transcript file holds one ``{"type": "turn", ...}`` object per dialogue
turn followed by a single ``{"type": "outcome", ...}`` line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .emotions import Emotion
from .policy import PolicyTrace

FLOAT_DIGITS = 9


class NegotiationState(str, Enum):
    OFFER = "offer"
    PONDERING = "pondering"
    ACCEPT = "accept"
    BREAKDOWN = "breakdown"
    CHITCHAT = "chit-chat"

    @property
    def terminal(self) -> bool:
        return self in (NegotiationState.ACCEPT, NegotiationState.BREAKDOWN)

    @classmethod
    def parse(cls, label: str) -> NegotiationState:
        key = label.strip().lower().replace("_", "-").replace(" ", "-")
        if key == "chitchat":
            key = "chit-chat"
        return cls(key)


class OutcomeStatus(str, Enum):
    AGREEMENT = "AgreementReached"
    BREAKDOWN = "Breakdown"
    MAX_TURNS = "MaxTurnsExceeded"


@dataclass
class DialogueTurn:
    index: int
    debtor_msg: str
    debtor_emotion: Emotion
    creditor_emotion: Emotion
    creditor_msg: str
    judge_phase: NegotiationState
    prior_creditor_emotion: Emotion = Emotion.NEUTRAL
    debtor_offer_days: int | None = None
    creditor_offer_days: int | None = None
    debtor_accept: bool = False
    debtor_breakdown: bool = False
    debtor_tags: list[str] = field(default_factory=list)
    creditor_tags: list[str] = field(default_factory=list)
    policy_trace: PolicyTrace | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "debtor_msg": self.debtor_msg,
            "debtor_emotion": self.debtor_emotion.value,
            "prior_creditor_emotion": self.prior_creditor_emotion.value,
            "creditor_emotion": self.creditor_emotion.value,
            "creditor_msg": self.creditor_msg,
            "debtor_offer_days": self.debtor_offer_days,
            "creditor_offer_days": self.creditor_offer_days,
            "debtor_accept": self.debtor_accept,
            "debtor_breakdown": self.debtor_breakdown,
            "judge_phase": self.judge_phase.value,
            "debtor_tags": list(self.debtor_tags),
            "creditor_tags": list(self.creditor_tags),
            "policy_trace": self.policy_trace.to_dict() if self.policy_trace else None,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> DialogueTurn:
        trace = doc.get("policy_trace")
        return cls(
            index=int(doc["index"]),
            debtor_msg=doc["debtor_msg"],
            debtor_emotion=Emotion.parse(doc["debtor_emotion"]),
            creditor_emotion=Emotion.parse(doc["creditor_emotion"]),
            creditor_msg=doc["creditor_msg"],
            judge_phase=NegotiationState.parse(doc["judge_phase"]),
            prior_creditor_emotion=Emotion.parse(doc.get("prior_creditor_emotion", "neutral")),
            debtor_offer_days=doc.get("debtor_offer_days"),
            creditor_offer_days=doc.get("creditor_offer_days"),
            debtor_accept=bool(doc.get("debtor_accept", False)),
            debtor_breakdown=bool(doc.get("debtor_breakdown", False)),
            debtor_tags=list(doc.get("debtor_tags", [])),
            creditor_tags=list(doc.get("creditor_tags", [])),
            policy_trace=PolicyTrace.from_dict(trace) if trace else None,
        )


@dataclass
class Outcome:
    status: OutcomeStatus
    rounds: int
    final_days: int | None = None
    initial_days: int | None = None

    def __post_init__(self) -> None:
        if (self.final_days is not None) != (self.status is OutcomeStatus.AGREEMENT):
            raise ValueError("final_days must be present exactly when an agreement was reached")

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "final_days": self.final_days,
            "rounds": self.rounds,
            "initial_days": self.initial_days,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> Outcome:
        return cls(
            status=OutcomeStatus(doc["status"]),
            rounds=int(doc["rounds"]),
            final_days=doc.get("final_days"),
            initial_days=doc.get("initial_days"),
        )


@dataclass
class Transcript:
    scenario_id: str
    run_id: str
    turns: list[DialogueTurn]
    outcome: Outcome


def round_floats(obj: Any, digits: int = FLOAT_DIGITS) -> Any:
    """Round every float to ``digits`` significant digits for stable output."""
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def dumps(obj: Any, **kwargs) -> str:
    return json.dumps(round_floats(obj), ensure_ascii=False, **kwargs)


def write_transcript(path: str | Path, transcript: Transcript) -> None:
    lines = []
    for turn in transcript.turns:
        row = {"type": "turn", "scenario_id": transcript.scenario_id, "run_id": transcript.run_id}
        row.update(turn.to_dict())
        lines.append(dumps(row))
    tail = {"type": "outcome", "scenario_id": transcript.scenario_id, "run_id": transcript.run_id}
    tail.update(transcript.outcome.to_dict())
    lines.append(dumps(tail))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_transcript(path: str | Path) -> Transcript:
    turns: list[DialogueTurn] = []
    outcome = None
    scenario_id = run_id = ""
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        doc = json.loads(line)
        scenario_id = doc.get("scenario_id", scenario_id)
        run_id = doc.get("run_id", run_id)
        kind = doc.get("type")
        if kind == "turn":
            turns.append(DialogueTurn.from_dict(doc))
        elif kind == "outcome":
            outcome = Outcome.from_dict(doc)
        else:
            raise ValueError(f"{path}:{n}: unknown record type {kind!r}")
    if outcome is None:
        raise ValueError(f"{path}: transcript has no outcome line")
    return Transcript(scenario_id, run_id, turns, outcome)


def read_transcripts(paths: Iterable[str | Path]) -> list[Transcript]:
    return [read_transcript(p) for p in paths]
