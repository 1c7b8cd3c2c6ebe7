from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

from ..emotions import Emotion
from ..scenarios import Scenario
from ..transcript import DialogueTurn
from .messages import AgentMessage


@dataclass
class AgentContext:
    """Everything a backend may look at when producing its next message."""

    role: str
    turn: int
    scenario: Scenario
    history: Sequence[DialogueTurn] = field(default_factory=list)
    last_creditor_offer: int | None = None
    last_debtor_offer: int | None = None
    debtor_message: AgentMessage | None = None
    emotion: Emotion | None = None
    mode: str | None = None
    seed: int | None = None


class AgentBackend(Protocol):
    def generate(self, ctx: AgentContext) -> str:
        """Return the raw message text, including the structured suffix."""
        ...
