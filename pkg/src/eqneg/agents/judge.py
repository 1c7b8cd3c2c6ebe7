"""Negotiation-state judges."""

from __future__ import annotations

from typing import Protocol, Sequence

from ..transcript import DialogueTurn, NegotiationState
from .llm import EndpointConfig, chat_complete
from .prompts import PromptId, render_prompt


class JudgeBackend(Protocol):
    def classify(self, tail: Sequence[DialogueTurn]) -> NegotiationState: ...


def latest_offers(tail: Sequence[DialogueTurn]) -> tuple[int | None, int | None]:
    """Most recent structured (debtor, creditor) offers in ``tail``."""
    debtor = creditor = None
    for turn in tail:
        if turn.debtor_offer_days is not None:
            debtor = turn.debtor_offer_days
        if turn.creditor_offer_days is not None:
            creditor = turn.creditor_offer_days
    return debtor, creditor


class RuleJudge:
    """Deterministic judge over the structured message fields.

    Accept needs the debtor's accept marker on the latest turn and equal
    latest offers from both sides.
    """

    def classify(self, tail: Sequence[DialogueTurn]) -> NegotiationState:
        if not tail:
            raise ValueError("judge needs at least one turn")
        last = tail[-1]
        if last.debtor_breakdown:
            return NegotiationState.BREAKDOWN
        debtor, creditor = latest_offers(tail)
        if last.debtor_accept and debtor is not None and debtor == creditor:
            return NegotiationState.ACCEPT
        if last.debtor_offer_days is not None:
            return NegotiationState.OFFER
        if last.creditor_offer_days is not None:
            return NegotiationState.PONDERING
        return NegotiationState.CHITCHAT


class LLMJudge:
    def __init__(self, endpoint: EndpointConfig, tail_turns: int = 3):
        self.endpoint = endpoint
        self.tail_turns = tail_turns

    def classify(self, tail: Sequence[DialogueTurn]) -> NegotiationState:
        lines = []
        for turn in tail[-self.tail_turns:]:
            lines.append(f"Debtor: {turn.debtor_msg}")
            lines.append(f"Creditor: {turn.creditor_msg}")
        prompt = render_prompt(PromptId.STATE_DETECTION, {"dialogue": "\n".join(lines)})
        label = chat_complete(self.endpoint, [{"role": "user", "content": prompt}], temperature=0.0, max_tokens=8)
        return NegotiationState.parse(label.strip().strip(".").split()[0])
