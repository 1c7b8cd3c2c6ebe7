"""Turn loop between debtor, emotion policy, creditor and judge."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .agents.base import AgentBackend, AgentContext
from .agents.judge import JudgeBackend, latest_offers
from .agents.llm import BackendError
from .agents.messages import parse_message
from .agents.recognition import EmotionRecognizer, recognize_emotion
from .emotions import Emotion
from .policy import ActivationConfig, PolicyState, select_creditor_emotion
from .scenarios import Scenario
from .transcript import DialogueTurn, NegotiationState, Outcome, OutcomeStatus

log = logging.getLogger(__name__)


class InconsistentJudgeError(RuntimeError):
    """Judge reported Accept but the turn has no agreed offer."""


@dataclass(frozen=True)
class SimConfig:
    T_max: int = 20
    activation: ActivationConfig = field(default_factory=ActivationConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.T_max < 1:
            raise ValueError("T_max must be >= 1")


def detect_state(tail: Sequence[DialogueTurn], judge: JudgeBackend) -> NegotiationState:
    """Judge the latest phase; a failing judge never ends the negotiation."""
    if not tail:
        raise ValueError("detect_state needs at least one turn")
    try:
        return judge.classify(tail)
    except Exception as exc:  # noqa: BLE001 - any judge failure is non-terminal
        log.warning("judge failed (%s); treating turn %d as pondering", exc, tail[-1].index)
        return NegotiationState.PONDERING


def check_termination(
    phase: NegotiationState,
    turn: int,
    cfg: SimConfig,
    agreed_days: int | None = None,
    initial_days: int | None = None,
) -> Outcome | None:
    rounds = turn + 1
    if phase is NegotiationState.ACCEPT:
        if agreed_days is None:
            raise InconsistentJudgeError(f"accept on turn {turn} without an agreed offer")
        return Outcome(OutcomeStatus.AGREEMENT, rounds, agreed_days, initial_days)
    if phase is NegotiationState.BREAKDOWN:
        return Outcome(OutcomeStatus.BREAKDOWN, rounds, None, initial_days)
    if turn >= cfg.T_max - 1:
        return Outcome(OutcomeStatus.MAX_TURNS, rounds, None, initial_days)
    return None


def _context_lines(turns: Sequence[DialogueTurn]) -> list[str]:
    lines = []
    for t in turns:
        lines.append(f"Debtor: {parse_message(t.debtor_msg).text}")
        lines.append(f"Creditor: {parse_message(t.creditor_msg).text}")
    return lines


def _generate(backend: AgentBackend, ctx: AgentContext) -> str:
    raw = backend.generate(ctx)
    if not raw or not raw.strip():
        raise BackendError(f"{ctx.role} backend returned an empty message on turn {ctx.turn}")
    return raw


def run_negotiation(
    scenario: Scenario,
    creditor: AgentBackend,
    debtor: AgentBackend,
    judge: JudgeBackend,
    recognizer: EmotionRecognizer,
    policy_state: PolicyState | None,
    cfg: SimConfig,
) -> tuple[list[DialogueTurn], Outcome]:
    """Run one negotiation.

    ``policy_state=None`` gives the vanilla creditor: no emotion directive,
    and the creditor's emotion is whatever the recognizer reads off its reply.
    The creditor's opening proposal (``scenario.creditor_initial_days``)
    precedes turn 0.
    """
    turns: list[DialogueTurn] = []
    c_t = Emotion.NEUTRAL
    creditor_offer: int = scenario.creditor_initial_days
    debtor_offer: int | None = None

    for t in range(cfg.T_max):
        base = dict(turn=t, scenario=scenario, history=list(turns), seed=cfg.seed)
        raw_d = _generate(debtor, AgentContext(
            role="debtor", last_creditor_offer=creditor_offer, last_debtor_offer=debtor_offer, **base,
        ))
        dmsg = parse_message(raw_d)
        d_t = recognize_emotion(recognizer, raw_d, _context_lines(turns))

        trace = None
        directive = None
        if policy_state is not None:
            policy_state.debtor_history = policy_state.debtor_history.push(t, d_t)
            directive, trace = select_creditor_emotion(policy_state, d_t, c_t)
            policy_state.creditor_history = policy_state.creditor_history.push(t, directive)

        raw_c = _generate(creditor, AgentContext(
            role="creditor", last_creditor_offer=creditor_offer,
            last_debtor_offer=dmsg.offer_days if dmsg.offer_days is not None else debtor_offer,
            debtor_message=dmsg, emotion=directive,
            mode=trace.mode_directive if trace is not None else None, **base,
        ))
        cmsg = parse_message(raw_c)
        if directive is None:
            context = _context_lines(turns) + [f"Debtor: {dmsg.text}"]
            c_next = recognize_emotion(recognizer, cmsg.text, context)
        else:
            c_next = directive

        turn = DialogueTurn(
            index=t,
            debtor_msg=raw_d,
            debtor_emotion=d_t,
            creditor_emotion=c_next,
            creditor_msg=raw_c,
            judge_phase=NegotiationState.PONDERING,
            prior_creditor_emotion=c_t,
            debtor_offer_days=dmsg.offer_days,
            creditor_offer_days=cmsg.offer_days,
            debtor_accept=dmsg.accept,
            debtor_breakdown=dmsg.breakdown,
            debtor_tags=list(dmsg.tags),
            creditor_tags=list(cmsg.tags),
            policy_trace=trace,
        )
        turns.append(turn)
        turn.judge_phase = detect_state(turns, judge)

        agreed = None
        if turn.judge_phase is NegotiationState.ACCEPT:
            d_last, c_last = latest_offers(turns)
            agreed = d_last if d_last is not None and d_last == c_last else None
        outcome = check_termination(turn.judge_phase, t, cfg, agreed, scenario.creditor_initial_days)

        if dmsg.offer_days is not None:
            debtor_offer = dmsg.offer_days
        if cmsg.offer_days is not None:
            creditor_offer = cmsg.offer_days
        c_t = c_next
        if outcome is not None:
            return turns, outcome
    raise AssertionError("unreachable: T_max bound always terminates")
