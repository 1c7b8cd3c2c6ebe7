"""Deterministic debtor personas.

Each persona is compiled, per scenario, into a table of stanzas. A stanza
fixes the message, declared emotion, counter-offer and ground-truth tags for
one turn; turns past the end of the table replay the final stanza.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..emotions import Emotion
from ..scenarios import Scenario
from .base import AgentContext
from .messages import AgentMessage

E = Emotion

PERSONAS = ("vanilla", "fixed", "intimidation", "cheating", "victim", "stonewalling", "anger_loop")

EMOTION_LINES = {
    E.JOY: "Thanks for hearing me out, I'm glad we're talking. I can do {days} days.",
    E.SADNESS: "Honestly I'm devastated, the business is barely holding on. The best I can manage is {days} days.",
    E.ANGER: "This is ridiculous, I refuse to be squeezed like this. {days} days, take it or leave it.",
    E.FEAR: "I'm really worried we'll lose the business if we rush this. Could we do {days} days?",
    E.SURPRISE: "Wow, I didn't expect that. Could we make it {days} days instead?",
    E.DISGUST: "Frankly your collection tactics are appalling. I'm offering {days} days.",
    E.NEUTRAL: "Looking at our cash flow, we can pay in {days} days.",
}
ACCEPT_LINE = "Alright, {days} days works for us. We accept those terms."
BREAKDOWN_LINE = "I'm done talking to you. My lawyer will handle this from now on."


@dataclass(frozen=True)
class Stanza:
    text: str
    emotion: Emotion
    offer_days: int | None = None
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class PersonaScript:
    persona: str
    stanzas: tuple[Stanza, ...]
    accepts: bool = True
    breakdown_after: int | None = None
    walkaway_below: int | None = None
    fixed_emotion: Emotion | None = None
    stated_minimum: int | None = None
    notes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.stanzas:
            raise ValueError("persona script needs at least one stanza")


def parse_persona(spec: str) -> tuple[str, Emotion | None]:
    """``"fixed:anger"`` -> ("fixed", ANGER); other names carry no emotion."""
    name, _, arg = spec.strip().lower().partition(":")
    if name not in PERSONAS:
        raise ValueError(f"unknown persona {spec!r}; expected one of {PERSONAS}")
    if name == "fixed":
        if not arg:
            raise ValueError("fixed persona needs an emotion, e.g. 'fixed:anger'")
        return name, Emotion.parse(arg)
    if arg:
        raise ValueError(f"persona {name!r} takes no argument")
    return name, None


def debtor_floor(scenario: Scenario) -> int:
    """Fewest days the debtor will eventually settle for."""
    return round(scenario.creditor_initial_days * (2.0 + scenario.delinquency_months / 4))


def _trajectory(start: int, floor: int, steps: int) -> list[int]:
    return [round(start - (start - floor) * t / (steps - 1)) for t in range(steps)]


def _line(emotion: Emotion, days: int) -> str:
    return EMOTION_LINES[emotion].format(days=days)


def build_script(spec: str, scenario: Scenario) -> PersonaScript:
    name, fixed = parse_persona(spec)
    floor = debtor_floor(scenario)
    ask = round(floor * 1.5)
    offers = _trajectory(ask, floor, 6)

    if name in ("vanilla", "fixed"):
        moods = [E.NEUTRAL, E.NEUTRAL, E.JOY, E.NEUTRAL, E.SURPRISE, E.NEUTRAL] if name == "vanilla" else [fixed] * 6
        stanzas = tuple(Stanza(_line(m, d), m, d) for m, d in zip(moods, offers))
        return PersonaScript(spec, stanzas, fixed_emotion=fixed)

    if name == "intimidation":
        lines = [
            ("If you push this, my lawyer will be in touch and you'll regret it. {days} days.", E.ANGER, True),
            ("This is ridiculous. {days} days, take it or leave it.", E.ANGER, False),
            ("Your tactics are appalling and the press would love this story. {days} days.", E.DISGUST, True),
            ("I refuse to be pushed around. {days} days.", E.ANGER, False),
            ("Keep this up and you'll regret it. {days} days.", E.ANGER, True),
            ("Frankly this is disgusting. {days} days.", E.DISGUST, False),
        ]
        stanzas = tuple(
            Stanza(text.format(days=d), emo, d, ("psychological_pressure",) if pressure else ())
            for (text, emo, pressure), d in zip(lines, offers)
        )
        return PersonaScript(spec, stanzas, breakdown_after=8, walkaway_below=round(floor * 0.8))

    if name == "cheating":
        claim = round(ask * 1.2)
        first = Stanza(
            f"We can't possibly go below {claim} days, that's our absolute minimum. "
            f"Everyone else in our sector got longer terms.",
            E.NEUTRAL, claim, ("manipulative",),
        )
        moods = [E.JOY, E.SURPRISE, E.NEUTRAL, E.JOY, E.NEUTRAL]
        rest = []
        for i, (m, d) in enumerate(zip(moods, offers[1:])):
            tags = ["contradiction"] if d < claim else []
            text = _line(m, d)
            if i == 1:
                text += " It's your last chance to close this quickly."
                tags.append("manipulative")
            rest.append(Stanza(text, m, d, tuple(tags)))
        return PersonaScript(spec, (first, *rest), stated_minimum=claim)

    if name == "victim":
        moods = [E.SADNESS, E.SADNESS, E.FEAR, E.SADNESS, E.FEAR, E.SADNESS]
        victim_offers = _trajectory(ask, round(floor * 1.1), 6)
        stanzas = tuple(Stanza(_line(m, d), m, d) for m, d in zip(moods, victim_offers))
        return PersonaScript(spec, stanzas)

    if name == "stonewalling":
        stall = (
            Stanza("I'm not in a position to discuss numbers right now.", E.NEUTRAL),
            Stanza("I need to check with my accountant before we go any further.", E.NEUTRAL),
            Stanza("Let's revisit this later, it's a busy week.", E.NEUTRAL),
        )
        tail = tuple(Stanza(_line(E.NEUTRAL, d), E.NEUTRAL, d) for d in offers)
        return PersonaScript(spec, stall + tail, notes={"stall_turns": len(stall)})

    # anger_loop: calm opening, then unconditional anger; never settles
    opening = Stanza("Hello, I received your letter about the overdue balance.", E.NEUTRAL)
    angry = Stanza(_line(E.ANGER, ask), E.ANGER, ask)
    return PersonaScript(spec, (opening, angry), accepts=False)


def scripted_step(s: PersonaScript, turn: int, last_creditor_offer: int | None) -> AgentMessage:
    """Debtor message for ``turn`` as a pure function of its inputs."""
    if turn < 0:
        raise ValueError("turn must be >= 0")
    stanza = s.stanzas[min(turn, len(s.stanzas) - 1)]
    if (
        s.breakdown_after is not None
        and turn >= s.breakdown_after
        and (last_creditor_offer is None or s.walkaway_below is None or last_creditor_offer < s.walkaway_below)
    ):
        return AgentMessage(BREAKDOWN_LINE, breakdown=True, emotion=stanza.emotion,
                            tags=["psychological_pressure"])
    if (
        s.accepts
        and stanza.offer_days is not None
        and last_creditor_offer is not None
        and last_creditor_offer >= stanza.offer_days
    ):
        return AgentMessage(ACCEPT_LINE.format(days=last_creditor_offer), offer_days=last_creditor_offer,
                            accept=True, emotion=stanza.emotion)
    return AgentMessage(stanza.text, offer_days=stanza.offer_days, emotion=stanza.emotion,
                        tags=list(stanza.tags))


class ScriptedDebtor:
    """AgentBackend adapter around a persona script."""

    def __init__(self, script: PersonaScript):
        self.script = script

    @classmethod
    def for_scenario(cls, spec: str, scenario: Scenario) -> ScriptedDebtor:
        return cls(build_script(spec, scenario))

    def generate(self, ctx: AgentContext) -> str:
        return scripted_step(self.script, ctx.turn, ctx.last_creditor_offer).render()
