"""Prompt templates shipped as text assets under ``prompts/``.

Templates use ``${slot}`` placeholders. Some slots select a block from
``blocks.json`` (e.g. ``mode`` picks the strategic-mode directive); the
selected block is itself rendered with the same slot map.
"""

from __future__ import annotations

import json
from enum import Enum
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Mapping

from ..emotions import Emotion


class PromptId(str, Enum):
    EMOTION_DETECTION = "emotion_detection"
    CREDITOR_NEGOTIATION = "creditor_negotiation"
    CREDITOR_STRATEGY_MODE = "creditor_strategy_mode"
    DEBTOR_PERSONA = "debtor_persona"
    STATE_DETECTION = "state_detection"
    EMOTION_CONFIG = "emotion_config"
    STRATEGY_IMPL = "strategy_impl"


class MissingSlotError(KeyError):
    def __init__(self, slot: str, template: str):
        super().__init__(slot)
        self.slot = slot
        self.template = template

    def __str__(self) -> str:
        return f"prompt {self.template!r} needs slot {self.slot!r}"


def _asset(name: str) -> str:
    return resources.files(__package__).joinpath("prompts").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def manifest() -> dict:
    return json.loads(_asset("manifest.json"))


@lru_cache(maxsize=None)
def blocks() -> dict:
    return json.loads(_asset("blocks.json"))


@lru_cache(maxsize=None)
def template_text(pid: PromptId) -> str:
    return _asset(manifest()["templates"][pid.value]["file"])


def placeholders(text: str) -> set[str]:
    names = set()
    for m in Template.pattern.finditer(text):
        name = m.group("named") or m.group("braced")
        if name:
            names.add(name)
    return names


def required_slots(pid: PromptId | str) -> set[str]:
    pid = PromptId(pid)
    spec = manifest()["templates"][pid.value]
    derived = set(spec.get("blocks", {}))
    needed = placeholders(template_text(pid)) - derived
    for block in spec.get("blocks", {}).values():
        needed.add(block["slot"])
    return needed


def _substitute(text: str, slots: Mapping[str, str], name: str) -> str:
    try:
        return Template(text).substitute(slots)
    except KeyError as exc:
        raise MissingSlotError(exc.args[0], name) from None


def render_prompt(pid: PromptId | str, slots: Mapping[str, object]) -> str:
    """Render a template; raises :class:`MissingSlotError` naming the first absent slot."""
    pid = PromptId(pid)
    spec = manifest()["templates"][pid.value]
    values = {k: str(v.value if isinstance(v, Enum) else v) for k, v in slots.items()}
    for target, block in spec.get("blocks", {}).items():
        key = block["slot"]
        if key not in values:
            raise MissingSlotError(key, pid.value)
        table = blocks()[block["table"]]
        choice = values[key].split(":", 1)[0]
        if choice not in table:
            raise ValueError(f"prompt {pid.value!r}: no {block['table']} block for {values[key]!r}")
        values[target] = _substitute(table[choice], values, pid.value)
    return _substitute(template_text(pid), values, pid.value)


def creditor_prompt(scenario_slots: Mapping[str, object], emotion: Emotion | None, mode: str | None) -> str:
    """System prompt for an LLM creditor.

    ``emotion`` is the policy-selected directive (``None`` for a vanilla
    creditor, which gets the neutral block); ``mode`` is added only when the
    HMM branch chose the emotion.
    """
    slots = dict(scenario_slots)
    slots["emotion"] = (emotion or Emotion.NEUTRAL).value
    slots["mode_section"] = (
        "\n" + render_prompt(PromptId.CREDITOR_STRATEGY_MODE, {"mode": mode}) if mode else ""
    )
    return render_prompt(PromptId.CREDITOR_NEGOTIATION, slots)
