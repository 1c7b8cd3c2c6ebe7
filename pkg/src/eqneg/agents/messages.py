"""Machine-readable suffix carried by every agent message.

Agents append ``<<meta {...}>>`` to their text. The JSON object may hold
``offer_days`` (int), ``accept`` / ``breakdown`` (bool), a declared
``emotion`` and ground-truth ethics ``tags``. Everything before the suffix is
the human-readable utterance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..emotions import Emotion

META_RE = re.compile(r"\s*<<meta\s+(\{.*?\})\s*>>\s*$", re.DOTALL)


@dataclass
class AgentMessage:
    text: str
    offer_days: int | None = None
    accept: bool = False
    breakdown: bool = False
    emotion: Emotion | None = None
    tags: list[str] = field(default_factory=list)

    def render(self) -> str:
        meta: dict = {}
        if self.offer_days is not None:
            meta["offer_days"] = self.offer_days
        if self.accept:
            meta["accept"] = True
        if self.breakdown:
            meta["breakdown"] = True
        if self.emotion is not None:
            meta["emotion"] = self.emotion.value
        if self.tags:
            meta["tags"] = list(self.tags)
        return f"{self.text} <<meta {json.dumps(meta, sort_keys=True)}>>"


def parse_message(raw: str) -> AgentMessage:
    """Split a raw agent message into text and structured fields.

    A missing or malformed suffix yields a plain message with no structure.
    """
    match = META_RE.search(raw)
    if not match:
        return AgentMessage(text=raw.strip())
    text = raw[: match.start()].strip()
    try:
        meta = json.loads(match.group(1))
    except json.JSONDecodeError:
        return AgentMessage(text=text)
    offer = meta.get("offer_days")
    emotion = meta.get("emotion")
    try:
        emotion = Emotion.parse(emotion) if emotion else None
    except ValueError:
        emotion = None
    return AgentMessage(
        text=text,
        offer_days=int(offer) if isinstance(offer, (int, float)) and offer >= 0 else None,
        accept=bool(meta.get("accept", False)),
        breakdown=bool(meta.get("breakdown", False)),
        emotion=emotion,
        tags=[str(t) for t in meta.get("tags", [])],
    )
