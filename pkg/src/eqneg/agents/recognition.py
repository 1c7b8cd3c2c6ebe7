"""Debtor emotion recognition."""

from __future__ import annotations

import logging
import re
from typing import Protocol, Sequence

from ..emotions import Emotion
from .llm import EndpointConfig, chat_complete
from .messages import parse_message
from .prompts import PromptId, render_prompt

log = logging.getLogger(__name__)


class EmotionRecognizer(Protocol):
    def recognize(self, utterance: str, context: Sequence[str]) -> Emotion | str: ...


# Checked in this order; resistance and defensiveness land on anger first.
DEFAULT_LEXICON: dict[Emotion, tuple[str, ...]] = {
    Emotion.ANGER: (
        "refuse", "can't make me", "cannot make me", "won't pay", "not paying", "not my problem",
        "ridiculous", "unacceptable", "outrageous", "how dare", "lawyer", "regret", "pushed around",
        "threaten", "furious", "sue",
    ),
    Emotion.DISGUST: ("disgusting", "appalling", "sick of", "shameful", "revolting", "predatory"),
    Emotion.FEAR: ("afraid", "scared", "worried", "terrified", "panic", "lose the business", "frightened"),
    Emotion.SADNESS: (
        "sad", "devastated", "heartbroken", "hopeless", "struggling", "lost everything",
        "can't cope", "miserable", "grieving",
    ),
    Emotion.SURPRISE: ("surprised", "unexpected", "didn't expect", "did not expect", "wow", "shocked"),
    Emotion.JOY: ("great", "happy", "glad", "thank", "wonderful", "appreciate", "relieved", "delighted"),
}


class RuleBasedRecognizer:
    """Keyword lexicon classifier; Neutral when nothing matches."""

    def __init__(self, lexicon: dict[Emotion, tuple[str, ...]] | None = None):
        self.lexicon = lexicon or DEFAULT_LEXICON
        self._patterns = [
            (emotion, re.compile(r"\b(?:" + "|".join(re.escape(k) for k in keys) + r")", re.IGNORECASE))
            for emotion, keys in self.lexicon.items()
        ]

    def recognize(self, utterance: str, context: Sequence[str] = ()) -> Emotion:
        for emotion, pattern in self._patterns:
            if pattern.search(utterance):
                return emotion
        return Emotion.NEUTRAL


class LLMRecognizer:
    def __init__(self, endpoint: EndpointConfig, context_turns: int = 4):
        self.endpoint = endpoint
        self.context_turns = context_turns

    def recognize(self, utterance: str, context: Sequence[str] = ()) -> str:
        prompt = render_prompt(PromptId.EMOTION_DETECTION, {
            "context": "\n".join(context[-self.context_turns:]) or "(start of conversation)",
            "utterance": utterance,
        })
        return chat_complete(self.endpoint, [{"role": "user", "content": prompt}], temperature=0.0, max_tokens=8)


def coerce_emotion(label: Emotion | str) -> Emotion:
    if isinstance(label, Emotion):
        return label
    cleaned = re.sub(r"[^a-z]", "", str(label).strip().lower())
    try:
        return Emotion.parse(cleaned)
    except ValueError:
        log.warning("recognizer returned out-of-alphabet label %r; using neutral", label)
        return Emotion.NEUTRAL


def recognize_emotion(r: EmotionRecognizer, utterance: str, context: Sequence[str] = ()) -> Emotion:
    """Recognise the emotion of a raw agent message.

    A declared emotion in the message suffix (scripted agents) wins; the
    recognizer only sees the text part.
    """
    if not utterance or not utterance.strip():
        raise ValueError("utterance must be non-empty")
    msg = parse_message(utterance)
    if msg.emotion is not None:
        return msg.emotion
    return coerce_emotion(r.recognize(msg.text, list(context)))
