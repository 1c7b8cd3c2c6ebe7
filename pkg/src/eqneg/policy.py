"""Creditor emotion policy: WSLS by default, expected-utility HMM policy once
the debtor's recent emotions turn persistently negative."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .emotions import (
    EMOTIONS,
    Emotion,
    EmotionHistory,
    PayoffMatrix,
    WslsConfig,
    count_negative,
    rank_emotions,
    wsls_decide,
)
from .hmm import (
    BeliefState,
    DegenerateEvidenceError,
    HmmParams,
    ObservationPair,
    belief_update,
    predict_next_mode,
)


class Branch(str, Enum):
    WSLS = "WSLS"
    HMM = "HMM"


@dataclass(frozen=True)
class ActivationConfig:
    k: int = 4
    n: int = 5

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("activation k must be >= 1")
        if self.n < self.k:
            raise ValueError("activation window n must be >= k")


@dataclass
class PolicyTrace:
    """Audit record of one policy decision.

    ``rule`` is ``"argmax"`` when ``chosen`` is the top-ranked score and
    ``"lose_shift"`` when WSLS moved to the second-ranked emotion.
    """

    branch: Branch
    scores: dict[Emotion, float]
    chosen: Emotion
    rule: str = "argmax"
    belief_before: BeliefState | None = None
    belief_after: BeliefState | None = None
    predicted_modes: dict[str, float] | None = None
    mode_directive: str | None = None
    persistence_prior: dict[Emotion, float] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "branch": self.branch.value,
            "rule": self.rule,
            "chosen": self.chosen.value,
            "scores": {e.value: v for e, v in self.scores.items()},
            "belief_before": self.belief_before.as_dict() if self.belief_before else None,
            "belief_after": self.belief_after.as_dict() if self.belief_after else None,
            "predicted_modes": self.predicted_modes,
            "mode_directive": self.mode_directive,
            "persistence_prior": (
                {e.value: v for e, v in self.persistence_prior.items()}
                if self.persistence_prior else None
            ),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> PolicyTrace:
        def belief(d):
            if d is None:
                return None
            return BeliefState.from_serialized(d)

        prior = doc.get("persistence_prior")
        return cls(
            branch=Branch(doc["branch"]),
            scores={Emotion.parse(k): float(v) for k, v in doc["scores"].items()},
            chosen=Emotion.parse(doc["chosen"]),
            rule=doc.get("rule", "argmax"),
            belief_before=belief(doc.get("belief_before")),
            belief_after=belief(doc.get("belief_after")),
            predicted_modes=doc.get("predicted_modes"),
            mode_directive=doc.get("mode_directive"),
            persistence_prior={Emotion.parse(k): float(v) for k, v in prior.items()} if prior else None,
        )


def hmm_activated(h: EmotionHistory | list[Emotion], cfg: ActivationConfig) -> bool:
    emotions = h.emotions if isinstance(h, EmotionHistory) else list(h)
    return count_negative(emotions[-cfg.n:]) >= cfg.k


def hmm_scores(
    b: BeliefState,
    p: HmmParams,
    d: Emotion,
    c: Emotion,
    m: PayoffMatrix,
) -> tuple[dict[Emotion, float], np.ndarray]:
    """Expected creditor payoff of each candidate emotion.

    The next-mode prediction weights, per mode, a debtor-response model that
    mixes direct contagion from the candidate emotion (weight ``p.mixing``)
    with the mode's own projected debtor distribution. The payoff of each
    predicted debtor reply against the candidate is read from the matrix.
    """
    pred = predict_next_mode(b, p, ObservationPair(d, c))
    proj = p.debtor_projection()                         # (K, 7) over debtor emotions
    contagion = p.contagion                               # (7 creditor, 7 debtor)
    # reply[e, s, d'] = P(d' | s, e)
    reply = p.mixing * contagion[:, None, :] + (1.0 - p.mixing) * proj[None, :, :]
    utility = m.agent.T                                   # utility[e, d'] = pi_2(d', e)
    per_mode = np.einsum("esd,ed->es", reply, utility)
    values = per_mode @ pred
    return {e: float(values[e.index]) for e in EMOTIONS}, pred


def hmm_select(
    b: BeliefState,
    p: HmmParams,
    d: Emotion,
    c: Emotion,
    m: PayoffMatrix,
    wsls: WslsConfig | None = None,
) -> tuple[Emotion, PolicyTrace]:
    order = (wsls or WslsConfig()).tie_break_order
    scores, pred = hmm_scores(b, p, d, c, m)
    chosen = rank_emotions(scores, order)[0]
    predicted = {mode: float(v) for mode, v in zip(p.modes, pred)}
    trace = PolicyTrace(
        branch=Branch.HMM,
        scores=scores,
        chosen=chosen,
        belief_after=b,
        predicted_modes=predicted,
        mode_directive=p.modes[int(np.argmax(pred))],
    )
    return chosen, trace


@dataclass
class PolicyState:
    """Per-negotiation mutable state of the creditor policy."""

    params: HmmParams = field(default_factory=HmmParams.default)
    payoff: PayoffMatrix = field(default_factory=PayoffMatrix.default)
    activation: ActivationConfig = field(default_factory=ActivationConfig)
    wsls: WslsConfig = field(default_factory=WslsConfig)
    debtor_history: EmotionHistory | None = None
    creditor_history: EmotionHistory | None = None
    belief: BeliefState | None = None
    last_obs: ObservationPair | None = None
    prev_debtor: Emotion | None = None

    def __post_init__(self) -> None:
        if self.debtor_history is None:
            self.debtor_history = EmotionHistory(window=self.activation.n)
        if self.creditor_history is None:
            self.creditor_history = EmotionHistory(window=self.activation.n)
        if self.belief is None:
            self.belief = BeliefState(self.params.initial, self.params.modes)


def select_creditor_emotion(state: PolicyState, d_t: Emotion, c_t: Emotion) -> tuple[Emotion, PolicyTrace]:
    """Pick the creditor's next emotion given debtor emotion ``d_t`` and the
    creditor's current emotion ``c_t``.

    The debtor history must already include ``d_t``. The belief is filtered
    with ``(d_t, c_t)`` on every call so it is current when the HMM branch
    takes over. ``state.prev_debtor`` and ``state.last_obs`` are advanced;
    pushing the chosen emotion onto the creditor history is left to the caller.
    """
    obs = ObservationPair(d_t, c_t)
    before = state.belief
    try:
        after = belief_update(before, state.params, state.last_obs, obs)
    except DegenerateEvidenceError:
        after = BeliefState.uniform(state.params.modes)

    if hmm_activated(state.debtor_history, state.activation):
        chosen, trace = hmm_select(after, state.params, d_t, c_t, state.payoff, state.wsls)
    else:
        prev = (state.prev_debtor, c_t) if state.prev_debtor is not None else None
        chosen, shifted, scores = wsls_decide(d_t, prev, state.wsls, state.payoff)
        trace = PolicyTrace(
            branch=Branch.WSLS,
            scores=scores,
            chosen=chosen,
            rule="lose_shift" if shifted else "argmax",
        )
    trace.belief_before = before
    trace.belief_after = after
    trace.persistence_prior = {
        e: float(v) for e, v in zip(EMOTIONS, state.params.policy_transition_prior[c_t.index])
    }

    state.belief = after
    state.last_obs = obs
    state.prev_debtor = d_t
    return chosen, trace
