"""Hidden strategic-mode HMM over observed (debtor, creditor) emotion exchanges.

The hidden chain runs over creditor strategic modes. Each turn emits a pair
``(D, C)`` with the factored probability

    P(D, C | S) = affinity[S, C] * contagion[C, D]

and the chain moves with a transition table selected by the valence of the
debtor emotion observed on the turn being left. All inference uses per-step
normalisation (scaled forward/backward) rather than log-space arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .emotions import EMOTIONS, N_EMOTIONS, Emotion, Valence, valence

ROW_ATOL = 1e-9


class StrategicMode(str, Enum):
    COOPERATIVE = "cooperative"
    CONFRONTATIONAL = "confrontational"
    DISTRESSED = "distressed"
    STRATEGIC = "strategic"

    def __str__(self) -> str:
        return self.value


MODES: tuple[StrategicMode, ...] = tuple(StrategicMode)
MODE_LABELS: tuple[str, ...] = tuple(m.value for m in MODES)

# First axis of HmmParams.mode_transition.
VALENCE_INDEX = {Valence.NON_NEGATIVE: 0, Valence.NEGATIVE: 1}
VALENCE_KEYS = ("non_negative", "negative")


class DegenerateEvidenceError(ValueError):
    """Belief update produced zero total mass."""


class ImpossibleObservationError(ValueError):
    """Observation sequence has zero likelihood under the parameters."""


@dataclass(frozen=True)
class ObservationPair:
    debtor: Emotion
    creditor: Emotion

    def __post_init__(self) -> None:
        object.__setattr__(self, "debtor", Emotion.parse(self.debtor))
        object.__setattr__(self, "creditor", Emotion.parse(self.creditor))

    @classmethod
    def of(cls, debtor: str | Emotion, creditor: str | Emotion) -> ObservationPair:
        return cls(Emotion.parse(debtor), Emotion.parse(creditor))


def _stochastic(a: np.ndarray, name: str) -> np.ndarray:
    a = np.array(a, dtype=float)
    if not np.all(np.isfinite(a)) or (a < 0).any():
        raise ValueError(f"{name} must be finite and nonnegative")
    sums = a.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=ROW_ATOL):
        raise ValueError(f"{name} rows must sum to 1 (got {np.round(sums, 12).tolist()})")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BeliefState:
    probs: np.ndarray
    modes: tuple[str, ...] = MODE_LABELS

    def __post_init__(self) -> None:
        probs = _stochastic(self.probs, "belief")
        if probs.shape != (len(self.modes),):
            raise ValueError("belief length does not match mode labels")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "modes", tuple(self.modes))

    @classmethod
    def from_serialized(cls, doc: Mapping[str, float], atol: float = 1e-6) -> BeliefState:
        """Load a belief written with rounded floats, keeping its digits as stored."""
        probs = np.array([float(v) for v in doc.values()])
        if abs(probs.sum() - 1.0) > atol:
            raise ValueError(f"serialized belief sums to {probs.sum()}")
        b = cls.uniform(tuple(doc.keys()))
        if (probs < 0).any():
            raise ValueError("belief must be nonnegative")
        probs.setflags(write=False)
        object.__setattr__(b, "probs", probs)
        return b

    @classmethod
    def uniform(cls, modes: Sequence[str] = MODE_LABELS) -> BeliefState:
        return cls(np.full(len(modes), 1.0 / len(modes)), tuple(modes))

    def as_dict(self) -> dict[str, float]:
        return {m: float(p) for m, p in zip(self.modes, self.probs)}

    def argmax(self) -> str:
        return self.modes[int(np.argmax(self.probs))]

    def __getitem__(self, mode: str | StrategicMode) -> float:
        return float(self.probs[self.modes.index(str(mode))])


@dataclass(frozen=True, eq=False)
class HmmParams:
    """Parameter set of the strategic-mode HMM.

    Arrays use :data:`EMOTIONS` order on emotion axes and ``modes`` order on
    mode axes. ``mode_transition[v, i, j]`` is P(next=j | current=i) when the
    debtor emotion on the departing turn has valence index ``v``.
    ``contagion[c, d]`` is P(debtor=d | creditor=c). The emotion-to-emotion
    ``policy_transition_prior`` never enters inference; the policy reports it
    as a diagnostic.
    """

    initial: np.ndarray
    mode_transition: np.ndarray
    mode_emotion_affinity: np.ndarray
    contagion: np.ndarray
    policy_transition_prior: np.ndarray
    mixing: float = 0.7
    modes: tuple[str, ...] = MODE_LABELS

    def __post_init__(self) -> None:
        k = len(self.modes)
        object.__setattr__(self, "modes", tuple(str(m) for m in self.modes))
        checks = {
            "initial": (k,),
            "mode_transition": (2, k, k),
            "mode_emotion_affinity": (k, N_EMOTIONS),
            "contagion": (N_EMOTIONS, N_EMOTIONS),
            "policy_transition_prior": (N_EMOTIONS, N_EMOTIONS),
        }
        for name, shape in checks.items():
            arr = _stochastic(getattr(self, name), name)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if not 0.0 <= self.mixing <= 1.0:
            raise ValueError("mixing must lie in [0, 1]")
        object.__setattr__(self, "mixing", float(self.mixing))

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @classmethod
    def default(cls) -> HmmParams:
        return cls(
            initial=np.full(len(MODES), 1.0 / len(MODES)),
            mode_transition=np.array([_DEFAULT_TRANSITION_NON_NEGATIVE, _DEFAULT_TRANSITION_NEGATIVE]),
            mode_emotion_affinity=_default_affinity(),
            contagion=_row_normalised(CONTAGION_TABLE),
            policy_transition_prior=_row_normalised(POLICY_TRANSITION_TABLE),
            mixing=0.7,
        )

    def replace(self, **changes) -> HmmParams:
        values = {
            "initial": self.initial,
            "mode_transition": self.mode_transition,
            "mode_emotion_affinity": self.mode_emotion_affinity,
            "contagion": self.contagion,
            "policy_transition_prior": self.policy_transition_prior,
            "mixing": self.mixing,
            "modes": self.modes,
        }
        values.update(changes)
        return HmmParams(**values)

    def transition_for(self, debtor: Emotion) -> np.ndarray:
        return self.mode_transition[VALENCE_INDEX[valence(debtor)]]

    def emission(self, obs: ObservationPair) -> np.ndarray:
        """P(D, C | S) for every mode S."""
        c, d = obs.creditor.index, obs.debtor.index
        return self.mode_emotion_affinity[:, c] * self.contagion[c, d]

    def emission_table(self) -> np.ndarray:
        """Full (modes, debtor, creditor) emission array."""
        return self.mode_emotion_affinity[:, None, :] * self.contagion.T[None, :, :]

    def debtor_projection(self) -> np.ndarray:
        """Per-mode distribution over debtor emotions: affinity pushed through contagion."""
        proj = self.mode_emotion_affinity @ self.contagion
        return proj / proj.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        emo = [e.value for e in EMOTIONS]

        def table(a: np.ndarray, rows: Sequence[str], cols: Sequence[str]) -> dict:
            return {r: {c: float(a[i, j]) for j, c in enumerate(cols)} for i, r in enumerate(rows)}

        return {
            "modes": list(self.modes),
            "emotions": emo,
            "initial": {m: float(p) for m, p in zip(self.modes, self.initial)},
            "mode_transition": {
                key: table(self.mode_transition[i], self.modes, self.modes)
                for i, key in enumerate(VALENCE_KEYS)
            },
            "mode_emotion_affinity": table(self.mode_emotion_affinity, self.modes, emo),
            "contagion": table(self.contagion, emo, emo),
            "policy_transition_prior": table(self.policy_transition_prior, emo, emo),
            "mixing": self.mixing,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> HmmParams:
        modes = tuple(doc.get("modes") or MODE_LABELS)
        emo = [e.value for e in EMOTIONS]

        def table(t: Mapping, rows: Sequence[str], cols: Sequence[str], name: str) -> np.ndarray:
            try:
                return np.array([[float(t[r][c]) for c in cols] for r in rows])
            except KeyError as exc:
                raise ValueError(f"{name}: missing label {exc.args[0]!r}") from None

        def emotion_keyed(t: Mapping) -> Mapping:
            return {Emotion.parse(r).value: {Emotion.parse(c).value: v for c, v in row.items()}
                    for r, row in t.items()}

        return cls(
            initial=np.array([float(doc["initial"][m]) for m in modes]),
            mode_transition=np.array([
                table(doc["mode_transition"][key], modes, modes, f"mode_transition.{key}")
                for key in VALENCE_KEYS
            ]),
            mode_emotion_affinity=table(
                {m: {Emotion.parse(c).value: v for c, v in row.items()}
                 for m, row in doc["mode_emotion_affinity"].items()},
                modes, emo, "mode_emotion_affinity"),
            contagion=table(emotion_keyed(doc["contagion"]), emo, emo, "contagion"),
            policy_transition_prior=table(
                emotion_keyed(doc["policy_transition_prior"]), emo, emo, "policy_transition_prior"),
            mixing=float(doc.get("mixing", 0.7)),
            modes=modes,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> HmmParams:
        return cls.from_dict(json.loads(Path(path).read_text()))


# Agent emotion -> next agent emotion, as published (not row-normalised).
POLICY_TRANSITION_TABLE = (
    (0.50, 0.10, 0.05, 0.05, 0.20, 0.05, 0.05),
    (0.20, 0.40, 0.10, 0.10, 0.05, 0.10, 0.05),
    (0.10, 0.20, 0.40, 0.10, 0.05, 0.10, 0.05),
    (0.10, 0.20, 0.10, 0.40, 0.05, 0.10, 0.05),
    (0.30, 0.05, 0.05, 0.05, 0.50, 0.05, 0.05),
    (0.10, 0.20, 0.10, 0.10, 0.05, 0.40, 0.05),
    (0.20, 0.10, 0.05, 0.05, 0.20, 0.05, 0.35),
)

# Agent emotion -> client emotion, as published (not row-normalised).
CONTAGION_TABLE = (
    (0.60, 0.05, 0.05, 0.05, 0.10, 0.05, 0.10),
    (0.05, 0.50, 0.20, 0.10, 0.05, 0.05, 0.05),
    (0.05, 0.20, 0.50, 0.10, 0.05, 0.05, 0.05),
    (0.05, 0.20, 0.10, 0.50, 0.05, 0.05, 0.05),
    (0.10, 0.05, 0.05, 0.05, 0.60, 0.05, 0.10),
    (0.05, 0.10, 0.20, 0.10, 0.05, 0.50, 0.05),
    (0.10, 0.10, 0.10, 0.10, 0.10, 0.10, 0.40),
)



def _row_normalised(table) -> np.ndarray:
    # The published tables each carry one row summing to 1.05 (surprise in
    # the transition table, disgust in the contagion table); rescale those,
    # the other rows pass through unchanged.
    table = np.array(table, dtype=float)
    return table / table.sum(axis=1, keepdims=True)


# Rows/cols: cooperative, confrontational, distressed, strategic.
_DEFAULT_TRANSITION_NON_NEGATIVE = (
    (0.50, 0.15, 0.15, 0.20),
    (0.30, 0.50, 0.10, 0.10),
    (0.30, 0.10, 0.50, 0.10),
    (0.30, 0.10, 0.10, 0.50),
)
_DEFAULT_TRANSITION_NEGATIVE = (
    (0.50, 0.20, 0.20, 0.10),
    (0.10, 0.50, 0.25, 0.15),
    (0.10, 0.25, 0.50, 0.15),
    (0.10, 0.20, 0.20, 0.50),
)

_AFFINITY_PEAKS = {
    StrategicMode.COOPERATIVE: (Emotion.JOY, Emotion.NEUTRAL),
    StrategicMode.CONFRONTATIONAL: (Emotion.ANGER, Emotion.DISGUST),
    StrategicMode.DISTRESSED: (Emotion.SADNESS, Emotion.FEAR),
    StrategicMode.STRATEGIC: (Emotion.NEUTRAL, Emotion.SURPRISE),
}


def _default_affinity() -> np.ndarray:
    rows = []
    for mode in MODES:
        first, second = _AFFINITY_PEAKS[mode]
        row = np.full(N_EMOTIONS, 0.40 / (N_EMOTIONS - 2))
        row[first.index] = 0.35
        row[second.index] = 0.25
        rows.append(row)
    return np.array(rows)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


def belief_update(
    b: BeliefState,
    p: HmmParams,
    prev_obs: ObservationPair | None,
    obs: ObservationPair,
) -> BeliefState:
    """One Bayesian filtering step.

    The prior is propagated through the transition table picked by the
    valence of ``prev_obs.debtor``; on the first turn (no ``prev_obs``) the
    prior is only reweighted by the evidence. The unnormalised joint is
    divided by its own sum.
    """
    prior = b.probs if prev_obs is None else b.probs @ p.transition_for(prev_obs.debtor)
    unnorm = p.emission(obs) * prior
    total = unnorm.sum()
    if not total > 0.0:
        raise DegenerateEvidenceError(f"observation {obs} has zero mass under the current belief")
    return BeliefState(unnorm / total, p.modes)


def predict_next_mode(b: BeliefState, p: HmmParams, obs: ObservationPair) -> np.ndarray:
    out = b.probs @ p.transition_for(obs.debtor)
    return out / out.sum()


def emission_matrix(p: HmmParams, obs_seq: Sequence[ObservationPair]) -> np.ndarray:
    return np.array([p.emission(o) for o in obs_seq])


def transition_stack(p: HmmParams, obs_seq: Sequence[ObservationPair]) -> np.ndarray:
    """Transition matrix between each consecutive pair of turns, shape (T-1, K, K)."""
    k = p.n_modes
    if len(obs_seq) < 2:
        return np.zeros((0, k, k))
    return np.array([p.transition_for(o.debtor) for o in obs_seq[:-1]])


@dataclass
class ForwardBackward:
    filtered: np.ndarray   # (T, K) scaled alphas, each row P(S_t | o_1..o_t)
    backward: np.ndarray   # (T, K) scaled betas
    scales: np.ndarray     # (T,) per-step normalisers
    posteriors: np.ndarray  # (T, K)

    @property
    def log_likelihood(self) -> float:
        return float(np.log(self.scales).sum())

    def pair_posteriors(self, trans: np.ndarray, emis: np.ndarray) -> np.ndarray:
        """xi[t, i, j] = P(S_t=i, S_{t+1}=j | O), shape (T-1, K, K)."""
        if len(self.scales) < 2:
            return np.zeros((0,) + trans.shape[1:])
        xi = (
            self.filtered[:-1, :, None]
            * trans
            * (emis[1:] * self.backward[1:])[:, None, :]
            / self.scales[1:, None, None]
        )
        return xi


def forward(initial: np.ndarray, trans: np.ndarray, emis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled forward pass; returns (filtered marginals, per-step normalisers)."""
    t_len, k = emis.shape
    alpha = np.empty((t_len, k))
    scales = np.empty(t_len)
    a = initial * emis[0]
    for t in range(t_len):
        if t > 0:
            a = (alpha[t - 1] @ trans[t - 1]) * emis[t]
        c = a.sum()
        if not c > 0.0:
            raise ImpossibleObservationError(f"observation at step {t} has zero likelihood")
        scales[t] = c
        alpha[t] = a / c
    return alpha, scales


def backward(trans: np.ndarray, emis: np.ndarray, scales: np.ndarray) -> np.ndarray:
    t_len, k = emis.shape
    beta = np.ones((t_len, k))
    for t in range(t_len - 2, -1, -1):
        beta[t] = trans[t] @ (emis[t + 1] * beta[t + 1]) / scales[t + 1]
    return beta


def forward_backward(initial: np.ndarray, trans: np.ndarray, emis: np.ndarray) -> ForwardBackward:
    emis = np.asarray(emis, dtype=float)
    if emis.ndim != 2 or emis.shape[0] == 0:
        raise ValueError("observation sequence must be non-empty")
    alpha, scales = forward(initial, trans, emis)
    beta = backward(trans, emis, scales)
    post = alpha * beta
    post /= post.sum(axis=1, keepdims=True)
    return ForwardBackward(alpha, beta, scales, post)


def _check_seq(obs_seq: Sequence[ObservationPair]) -> None:
    if len(obs_seq) == 0:
        raise ValueError("observation sequence must be non-empty")


def run_forward_backward(p: HmmParams, obs_seq: Sequence[ObservationPair]) -> ForwardBackward:
    _check_seq(obs_seq)
    return forward_backward(p.initial, transition_stack(p, obs_seq), emission_matrix(p, obs_seq))


def posterior_marginals(p: HmmParams, obs_seq: Sequence[ObservationPair]) -> list[np.ndarray]:
    """Smoothed P(S_t | whole sequence) for every turn."""
    return list(run_forward_backward(p, obs_seq).posteriors)


def filtered_marginals(p: HmmParams, obs_seq: Sequence[ObservationPair]) -> list[np.ndarray]:
    """Forward-only P(S_t | o_1..o_t) for every turn."""
    _check_seq(obs_seq)
    alpha, _ = forward(p.initial, transition_stack(p, obs_seq), emission_matrix(p, obs_seq))
    return list(alpha)


def sequence_log_likelihood(p: HmmParams, obs_seq: Sequence[ObservationPair]) -> float:
    _check_seq(obs_seq)
    _, scales = forward(p.initial, transition_stack(p, obs_seq), emission_matrix(p, obs_seq))
    return float(np.log(scales).sum())


def corpus_log_likelihood(p: HmmParams, sequences: Iterable[Sequence[ObservationPair]]) -> float:
    return sum(sequence_log_likelihood(p, s) for s in sequences)


# ---------------------------------------------------------------------------
# Learning
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    params: HmmParams
    log_likelihoods: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _normalise_rows(counts: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    sums = counts.sum(axis=-1, keepdims=True)
    safe = np.where(sums > 0, sums, 1.0)
    return np.where(sums > 0, counts / safe, fallback)


def baum_welch(
    sequences: Sequence[Sequence[ObservationPair]],
    init: HmmParams,
    max_iters: int = 100,
    tol: float = 1e-6,
    smoothing: float = 0.01,
    fit_contagion: bool = False,
) -> FitResult:
    """Expectation-maximisation over initial, mode transitions and mode affinity.

    ``log_likelihoods[k]`` is the corpus log-likelihood of the parameters after
    ``k`` M-steps. Iteration stops once an M-step improves the corpus
    log-likelihood by less than ``tol`` or ``max_iters`` M-steps have run.
    Contagion only depends on observed pairs, so when ``fit_contagion`` is set
    its update is the smoothed empirical conditional frequency.
    """
    sequences = [list(s) for s in sequences if len(s) > 0]
    if not sequences:
        raise ValueError("baum_welch needs at least one non-empty sequence")
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    k = init.n_modes
    params = init
    if fit_contagion:
        counts = np.full((N_EMOTIONS, N_EMOTIONS), float(smoothing))
        for seq in sequences:
            for o in seq:
                counts[o.creditor.index, o.debtor.index] += 1.0
        params = params.replace(contagion=_normalise_rows(counts, params.contagion))

    lls: list[float] = []
    converged = False
    steps = 0
    while True:
        init_counts = np.zeros(k)
        trans_counts = np.zeros((2, k, k))
        aff_counts = np.zeros((k, N_EMOTIONS))
        ll = 0.0
        for seq in sequences:
            trans = transition_stack(params, seq)
            emis = emission_matrix(params, seq)
            fb = forward_backward(params.initial, trans, emis)
            ll += fb.log_likelihood
            init_counts += fb.posteriors[0]
            xi = fb.pair_posteriors(trans, emis)
            for t in range(len(seq) - 1):
                trans_counts[VALENCE_INDEX[valence(seq[t].debtor)]] += xi[t]
            for t, o in enumerate(seq):
                aff_counts[:, o.creditor.index] += fb.posteriors[t]
        lls.append(ll)
        if steps > 0 and not (lls[-1] - lls[-2] >= tol):
            converged = True
            break
        if steps >= max_iters:
            break
        params = params.replace(
            initial=_normalise_rows(init_counts + smoothing, params.initial),
            mode_transition=_normalise_rows(trans_counts + smoothing, params.mode_transition),
            mode_emotion_affinity=_normalise_rows(aff_counts + smoothing, params.mode_emotion_affinity),
        )
        steps += 1
    return FitResult(params=params, log_likelihoods=lls, iterations=steps, converged=converged)


def baum_welch_fit(
    sequences: Sequence[Sequence[ObservationPair]],
    init: HmmParams,
    max_iters: int = 100,
    tol: float = 1e-6,
    smoothing: float = 0.01,
    fit_contagion: bool = False,
) -> HmmParams:
    return baum_welch(sequences, init, max_iters, tol, smoothing, fit_contagion).params


def sample_sequences(
    p: HmmParams,
    n_sequences: int,
    length: int,
    rng: np.random.Generator,
) -> list[list[ObservationPair]]:
    """Draw observation sequences from the generative process of ``p``."""
    out = []
    for _ in range(n_sequences):
        seq = []
        s = rng.choice(p.n_modes, p=p.initial)
        for _t in range(length):
            c = EMOTIONS[rng.choice(N_EMOTIONS, p=p.mode_emotion_affinity[s])]
            d = EMOTIONS[rng.choice(N_EMOTIONS, p=p.contagion[c.index])]
            seq.append(ObservationPair(d, c))
            s = rng.choice(p.n_modes, p=p.transition_for(d)[s])
        out.append(seq)
    return out


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())

