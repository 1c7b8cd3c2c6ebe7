"""Acceptance checks, one test per criterion.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line (visible with
``pytest -s`` or in ``pytest -v`` output) and then asserts.
Run ``python -m tests.test_acceptance`` from the repo root for the summary alone.
"""

import contextlib
import io
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from eqneg.agents.creditor import ScriptedCreditor
from eqneg.agents.judge import RuleJudge
from eqneg.agents.llm import BackendError, EndpointConfig, LLMTimeoutError, chat_complete
from eqneg.agents.personas import ScriptedDebtor
from eqneg.agents.recognition import RuleBasedRecognizer
from eqneg.cli import main as cli_main
from eqneg.emotions import DEFAULT_TIE_BREAK, EMOTIONS, PayoffMatrix, WslsConfig, wsls_select
from eqneg.experiment import DEFAULT_PERSONAS, ExperimentConfig, run_experiment
from eqneg.hmm import (
    BeliefState, HmmParams, baum_welch, belief_update, filtered_marginals, posterior_marginals,
    sample_sequences, sequence_log_likelihood,
)
from eqneg.metrics import debt_multiple, mean_ci, rigid_steps, success_rate
from eqneg.policy import ActivationConfig, Branch, PolicyState, hmm_activated
from eqneg.scenarios import generate_scenarios
from eqneg.sim import SimConfig, run_negotiation
from eqneg.transcript import Outcome, OutcomeStatus

from .oracles import (
    best_permutation_tv, brute_argmax, brute_log_likelihood, enumerate_filtered, enumerate_paths,
    hmm_score_oracle, naive_activated, near_deterministic_generator, random_obs, random_params,
)
from .stub_server import stub_server

FIXTURE = Path(__file__).parent / "fixtures" / "reference_tables.json"
_capsys = None


@pytest.fixture(autouse=True)
def _grab_capsys(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


@contextlib.contextmanager
def criterion(n, title):
    """Print one pass/fail line for criterion ``n`` whatever happens inside."""
    start = time.perf_counter()
    detail = {}
    ok = False
    try:
        yield detail
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        note = detail.get("note", "")
        line = f"[{'PASS' if ok else 'FAIL'}] AC{n:<2} {title} ({elapsed:.2f}s){' ' + note if note else ''}"
        if _capsys is not None:
            with _capsys.disabled():
                print("\n" + line)
        else:
            print(line)


def within(elapsed_start, budget):
    took = time.perf_counter() - elapsed_start
    assert took < budget, f"took {took:.2f}s, budget {budget}s"


# 1


def test_ac1_wsls_matches_brute_argmax():
    with criterion(1, "WSLS equals brute argmax of the agent payoffs") as d:
        t0 = time.perf_counter()
        table = json.loads(FIXTURE.read_text())["payoff"]
        agent = [[float(cell.split(",")[1]) for cell in row] for row in table]
        m = PayoffMatrix.default()
        for di, debtor in enumerate(EMOTIONS):
            scores = {e: agent[di][ei] for ei, e in enumerate(EMOTIONS)}
            assert wsls_select(debtor, None, WslsConfig(), m) is brute_argmax(scores, DEFAULT_TIE_BREAK)
        within(t0, 1.0)
        d["note"] = "7/7 rows"


# 2


def test_ac2_forward_backward_matches_enumeration():
    with criterion(2, "forward-backward equals path enumeration") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            p = random_params(rng, int(rng.integers(1, 5)))
            obs = random_obs(rng, int(rng.integers(1, 7)), alphabet_size=6)
            total, post = enumerate_paths(p, obs)
            got = posterior_marginals(p, obs)
            for a, b in zip(got, post):
                worst = max(worst, float(np.abs(a - b).max()))
            worst = max(worst, abs(sequence_log_likelihood(p, obs) - brute_log_likelihood(p, obs)))
        assert worst <= 1e-9, worst
        within(t0, 10.0)
        d["note"] = f"200 instances, max err {worst:.1e}"


# 3


def test_ac3_belief_update_equals_filtering():
    with criterion(3, "stepwise belief update equals forward filtering") as d:
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(100):
            k = int(rng.integers(1, 5))
            p = random_params(rng, k).replace(initial=np.full(k, 1.0 / k))
            obs = random_obs(rng, int(rng.integers(1, 7)))
            b, prev = BeliefState.uniform(p.modes), None
            for o in obs:
                b = belief_update(b, p, prev, o)
                prev = o
            worst = max(worst, float(np.abs(b.probs - filtered_marginals(p, obs)[-1]).max()))
            worst = max(worst, float(np.abs(b.probs - enumerate_filtered(p, obs)[-1]).max()))
        assert worst <= 1e-9, worst
        d["note"] = f"100 instances, max err {worst:.1e}"


# 4


def test_ac4_em_monotone_and_recovers():
    with criterion(4, "Baum-Welch monotone and recovers generator") as d:
        t0 = time.perf_counter()
        rng = np.random.default_rng(4)
        for _ in range(50):
            k = int(rng.integers(1, 5))
            corpus = sample_sequences(random_params(rng, k), 6, 8, rng)
            fit = baum_welch(corpus, random_params(rng, k), max_iters=10, tol=-np.inf, smoothing=0.0)
            assert (np.diff(fit.log_likelihoods) >= -1e-12).all()
        tvs = []
        for _ in range(3):
            gen = near_deterministic_generator(rng)
            corpus = sample_sequences(gen, 50, 20, rng)
            init = random_params(rng, 2).replace(contagion=gen.contagion, modes=gen.modes)
            fit = baum_welch(corpus, init, max_iters=200, tol=1e-8)
            tvs.append(best_permutation_tv(fit.params.mode_emotion_affinity, gen.mode_emotion_affinity))
        assert max(tvs) < 0.1, tvs
        within(t0, 60.0)
        d["note"] = f"50 corpora monotone, recovery TV max {max(tvs):.3f}"


# 5


def test_ac5_activation_exhaustive():
    with criterion(5, "activation rule agrees with naive counter") as d:
        t0 = time.perf_counter()
        cfg = ActivationConfig(k=4, n=5)
        count = 0
        for window in itertools.product(EMOTIONS, repeat=5):
            assert hmm_activated(list(window), cfg) == naive_activated(window, 4, 5)
            count += 1
        assert count == 7 ** 5
        within(t0, 5.0)
        d["note"] = f"{count} windows"


# 6


def test_ac6_default_tables_match_fixture():
    with criterion(6, "dump-defaults matches transcribed tables") as d:
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            assert cli_main(["dump-defaults"]) == 0
        doc = json.loads(out.getvalue())
        fx = json.loads(FIXTURE.read_text())
        names = [e.value for e in EMOTIONS]
        cells = 0
        for key, fkey in (("policy_transition", "transition"), ("contagion", "emission")):
            for i, row in enumerate(names):
                for j, col in enumerate(names):
                    assert doc[key][row][col] == pytest.approx(fx[fkey][i][j], abs=1e-12), (key, row, col)
                    cells += 1
        for i, row in enumerate(names):
            for j, col in enumerate(names):
                want = [int(x) for x in fx["payoff"][i][j].split(",")]
                assert list(doc["payoff"][row][col]) == want, (row, col)
                cells += 1
        assert cells == 147
        d["note"] = f"{cells} cells"


# 7


def _run_once(out_dir):
    cfg = ExperimentConfig(
        seed=7, scenario_count=10, personas=list(DEFAULT_PERSONAS), creditors=["vanilla", "eq"],
        output_dir=str(out_dir), workers=4,
    )
    return run_experiment(cfg)


def test_ac7_deterministic_replay(tmp_path):
    with criterion(7, "end-to-end replay is byte-identical") as d:
        t0 = time.perf_counter()
        report = _run_once(tmp_path / "a")
        _run_once(tmp_path / "b")
        a, b = tmp_path / "a", tmp_path / "b"
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert len([f for f in files if f.suffix == ".jsonl"]) == 10 * len(DEFAULT_PERSONAS) * 2
        for f in files:
            assert (a / f).read_bytes() == (b / f).read_bytes(), f
        assert report.failed_cells == 0
        doc = json.loads((a / "report.json").read_text())
        for g in doc["groups"]:
            assert 0.0 <= g["success_rate"] <= 1.0
            for key in ("multiple", "speed"):
                if g[key] is not None:
                    assert 0.0 <= g[key]["lo"] <= g[key]["mean"] <= g[key]["hi"]
            assert g["speed"] is not None
            assert set(g["ethics"]) >= {"manipulative", "false_empathy", "rigid", "psychological_pressure"}
        assert any(g["multiple"] is not None for g in doc["groups"])
        within(t0, 30.0)
        d["note"] = f"{len(files)} files"


# 8


def test_ac8_anger_loop_branches():
    with criterion(8, "anger loop: WSLS turns 0-3, HMM after, chosen is argmax") as d:
        scenario = generate_scenarios(0, 1)[0]
        state = PolicyState()
        turns, _ = run_negotiation(
            scenario, ScriptedCreditor(), ScriptedDebtor.for_scenario("anger_loop", scenario),
            RuleJudge(), RuleBasedRecognizer(), state, SimConfig(),
        )
        assert len(turns) > 5
        branches = [t.policy_trace.branch for t in turns]
        assert branches[:4] == [Branch.WSLS] * 4
        assert all(b is Branch.HMM for b in branches[4:])
        params, payoff = HmmParams.default(), PayoffMatrix.default()
        for t in turns:
            tr = t.policy_trace
            if tr.branch is Branch.HMM:
                oracle = hmm_score_oracle(tr.belief_after.probs, params, t.debtor_emotion,
                                          t.prior_creditor_emotion, payoff.agent)
            else:
                oracle = {e: payoff.agent_payoff(t.debtor_emotion, e) for e in EMOTIONS}
            assert max(abs(oracle[e] - tr.scores[e]) for e in EMOTIONS) < 1e-9
            assert tr.chosen is brute_argmax(oracle, DEFAULT_TIE_BREAK)
            assert t.creditor_emotion is tr.chosen
        d["note"] = f"{len(turns)} turns"


# 9


def test_ac9_metric_hand_values():
    with criterion(9, "metric hand values") as d:
        agree = Outcome(OutcomeStatus.AGREEMENT, 3, 90, 30)
        fail = Outcome(OutcomeStatus.MAX_TURNS, 20, None, 30)
        assert debt_multiple(90, 30) == 3.0
        assert success_rate([agree] * 15 + [fail] * 5) == 0.75
        iv = mean_ci([1, 3])
        assert iv.lo == 0.0
        assert math.isclose(iv.hi, 10.985, abs_tol=1e-3), iv.hi
        assert rigid_steps([30, 31, 45]) == 1
        d["note"] = f"ci hi {iv.hi:.3f}"


# 10

MSGS = [{"role": "user", "content": "hi"}]


def _endpoint(url, **kw):
    return EndpointConfig(base_url=url, model="stub", **kw)


def test_ac10_transport_retry():
    with criterion(10, "transport retries then fails after the cap") as d:
        sleeps = []
        with stub_server([(500, "")]) as (url, state):
            with pytest.raises(BackendError):
                chat_complete(_endpoint(url, max_retries=2, backoff=0.1), MSGS, sleep=sleeps.append)
        assert len(state.requests) == 3 and sleeps == [0.1, 0.2]
        with stub_server([(503, ""), (200, "ok")]) as (url, state):
            assert chat_complete(_endpoint(url, max_retries=2, backoff=0.0), MSGS) == "ok"
        d["note"] = "retry"


def test_ac10_transport_timeout():
    with criterion(10, "transport raises a typed timeout") as d:
        with stub_server([("sleep", 1.0)]) as (url, _):
            with pytest.raises(LLMTimeoutError):
                chat_complete(_endpoint(url, timeout=0.2, max_retries=0, backoff=0.0), MSGS)
        d["note"] = "timeout"


def test_ac10_transport_redaction(monkeypatch, caplog, tmp_path):
    with criterion(10, "transport redacts the API key") as d:
        secret = "sk-acceptance-secret"
        monkeypatch.setenv("EQNEG_API_KEY", secret)
        capture = tmp_path / "cap.jsonl"
        caplog.set_level("DEBUG", logger="eqneg.agents.llm")
        with stub_server([(200, f"echo {secret}")]) as (url, state):
            chat_complete(_endpoint(url, capture_path=str(capture), backoff=0.0), MSGS)
        assert state.requests[0]["headers"]["Authorization"] == f"Bearer {secret}"
        assert secret not in caplog.text and secret not in capture.read_text()
        d["note"] = "redaction"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
