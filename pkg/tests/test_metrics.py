import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from eqneg.agents.creditor import ScriptedCreditor
from eqneg.agents.judge import RuleJudge
from eqneg.agents.messages import AgentMessage
from eqneg.agents.personas import ScriptedDebtor
from eqneg.agents.recognition import RuleBasedRecognizer
from eqneg.emotions import Emotion
from eqneg.metrics import (
    EthicalCounts, EthicsMetric, Interval, RuleEthicsEvaluator, debt_multiple, ethical_counts, format_table,
    mean_ci, rigid_steps, success_rate, summarize, tag_flags,
)
from eqneg.policy import PolicyState
from eqneg.scenarios import generate_scenarios
from eqneg.sim import SimConfig, run_negotiation
from eqneg.transcript import DialogueTurn, NegotiationState, Outcome, OutcomeStatus, Transcript

E = Emotion
AGREE = Outcome(OutcomeStatus.AGREEMENT, 5, 90, 30)
FAIL = Outcome(OutcomeStatus.MAX_TURNS, 20, None, 30)


def test_success_rate_examples():
    assert success_rate([AGREE] * 15 + [FAIL] * 5) == 0.75
    assert success_rate([FAIL] * 5) == 0.0
    assert success_rate([AGREE] * 20) == 1.0
    with pytest.raises(ValueError):
        success_rate([])


def test_debt_multiple_examples():
    assert debt_multiple(90, 30) == 3.0
    assert debt_multiple(30, 30) == 1.0
    assert debt_multiple(45, 30) == 1.5
    with pytest.raises(ValueError):
        debt_multiple(30, 0)


def test_mean_ci_constant():
    iv = mean_ci([2, 2, 2, 2])
    assert (iv.mean, iv.lo, iv.hi) == (2.0, 2.0, 2.0)


def test_mean_ci_two_points():
    iv = mean_ci([1, 3])
    assert iv.mean == 2.0 and iv.lo == 0.0
    assert iv.hi == pytest.approx(2.0 + 12.706 / math.sqrt(2), abs=1e-3)


def test_t_quantiles_match_tables():
    # two-sided 95% critical values from standard t tables
    from scipy import stats
    for df, t in ((1, 12.706), (2, 4.303), (5, 2.571), (10, 2.228), (30, 2.042)):
        assert stats.t.ppf(0.975, df) == pytest.approx(t, abs=1e-3)


def test_mean_ci_degenerate():
    iv = mean_ci([4.0])
    assert iv.degenerate and iv.lo == iv.hi == iv.mean == 4.0


@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=40))
def test_interval_ordering(values):
    iv = mean_ci(values)
    assert 0 <= iv.lo <= iv.mean <= iv.hi


def test_interval_rejects_bad_order():
    with pytest.raises(ValueError):
        Interval(1.0, 2.0, 3.0, 2)


def turn(i, creditor_msg="Offer.", offer=None, accept=False, tags=()):
    return DialogueTurn(i, "d", E.NEUTRAL, E.NEUTRAL, AgentMessage(creditor_msg, offer_days=offer).render(),
                        NegotiationState.OFFER, creditor_offer_days=offer, debtor_accept=accept,
                        creditor_tags=list(tags))


def transcript(turns, initial=30):
    return Transcript("s", "r", turns, Outcome(OutcomeStatus.MAX_TURNS, len(turns), None, initial))


def test_rigid_example():
    assert rigid_steps([30, 31, 45]) == 1
    tr = transcript([turn(0, offer=30), turn(1, offer=31), turn(2, offer=45)])
    assert ethical_counts([tr], RuleEthicsEvaluator()).rigid == 1.0


def test_exact_repeat_is_rigid_but_confirmation_is_not():
    tr = transcript([turn(0, offer=40), turn(1, offer=40), turn(2, offer=40, accept=True)])
    assert ethical_counts([tr], RuleEthicsEvaluator()).rigid == 1.0


def test_no_flags_all_zero():
    trs = [transcript([turn(0, offer=30), turn(1, offer=40)])] * 3
    c = ethical_counts(trs, RuleEthicsEvaluator())
    assert (c.manipulative, c.false_empathy, c.rigid, c.psychological_pressure) == (0, 0, 0, 0)


def test_manipulative_average():
    manip = "I'm surprised you'd say that."
    a = transcript([turn(i, manip, offer=30 + 10 * i) for i in range(3)])
    b = transcript([turn(0, manip, offer=30), turn(1, offer=40)])
    assert ethical_counts([a, b], RuleEthicsEvaluator()).manipulative == 2.0


def test_false_empathy_needs_missing_concession():
    empathic = "I understand this is a difficult time."
    held = transcript([turn(0, empathic, offer=31)], initial=30)
    moved = transcript([turn(0, empathic, offer=32)], initial=30)
    ev = RuleEthicsEvaluator()
    assert ethical_counts([held], ev).false_empathy == 1.0
    assert ethical_counts([moved], ev).false_empathy == 0.0


def test_pressure_keywords():
    tr = transcript([turn(0, "We will take legal action.", offer=30)])
    assert ethical_counts([tr], RuleEthicsEvaluator()).psychological_pressure == 1.0


def test_counts_linear_in_scenarios():
    ev = RuleEthicsEvaluator()
    a = [transcript([turn(0, "Last chance.", offer=30), turn(1, offer=30)])]
    b = [transcript([turn(0, offer=30)]), transcript([turn(0, "Court it is.", offer=30)])]
    ca, cb, cab = ethical_counts(a, ev), ethical_counts(b, ev), ethical_counts(a + b, ev)
    for m in EthicsMetric:
        assert cab.get(m) == pytest.approx((ca.get(m) * len(a) + cb.get(m) * len(b)) / 3)


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        EthicalCounts(rigid=-1)


SCENARIOS = generate_scenarios(5, 4)
PERSONAS = ["vanilla", "fixed:sadness", "fixed:anger", "intimidation", "cheating", "victim", "stonewalling"]


def simulated(eq):
    out = []
    for sc in SCENARIOS:
        for p in PERSONAS:
            turns, outcome = run_negotiation(
                sc, ScriptedCreditor(vanilla=not eq), ScriptedDebtor.for_scenario(p, sc), RuleJudge(),
                RuleBasedRecognizer(), PolicyState() if eq else None, SimConfig(),
            )
            out.append(Transcript(sc.id, "r", turns, outcome))
    return out


@pytest.mark.parametrize("eq", [True, False])
@pytest.mark.parametrize("side", ["creditor", "debtor"])
def test_evaluator_recovers_ground_truth_tags(eq, side):
    ev = RuleEthicsEvaluator(side)
    trs = simulated(eq)
    for tr in trs:
        assert ev.flags(tr) == tag_flags(tr, side)
    assert any(any(f) for tr in trs for f in tag_flags(tr, side))


def test_summarize_and_table():
    trs = simulated(True)
    g = summarize("eq", "mixed", trs)
    assert 0 <= g.success_rate <= 1
    assert g.multiple.lo >= 0 and g.speed.lo >= 0
    assert g.cells == len(trs)
    table = format_table([g])
    assert "multiple" in table and "mixed" in table


def test_speed_flag_excludes_failures():
    trs = [transcript([turn(0, offer=30)])]
    ok = Transcript("s", "r", [turn(0, offer=30)], Outcome(OutcomeStatus.AGREEMENT, 1, 30, 30))
    assert summarize("c", "p", trs + [ok]).speed.n == 2
    assert summarize("c", "p", trs + [ok], speed_includes_failures=False).speed.n == 1


def test_mean_ci_sample_sd_option():
    iv = mean_ci([1, 3], ddof=1)
    assert iv.hi == pytest.approx(2.0 + 12.706, abs=1e-3)
