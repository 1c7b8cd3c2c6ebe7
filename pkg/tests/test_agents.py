import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqneg.agents.base import AgentContext
from eqneg.agents.creditor import LLMCreditor, ScriptedCreditor, next_offer
from eqneg.agents.judge import RuleJudge
from eqneg.agents.llm import BackendError, EndpointConfig
from eqneg.agents.messages import AgentMessage, parse_message
from eqneg.agents.personas import (
    PERSONAS, PersonaScript, build_script, debtor_floor, parse_persona, scripted_step,
)
from eqneg.agents.prompts import (
    MissingSlotError, PromptId, blocks, creditor_prompt, render_prompt, required_slots,
)
from eqneg.agents.recognition import RuleBasedRecognizer, coerce_emotion, recognize_emotion
from eqneg.emotions import EMOTIONS, Emotion
from eqneg.scenarios import generate_scenarios
from eqneg.transcript import DialogueTurn, NegotiationState

from .stub_server import stub_server

E = Emotion
SCENARIO = generate_scenarios(3, 1)[0]
PLACEHOLDER = re.compile(r"\$(?:\{\w+\}|[A-Za-z_])")


def complete_slots(pid, value="x"):
    slots = {s: value for s in required_slots(pid)}
    for key, table in (("emotion", "emotion_config"), ("mode", "strategy_modes"),
                       ("persona", "debtor_personas"), ("tactic", "strategy_tactics")):
        if key in slots:
            slots[key] = next(iter(blocks()[table]))
    return slots


# prompts

def test_strategy_mode_cooperative_block():
    text = render_prompt(PromptId.CREDITOR_STRATEGY_MODE, {"mode": "cooperative"})
    assert blocks()["strategy_modes"]["cooperative"] in text


def test_debtor_persona_stonewalling_block():
    slots = dict(SCENARIO.prompt_slots(), persona="stonewalling")
    text = render_prompt(PromptId.DEBTOR_PERSONA, slots)
    assert blocks()["debtor_personas"]["stonewalling"] in text


def test_fixed_persona_block_takes_emotion():
    slots = dict(SCENARIO.prompt_slots(), persona="fixed:anger", fixed_emotion="anger")
    text = render_prompt(PromptId.DEBTOR_PERSONA, slots)
    assert "anger" in text and not PLACEHOLDER.search(text)


def test_render_is_deterministic():
    slots = complete_slots(PromptId.EMOTION_DETECTION)
    assert render_prompt(PromptId.EMOTION_DETECTION, slots) == render_prompt(PromptId.EMOTION_DETECTION, slots)


def test_missing_slot_names_slot():
    with pytest.raises(MissingSlotError) as err:
        render_prompt(PromptId.STATE_DETECTION, {})
    assert err.value.slot == "dialogue"


def test_unknown_block_key_rejected():
    with pytest.raises((KeyError, ValueError)):
        render_prompt(PromptId.CREDITOR_STRATEGY_MODE, {"mode": "sneaky"})


@pytest.mark.parametrize("pid", list(PromptId))
@settings(max_examples=25, deadline=None)
@given(value=st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=30))
def test_no_unresolved_placeholders(pid, value):
    text = render_prompt(pid, complete_slots(pid, value))
    # slot values may contain "$", so only check the template skeleton
    skeleton = render_prompt(pid, complete_slots(pid, "v"))
    assert not PLACEHOLDER.search(skeleton)
    assert text


def test_creditor_prompt_mode_only_when_given():
    plain = creditor_prompt(SCENARIO.prompt_slots(), E.JOY, None)
    moded = creditor_prompt(SCENARIO.prompt_slots(), E.JOY, "strategic")
    assert blocks()["emotion_config"]["joy"] in plain
    assert blocks()["strategy_modes"]["strategic"] not in plain
    assert blocks()["strategy_modes"]["strategic"] in moded


# messages and recognition

def test_message_round_trip():
    msg = AgentMessage("We can do 60 days.", offer_days=60, emotion=E.FEAR, tags=["x"])
    assert parse_message(msg.render()) == msg


def test_plain_text_message():
    msg = parse_message("just words")
    assert msg.text == "just words" and msg.offer_days is None and msg.emotion is None


def test_declared_emotion_short_circuits():
    raw = AgentMessage("I refuse to pay", emotion=E.FEAR).render()
    assert recognize_emotion(RuleBasedRecognizer(), raw) is E.FEAR


def test_resistance_maps_to_anger():
    assert recognize_emotion(RuleBasedRecognizer(), "I refuse to pay and you can't make me") is E.ANGER


def test_no_hit_is_neutral():
    assert recognize_emotion(RuleBasedRecognizer(), "The invoice is attached.") is E.NEUTRAL


def test_empty_utterance_rejected():
    with pytest.raises(ValueError):
        recognize_emotion(RuleBasedRecognizer(), "  ")


def test_out_of_alphabet_coerced(caplog):
    assert coerce_emotion("contempt") is E.NEUTRAL
    assert "out-of-alphabet" in caplog.text
    assert coerce_emotion(" Anger.") is E.ANGER


@given(st.text(min_size=1).filter(str.strip))
def test_recognizer_total(text):
    assert recognize_emotion(RuleBasedRecognizer(), text) in EMOTIONS


def test_llm_recognizer_out_of_alphabet():
    from eqneg.agents.recognition import LLMRecognizer
    with stub_server([(200, "Bewilderment")]) as (url, _):
        r = LLMRecognizer(EndpointConfig(base_url=url, backoff=0))
        assert recognize_emotion(r, "hmm") is E.NEUTRAL


# personas

def test_parse_persona():
    assert parse_persona("fixed:anger") == ("fixed", E.ANGER)
    assert parse_persona("victim") == ("victim", None)
    for bad in ("fixed", "bogus", "victim:joy"):
        with pytest.raises(ValueError):
            parse_persona(bad)


@pytest.mark.parametrize("emotion", EMOTIONS)
def test_fixed_emotion_every_turn(emotion):
    s = build_script(f"fixed:{emotion.value}", SCENARIO)
    for turn in range(15):
        assert scripted_step(s, turn, SCENARIO.creditor_initial_days).emotion is emotion


def test_stonewalling_no_offers_while_stalling():
    s = build_script("stonewalling", SCENARIO)
    for turn in range(3):
        assert scripted_step(s, turn, None).offer_days is None
    assert scripted_step(s, 3, None).offer_days is not None


def test_victim_table_replay():
    s = build_script("victim", SCENARIO)
    expected = [E.SADNESS, E.SADNESS, E.FEAR, E.SADNESS, E.FEAR, E.SADNESS]
    got = [scripted_step(s, t, SCENARIO.creditor_initial_days).emotion for t in range(len(expected))]
    assert got == expected


def test_cheating_contradicts_stated_minimum():
    s = build_script("cheating", SCENARIO)
    first = scripted_step(s, 0, None)
    assert str(s.stated_minimum) in first.text
    later = [scripted_step(s, t, None) for t in range(1, 6)]
    assert all(m.offer_days < s.stated_minimum and "contradiction" in m.tags for m in later)


def test_script_loops_final_stanza():
    s = build_script("vanilla", SCENARIO)
    assert scripted_step(s, 50, None) == scripted_step(s, len(s.stanzas) - 1, None)


def test_negative_turn_rejected():
    with pytest.raises(ValueError):
        scripted_step(build_script("vanilla", SCENARIO), -1, None)


def test_accepts_once_offer_meets_target():
    s = build_script("vanilla", SCENARIO)
    target = s.stanzas[2].offer_days
    msg = scripted_step(s, 2, target)
    assert msg.accept and msg.offer_days == target
    assert not scripted_step(s, 2, target - 1).accept


def test_anger_loop_never_accepts():
    s = build_script("anger_loop", SCENARIO)
    assert scripted_step(s, 0, None).emotion is E.NEUTRAL
    msg = scripted_step(s, 10, 10_000)
    assert msg.emotion is E.ANGER and not msg.accept


def test_intimidation_breakdown_when_offer_stays_low():
    s = build_script("intimidation", SCENARIO)
    low = scripted_step(s, 8, SCENARIO.creditor_initial_days)
    assert low.breakdown
    assert not scripted_step(s, 7, SCENARIO.creditor_initial_days).breakdown


@pytest.mark.parametrize("persona", [p if p != "fixed" else "fixed:joy" for p in PERSONAS])
@given(turn=st.integers(0, 40), offer=st.one_of(st.none(), st.integers(1, 400)))
@settings(max_examples=30)
def test_scripts_are_pure(persona, turn, offer):
    a = scripted_step(build_script(persona, SCENARIO), turn, offer)
    b = scripted_step(build_script(persona, SCENARIO), turn, offer)
    assert a == b


def test_floor_grows_with_delinquency():
    short = SCENARIO.__class__(**{**SCENARIO.to_dict(), "delinquency_months": 1})
    long = SCENARIO.__class__(**{**SCENARIO.to_dict(), "delinquency_months": 11})
    assert debtor_floor(short) < debtor_floor(long)


def test_empty_script_rejected():
    with pytest.raises(ValueError):
        PersonaScript("x", ())


# creditor

def ctx(**kw):
    base = dict(role="creditor", turn=0, scenario=SCENARIO, last_creditor_offer=30)
    base.update(kw)
    return AgentContext(**base)


def test_next_offer_rules():
    assert next_offer(30, None, 0.2) == 30
    assert next_offer(30, 25, 0.2) == 25
    assert next_offer(30, 31, 0.2) == 31
    assert next_offer(30, 130, 0.2) == 50
    assert next_offer(30, 130, 0.0) == 32


def test_creditor_confirms_accept():
    msg = ScriptedCreditor().message(ctx(debtor_message=AgentMessage("ok", offer_days=30, accept=True)))
    assert msg.offer_days == 30


def test_anger_creditor_tags_pressure():
    msg = ScriptedCreditor().message(ctx(emotion=E.ANGER, debtor_message=AgentMessage("x", offer_days=100)))
    assert "psychological_pressure" in msg.tags and "legal action" in msg.text


def test_sadness_without_concession_is_false_empathy():
    msg = ScriptedCreditor().message(ctx(emotion=E.SADNESS, debtor_message=AgentMessage("x")))
    assert msg.offer_days == 30 and "false_empathy" in msg.tags


def test_vanilla_creditor_declares_nothing():
    msg = ScriptedCreditor(vanilla=True).message(ctx(emotion=E.ANGER, debtor_message=AgentMessage("x", offer_days=100)))
    assert msg.emotion is None and msg.offer_days == 40


def test_llm_creditor_uses_directive_and_rejects_empty():
    with stub_server([(200, 'Fine. <<meta {"offer_days": 44}>>')]) as (url, state):
        backend = LLMCreditor(EndpointConfig(base_url=url, backoff=0))
        out = backend.generate(ctx(emotion=E.JOY, mode="cooperative", debtor_message=AgentMessage("hi")))
    assert parse_message(out).offer_days == 44
    system = state.requests[0]["body"]["messages"][0]["content"]
    assert blocks()["strategy_modes"]["cooperative"] in system
    with stub_server([(200, "   ")]) as (url, _):
        with pytest.raises(BackendError):
            LLMCreditor(EndpointConfig(base_url=url, backoff=0)).generate(ctx())


# judge

def turn(**kw):
    base = dict(index=0, debtor_msg="d", debtor_emotion=E.NEUTRAL, creditor_emotion=E.NEUTRAL,
                creditor_msg="c", judge_phase=NegotiationState.PONDERING)
    base.update(kw)
    return DialogueTurn(**base)


def test_judge_accept_needs_equal_offers_and_marker():
    j = RuleJudge()
    assert j.classify([turn(debtor_offer_days=60, creditor_offer_days=60, debtor_accept=True)]) is NegotiationState.ACCEPT
    assert j.classify([turn(debtor_offer_days=60, creditor_offer_days=60)]) is NegotiationState.OFFER
    assert j.classify([turn(debtor_offer_days=60, creditor_offer_days=55, debtor_accept=True)]) is NegotiationState.OFFER


def test_judge_offer_breakdown_pondering_chitchat():
    j = RuleJudge()
    assert j.classify([turn(creditor_offer_days=30, debtor_offer_days=90)]) is NegotiationState.OFFER
    assert j.classify([turn(debtor_breakdown=True)]) is NegotiationState.BREAKDOWN
    assert j.classify([turn(creditor_offer_days=30)]) is NegotiationState.PONDERING
    assert j.classify([turn()]) is NegotiationState.CHITCHAT
