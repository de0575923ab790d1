"""End-to-end acceptance suite.

Each block pins one externally visible guarantee: the golden assistive-session
replay, the warning protocol, the call grammar, the structured-query baseline,
the spatial-relation extractor against an independent oracle, prompt ablations,
the recovery plan language, metrics arithmetic, and the shipped corpus.
"""

from __future__ import annotations

import json
import time

import pytest

from conftest import build_scene, obj
from grammar_cases import GRAMMAR_CASES
from relation_oracle import expected_flags, volume_fraction_inside
from test_bench import BASELINE_TABLE, baseline_scene, synthetic_report
from test_recovery import REFUSAL_CASES, generated_plans, kitchen_scene
from test_relations import check_scene_against_oracle, make_scenes

from raider import DATA_DIR, SCENES_DIR, TRANSCRIPTS_DIR
from raider.bench import NOT_SUPPORTED, load_corpus, precond_baseline, run_suite, trivial_script
from raider.gateway import ChatConfig, ScriptedBackend, ScriptedStep
from raider.pfm import RunConfig, WarningKind, parse_tool_calls, run
from raider.prompts import (
    PROCEDURE_VARIANTS,
    PromptConfig,
    build_system_prompt,
    grounding_block,
    question_generation_block,
)
from raider.recovery import ScriptedChannel, execute_plan, parse_plan
from raider.scene import SceneMutation, load_scene
from raider.tools import ToolRegistry

REGISTRY = ToolRegistry()
FINAL_OK = '{"final_response": "no_issue", "explanation": "all checks passed"}'


def config(**overrides):
    defaults = dict(prompt=PromptConfig(), chat=ChatConfig())
    defaults.update(overrides)
    return RunConfig(**defaults)


# -- 1. golden replay of the recorded assistive session ------------------------


def test_golden_assistive_session_replay():
    fixture = json.loads((TRANSCRIPTS_DIR / "assistive_demo.json").read_text())
    scene = load_scene(SCENES_DIR / fixture["scene"])
    cfg = RunConfig(prompt=PromptConfig(profile=fixture["profile"]), chat=ChatConfig())

    started = time.monotonic()
    labels = []
    for step in fixture["steps"]:
        for mutation in step["mutations_before"]:
            scene.apply_mutation(SceneMutation.from_dict(mutation))
        backend = ScriptedBackend.from_texts(step["responses"])
        outcome = run(step["query"], scene, REGISTRY, backend, cfg)
        labels.append(outcome.label)
        results = [m.content for m in outcome.log.messages if m.content.startswith("Call to tool")]
        for expected in step["expected_tool_results"]:
            assert expected in results, f"{step['title']}: missing {expected!r}"
        assert outcome.tool_call_count == step["expected_tool_calls"]
    elapsed = time.monotonic() - started

    assert labels == [
        "unfeasibility",  # approach: path blocked
        "ambiguity",      # two medicine candidates
        "unfeasibility",  # 0.6m exceeds the 0.5m handover range
        "unfeasibility",  # user not recognized
        "unfeasibility",  # user not looking at the robot
    ]
    assert elapsed < 5.0


def test_golden_replay_tool_strings_are_byte_exact():
    fixture = json.loads((TRANSCRIPTS_DIR / "assistive_demo.json").read_text())
    expected_fragments = [
        "returned 0.6",
        "returned 0.1",
        "returned 0.2",
        "returned 0.4m",
        "returned ['-1']",
        "returned ['Adriana']",
        "returned False",
        "returned True",
    ]
    all_expected = "\n".join(
        line for step in fixture["steps"] for line in step["expected_tool_results"]
    )
    for fragment in expected_fragments:
        assert fragment in all_expected


# -- 2. warning protocol --------------------------------------------------------


def warning_scene():
    return build_scene([obj("mug", [0.0, 0.5, 0.05]), obj("plate", [0.3, 0.5, 0.02])])


WARNING_SCENARIOS = [
    # (responses, expected warning kind)
    (
        ['call_tool{tool: get_object_state, args: ["mug"]} ' + FINAL_OK, FINAL_OK],
        WarningKind.MADE_UP_TOOL_RESPONSE,
    ),
    (["call_tool{tool: read_minds, args: []}", FINAL_OK], WarningKind.MADE_UP_TOOL_NAME),
    (
        ['call_tool{tool: get_object_state, args: ["xylophone"]}', FINAL_OK],
        WarningKind.UNSUCCESSFUL_TOOL_CALL,
    ),
    (["thinking out loud, no action", FINAL_OK], WarningKind.MISSING_TOOL_CALL_OR_FINAL_RESPONSE),
]


@pytest.mark.parametrize("responses,kind", WARNING_SCENARIOS)
def test_each_warning_fires_and_the_loop_continues(responses, kind):
    outcome = run(
        "pick(mug)", warning_scene(), REGISTRY, ScriptedBackend.from_texts(responses), config()
    )
    assert outcome.warnings == {kind.name: 1}
    warning_msgs = [m for m in outcome.log.messages if m.content.startswith("Warning")]
    assert len(warning_msgs) == 1
    assert warning_msgs[0].role == "user"
    assert kind.value in warning_msgs[0].content
    assert outcome.label in ("no_issue", "ambiguity")  # the run finished after the warning


def test_never_finalizing_script_times_out_quickly():
    backend = ScriptedBackend([ScriptedStep("still deciding...", delay=0.06)], cycle=True)
    started = time.monotonic()
    outcome = run(
        "pick(mug)", warning_scene(), REGISTRY, backend,
        config(deadline_seconds=0.1, iteration_cap=1000),
    )
    assert outcome.label == "timeout"
    assert time.monotonic() - started < 5.0


# -- 3. tool-call grammar --------------------------------------------------------


@pytest.mark.parametrize("text,expected", GRAMMAR_CASES)
def test_grammar_table(text, expected):
    calls = parse_tool_calls(text)
    assert len(calls) == len(expected)
    for call, want in zip(calls, expected):
        if want[0] == "ok":
            assert call.parse_error is None
            assert (call.tool, call.args) == (want[1], list(want[2]))
        else:
            assert call.parse_error is not None


def test_grammar_table_includes_adversarial_rows():
    assert len(GRAMMAR_CASES) == 30
    adversarial = GRAMMAR_CASES[-10:]  # malformed bodies plus tricky accepts
    assert len(adversarial) == 10
    rejected = sum(
        1 for _, expected in adversarial
        if any(row[0] == "error" for row in expected) or expected == []
    )
    assert rejected >= 8


# -- 4. structured-query baseline -------------------------------------------------


@pytest.mark.parametrize("query,overrides,label,needle", BASELINE_TABLE)
def test_precondition_baseline_table(query, overrides, label, needle):
    got_label, explanation = precond_baseline(query, baseline_scene(**overrides))
    assert got_label == label
    assert needle in explanation


def test_precondition_baseline_covers_all_actions_both_ways():
    actions = {q.split("(")[0] for q, _, _, _ in BASELINE_TABLE}
    assert actions == {"pick", "place", "open", "close", "slice", "turnon", "turnoff"}
    for action in actions:
        rows = [(l, q) for q, _, l, _ in BASELINE_TABLE if q.startswith(action + "(")]
        labels = [l for l, _ in rows]
        assert labels.count("no_issue") >= 2, action
        assert len(labels) - labels.count("no_issue") >= 2, action


def test_precondition_baseline_never_emits_ambiguity():
    queries = [q for q, _, _, _ in BASELINE_TABLE] + ["pick(mug)", "Can you pick this up?"]
    for query in queries:
        label, _ = precond_baseline(query, baseline_scene())
        assert label != "ambiguity"
    assert precond_baseline("Could you tidy up?", baseline_scene())[0] == NOT_SUPPORTED


# -- 5. spatial relations vs independent oracle ----------------------------------


def test_relations_match_oracle_on_200_randomized_scenes():
    for scene in make_scenes(200):
        check_scene_against_oracle(scene)


def test_relation_symmetry_invariants():
    from raider.scene import compute_relations

    for scene in make_scenes(60, seed=31):
        got = {(r.subject, r.relation, r.object) for r in compute_relations(scene)}
        for a, b in (("a", "b"), ("b", "a")):
            assert ((a, "left_of", b) in got) == ((b, "right_of", a) in got)
            assert ((a, "above", b) in got) == ((b, "below", a) in got)
            assert ((a, "near", b) in got) == ((b, "near", a) in got)


# -- 6. prompt ablations -----------------------------------------------------------


def test_variants_differ_only_in_the_two_step_blocks():
    tool_block = REGISTRY.render_tool_descriptions(REGISTRY.profile("household"))
    prompts = {
        v: build_system_prompt(PromptConfig(variant=v), tool_block) for v in PROCEDURE_VARIANTS
    }
    grnd, qgen = grounding_block(), question_generation_block()

    assert grnd in prompts["QGEN_GRND"] and qgen in prompts["QGEN_GRND"]
    assert grnd in prompts["GRND"] and qgen not in prompts["GRND"]
    assert qgen in prompts["QGEN"] and grnd not in prompts["QGEN"]
    assert grnd not in prompts["BASIC"] and qgen not in prompts["BASIC"]

    def strip(text):
        return text.replace(grnd + "\n", "").replace(qgen + "\n", "")

    for variant in PROCEDURE_VARIANTS:
        assert strip(prompts[variant]) == prompts["BASIC"]


# -- 7. recovery plan language -------------------------------------------------------


@pytest.mark.parametrize("text", generated_plans(50))
def test_plan_round_trip_is_stable(text):
    first = parse_plan(text)
    rendered = first.render()
    second = parse_plan(rendered)
    assert second.render() == rendered
    assert [s.action for s in second.statements] == [s.action for s in first.statements]


def test_ask_binding_round_trip():
    scene = kitchen_scene()
    channel = ScriptedChannel(["mug"])
    plan = parse_plan('choice = ask("Which one should I pick?")\npick(choice)')
    log = execute_plan(plan, scene, channel)
    assert [s.status for s in log.steps] == ["asked", "ok"]
    assert channel.questions == ["Which one should I pick?"]
    assert scene.robot.holding == "mug"


@pytest.mark.parametrize("plan_text,holding,needle", REFUSAL_CASES)
def test_execution_refuses_precondition_violations(plan_text, holding, needle):
    scene = kitchen_scene(holding=holding)
    log = execute_plan(parse_plan(plan_text), scene, ScriptedChannel([]))
    assert log.halted
    assert needle in log.steps[-1].detail


def test_refusal_case_count():
    assert len(REFUSAL_CASES) == 10


# -- 8. metrics arithmetic ------------------------------------------------------------


def test_aggregates_match_hand_computation_to_1e9():
    agg = synthetic_report().aggregate()
    assert abs(agg["Det"] - 100.0 * 9 / 12) < 1e-9
    assert abs(agg["Expl"] - 100.0 * 7 / 12) < 1e-9
    assert abs(agg["Grnd"] - 100.0 * 7 / 10) < 1e-9
    assert abs(agg["Time"] - 78.0 / 12) < 1e-9


def test_expl_never_exceeds_det_casewise():
    for record in synthetic_report().records:
        assert record.expl <= record.det


# -- 9. shipped corpus ------------------------------------------------------------------


CORPUS_DIR = DATA_DIR / "corpus"


def test_corpus_spans_the_full_grid():
    cases = load_corpus(CORPUS_DIR)
    assert len(cases) >= 40
    issues = {c.expected_issue for c in cases}
    assert issues == {"IA", "IN", "IU1", "IU2", "IU3", "IU4", "IU5", "IU6"}
    assert {c.abstraction for c in cases} == {"AS", "AN", "AR", "AC"}
    assert {c.query_type for c in cases} == {"QS", "QU"}


def test_corpus_runs_end_to_end_under_a_correct_scripted_backend():
    report = run_suite(CORPUS_DIR, method="raider")
    agg = report.aggregate()
    assert agg["cases"] >= 40
    assert agg["Det"] == 100.0
    assert agg["Expl"] == 100.0
    assert agg["Grnd"] == 100.0
    assert all(r.label != "transport_failure" for r in report.records)


def test_scripted_backend_mirrors_live_protocol():
    """The per-case script uses the same grammar the live loop expects."""
    cases = load_corpus(CORPUS_DIR)
    sample = cases[0]
    for line in trivial_script(sample)[:-1]:
        calls = parse_tool_calls(line)
        assert calls and all(c.parse_error is None for c in calls)
