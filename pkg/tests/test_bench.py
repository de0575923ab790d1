"""Evaluation harness: scoring math, precondition baseline, corpus integrity."""

from __future__ import annotations

import csv
import json

import pytest

from conftest import build_scene, obj
from raider import DATA_DIR
from raider.bench import (
    ABSTRACTIONS,
    COARSE_LABEL,
    ISSUE_TYPES,
    NOT_SUPPORTED,
    CaseRecord,
    RunReport,
    load_corpus,
    precond_baseline,
    run_recovery_eval,
    run_repeatability,
    run_suite,
    score_case,
    scripted_plan_source,
    trivial_script,
    visualobs_run,
)
from raider.bench import TestCase as BenchCase  # alias dodges pytest's collector
from raider.gateway import ScriptedBackend
from raider.pfm import AgentOutcome, ConversationLog

CORPUS_DIR = DATA_DIR / "corpus"


# -- scoring ------------------------------------------------------------------


def outcome(label, explanation="", grounding=(), elapsed=1.0):
    return AgentOutcome(
        label, explanation, ConversationLog(), elapsed_seconds=elapsed,
        grounding_trace=list(grounding),
    )


def case(issue="IN", grounding=(), keywords=()):
    return BenchCase(
        id="t",
        query="pick(mug)",
        query_type="QS",
        abstraction="AS",
        expected_issue=issue,
        scene_file="../scenes/desk_scene.json",
        expected_grounding=set(grounding),
        explanation_keywords=[list(g) for g in keywords],
    )


def test_detection_uses_the_coarse_label_map():
    assert COARSE_LABEL["IA"] == "ambiguity"
    assert COARSE_LABEL["IN"] == "no_issue"
    for iu in ("IU1", "IU2", "IU3", "IU4", "IU5", "IU6"):
        assert COARSE_LABEL[iu] == "unfeasibility"
    scores = score_case(case("IU3"), outcome("unfeasibility"))
    assert scores.det == 1
    assert score_case(case("IU3"), outcome("no_issue")).det == 0


def test_explanation_requires_every_keyword_group():
    c = case("IU1", keywords=(["reach", "far"], ["shelf"]))
    assert score_case(c, outcome("unfeasibility", "Out of REACH of the shelf")).expl == 1
    assert score_case(c, outcome("unfeasibility", "too far away")).expl == 0  # no 'shelf'
    assert score_case(c, outcome("no_issue", "reach shelf")).expl == 0  # Expl <= Det


def test_grounding_needs_expected_ids_in_trace():
    c = case("IN", grounding=("mug",))
    assert score_case(c, outcome("no_issue", grounding=["mug", "plate"])).grnd == 1
    assert score_case(c, outcome("no_issue", grounding=["plate"])).grnd == 0
    # A correct ambiguity verdict counts as grounded by definition.
    ia = case("IA", grounding=("a", "b"))
    assert score_case(ia, outcome("ambiguity")).grnd == 1
    # No expectation -> not scored.
    assert score_case(case("IN"), outcome("no_issue")).grnd is None


def test_case_validation_rules():
    with pytest.raises(ValueError):
        case(issue="IA", grounding=("only_one",))  # ambiguity needs >= 2 ids
    with pytest.raises(ValueError):
        BenchCase(
            id="q", query="x", query_type="weird", abstraction="AS",
            expected_issue="IN", scene_file="s.json",
        )


# -- metrics aggregation ---------------------------------------------------------


def synthetic_report():
    """12 records with hand-computed aggregates."""
    rows = [
        # (issue, abstraction, det, expl, grnd, time)
        ("IA", "AS", 1, 1, 1, 1.0),
        ("IA", "AN", 1, 0, 1, 2.0),
        ("IN", "AS", 1, 1, None, 3.0),
        ("IN", "AR", 0, 0, 0, 4.0),
        ("IU1", "AS", 1, 1, 1, 5.0),
        ("IU1", "AC", 1, 1, 0, 6.0),
        ("IU2", "AN", 0, 0, None, 7.0),
        ("IU3", "AS", 1, 0, 1, 8.0),
        ("IU4", "AR", 1, 1, 1, 9.0),
        ("IU5", "AC", 0, 0, 0, 10.0),
        ("IU6", "AS", 1, 1, 1, 11.0),
        ("IU6", "AN", 1, 1, 1, 12.0),
    ]
    report = RunReport(method="raider")
    for i, (issue, ab, det, expl, grnd, t) in enumerate(rows):
        report.records.append(
            CaseRecord(
                case_id=f"c{i}", expected_issue=issue, abstraction=ab, query_type="QS",
                label=COARSE_LABEL[issue] if det else "timeout", explanation="",
                det=det, expl=expl, grnd=grnd, time_seconds=t, warnings={},
            )
        )
    return report


def test_aggregate_matches_hand_computation():
    agg = synthetic_report().aggregate()
    assert agg["cases"] == 12
    assert abs(agg["Det"] - 100.0 * 9 / 12) < 1e-9
    assert abs(agg["Expl"] - 100.0 * 7 / 12) < 1e-9
    assert abs(agg["Grnd"] - 100.0 * 7 / 10) < 1e-9  # two unscored records
    assert abs(agg["Time"] - (78.0 / 12)) < 1e-9


def test_expl_never_exceeds_det_casewise():
    for record in synthetic_report().records:
        assert record.expl <= record.det


def test_breakdowns_partition_the_records():
    report = synthetic_report()
    by_issue = report.by_issue_type()
    assert sum(v["cases"] for v in by_issue.values()) == 12
    assert set(by_issue) <= set(ISSUE_TYPES)
    assert abs(by_issue["IA"]["Det"] - 100.0) < 1e-9
    by_ab = report.by_abstraction()
    assert sum(v["cases"] for v in by_ab.values()) == 12
    assert set(by_ab) <= set(ABSTRACTIONS)


def test_report_files_round_trip(tmp_path):
    report = synthetic_report()
    jpath, cpath = tmp_path / "r.json", tmp_path / "r.csv"
    report.write_json(jpath)
    report.write_csv(cpath)
    data = json.loads(jpath.read_text())
    assert len(data["records"]) == 12
    assert abs(data["overall"]["Det"] - 75.0) < 1e-9
    with open(cpath) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) > 2


# -- precondition baseline ---------------------------------------------------------


def baseline_scene(**kw):
    defaults = dict(holding=None, drawer_open=False, lamp_on=False, tomato_sliced=False)
    defaults.update(kw)
    return build_scene(
        [
            obj("mug", [0.0, 0.5, 0.05]),
            obj("knife", [0.2, 0.5, 0.02]),
            obj("table", [0.0, 0.6, -0.05], half=(0.6, 0.4, 0.05)),
            obj(
                "drawer", [0.4, 0.6, 0.2],
                states={"open": defaults["drawer_open"]}, properties={"openable": True},
            ),
            obj(
                "lamp", [-0.4, 0.6, 0.2],
                states={"on": defaults["lamp_on"]}, properties={"toggleable": True},
            ),
            obj(
                "tomato", [0.1, 0.7, 0.03],
                states={"sliced": defaults["tomato_sliced"]}, properties={"sliceable": True},
            ),
        ],
        robot={"position": [0, 0, 0], "reach": 1.1, "body_radius": 0.3,
               "holding": defaults["holding"]},
    )


# (query, scene overrides, expected label, substring of the explanation)
BASELINE_TABLE = [
    # pick: 2 positive, 2 negative
    ("pick(mug)", {}, "no_issue", "gripper is empty"),
    ("pick(knife, table)", {}, "no_issue", "knife is present"),
    ("pick(ghost)", {}, "unfeasibility", "not present"),
    ("pick(mug)", {"holding": "knife"}, "unfeasibility", "already holding"),
    ("pick(mug, drawer)", {}, "unfeasibility", "not open"),
    # place
    ("place(knife, table)", {"holding": "knife"}, "no_issue", "holding knife"),
    ("place(knife, drawer)", {"holding": "knife", "drawer_open": True}, "no_issue", "drawer is open"),
    ("place(knife, table)", {}, "unfeasibility", "not holding"),
    ("place(knife, drawer)", {"holding": "knife"}, "unfeasibility", "not open"),
    # open
    ("open(drawer)", {}, "no_issue", "drawer is closed"),
    ("open(drawer)", {"drawer_open": False}, "no_issue", "openable"),
    ("open(mug)", {}, "unfeasibility", "not openable"),
    ("open(drawer)", {"drawer_open": True}, "unfeasibility", "not closed"),
    ("open(drawer)", {"holding": "knife"}, "unfeasibility", "already holding"),
    # close
    ("close(drawer)", {"drawer_open": True}, "no_issue", "drawer is open"),
    ("close(drawer)", {"drawer_open": True, "lamp_on": True}, "no_issue", "openable"),
    ("close(drawer)", {}, "unfeasibility", "not open"),
    ("close(lamp)", {}, "unfeasibility", "not openable"),
    # turnon
    ("turnon(lamp)", {}, "no_issue", "toggleable"),
    ("turnon(lamp)", {"holding": None}, "no_issue", "turned off"),
    ("turnon(lamp)", {"lamp_on": True}, "unfeasibility", "not turned off"),
    ("turnon(mug)", {}, "unfeasibility", "not toggleable"),
    # turnoff
    ("turnoff(lamp)", {"lamp_on": True}, "no_issue", "turned on"),
    ("turnoff(lamp)", {"lamp_on": True, "drawer_open": True}, "no_issue", "toggleable"),
    ("turnoff(lamp)", {}, "unfeasibility", "not turned on"),
    ("turnoff(tomato)", {}, "unfeasibility", "not toggleable"),
    # slice
    ("slice(tomato)", {"holding": "knife"}, "no_issue", "sliceable"),
    ("slice(tomato)", {"holding": "knife", "lamp_on": True}, "no_issue", "not sliced yet"),
    ("slice(tomato)", {}, "unfeasibility", "not holding knife"),
    ("slice(mug)", {"holding": "knife"}, "unfeasibility", "not sliceable"),
    ("slice(tomato)", {"holding": "knife", "tomato_sliced": True}, "unfeasibility", "already sliced"),
]


@pytest.mark.parametrize("query,overrides,label,needle", BASELINE_TABLE)
def test_precond_baseline_table(query, overrides, label, needle):
    got_label, explanation = precond_baseline(query, baseline_scene(**overrides))
    assert got_label == label
    assert needle.lower() in explanation.lower()


def test_precond_baseline_never_emits_ambiguity():
    scene = baseline_scene()
    queries = [q for q, _, _, _ in BASELINE_TABLE] + [
        "pick(mug, lamp)", "approach(mug)", "Can you pick the mug?", "pick()",
    ]
    for query in queries:
        label, _ = precond_baseline(query, scene)
        assert label != "ambiguity"


def test_precond_baseline_not_supported_paths():
    scene = baseline_scene()
    assert precond_baseline("Can you pick the mug?", scene)[0] == NOT_SUPPORTED
    assert precond_baseline("approach(mug)", scene)[0] == NOT_SUPPORTED
    assert precond_baseline("pick()", scene)[0] == NOT_SUPPORTED


# -- corpus integrity and suite run -------------------------------------------------


def test_corpus_covers_the_grid():
    cases = load_corpus(CORPUS_DIR)
    assert len(cases) >= 40
    issues = [c.expected_issue for c in cases]
    abstractions = [c.abstraction for c in cases]
    qtypes = [c.query_type for c in cases]
    for issue in ISSUE_TYPES:
        assert issues.count(issue) >= 2, issue
    for ab in ABSTRACTIONS:
        assert abstractions.count(ab) >= 2, ab
    assert qtypes.count("QS") >= 2 and qtypes.count("QU") >= 2
    assert len({c.id for c in cases}) == len(cases)


def test_suite_runs_clean_under_trivial_backend():
    report = run_suite(CORPUS_DIR)
    agg = report.aggregate()
    assert agg["cases"] >= 40
    assert agg["Det"] == 100.0
    assert agg["Expl"] == 100.0
    assert agg["Grnd"] == 100.0


def test_trivial_script_grounds_expected_objects():
    c = case("IN", grounding=("mug",))
    script = trivial_script(c)
    assert any("get_object_state" in line and "mug" in line for line in script)
    assert "final_response" in script[-1]


def test_per_case_failures_are_recorded_not_raised(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "broken.json").write_text(json.dumps({
        "id": "broken", "query": "pick(x)", "query_type": "QS", "abstraction": "AS",
        "expected_issue": "IN", "scene": "../scenes/ານtruly_missing.json",
    }))
    (corpus / "index.json").write_text(json.dumps({"cases": ["broken.json"]}))
    report = run_suite(corpus)
    assert len(report.records) == 1
    assert report.records[0].det == 0


def test_repeatability_runs_are_independent():
    cases = {c.id: c for c in load_corpus(CORPUS_DIR)}
    result = run_repeatability(cases["in_qs_as_pick_banana"], CORPUS_DIR, 5)
    assert result["runs"] == 5
    assert result["success_rate"] == 1.0


def test_recovery_eval_scores_goal_satisfaction():
    cases = load_corpus(CORPUS_DIR)
    result = run_recovery_eval(cases, CORPUS_DIR, scripted_plan_source)
    assert result["cases"] >= 5
    assert result["Recov_Plan"] == 100.0


def test_visualobs_single_shot():
    scene = baseline_scene()
    backend = ScriptedBackend.from_texts(
        ['{"final_response": "no_issue", "explanation": "clear"}']
    )
    got = visualobs_run("pick(mug)", scene, backend)
    assert got.label == "no_issue"
    assert got.iterations == 1
    # A prose answer cannot be scored as a detection.
    prose = visualobs_run("pick(mug)", scene, ScriptedBackend.from_texts(["hmm"]))
    assert prose.label == "timeout"
