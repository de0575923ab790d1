"""Evaluation bench: test-case corpus, metrics, baselines and reports.

Metrics per case:
  Det  - 1 iff the outcome label maps to the expected issue's coarse label.
  Expl - Det and every keyword group matched in the explanation.
  Grnd - only for cases with a grounding set: expected ids covered by the
         run's grounding trace, or a correctly detected ambiguity.
  Time - elapsed seconds for the run.
"""

from __future__ import annotations

import csv
import json
import re
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import pfm
from .gateway import ChatBackend, ScriptedBackend
from .pfm import AgentOutcome, ConversationLog, RunConfig, parse_final_response
from .prompts import build_user_message, build_visualobs_prompt
from .recovery import (
    PlanError,
    RecoveryQuery,
    ScriptedChannel,
    build_recovery_prompt,
    execute_plan,
    parse_plan,
)
from .scene import Scene, describe_scene, load_scene
from .tools import ToolRegistry

QUERY_TYPES = ("QS", "QU")
ABSTRACTIONS = ("AS", "AN", "AR", "AC")
ISSUE_TYPES = ("IA", "IN", "IU1", "IU2", "IU3", "IU4", "IU5", "IU6")

COARSE_LABEL = {
    "IA": "ambiguity",
    "IN": "no_issue",
    "IU1": "unfeasibility",
    "IU2": "unfeasibility",
    "IU3": "unfeasibility",
    "IU4": "unfeasibility",
    "IU5": "unfeasibility",
    "IU6": "unfeasibility",
}


@dataclass
class RecoveryGoal:
    # State assertions on the post-execution scene and/or required ask keywords.
    state_assertions: list[dict] = field(default_factory=list)
    ask_keywords: list[str] = field(default_factory=list)
    channel_answers: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "RecoveryGoal":
        return cls(
            state_assertions=list(d.get("state_assertions", [])),
            ask_keywords=list(d.get("ask_keywords", [])),
            channel_answers=list(d.get("channel_answers", [])),
        )


@dataclass
class TestCase:
    id: str
    query: str
    query_type: str
    abstraction: str
    expected_issue: str
    scene_file: str
    expected_grounding: set[str] = field(default_factory=set)
    explanation_keywords: list[list[str]] = field(default_factory=list)
    recovery: Optional[RecoveryGoal] = None
    scripted_responses: list[str] = field(default_factory=list)
    scripted_plan: str = ""

    def __post_init__(self) -> None:
        if self.query_type not in QUERY_TYPES:
            raise ValueError(f"{self.id}: bad query_type {self.query_type!r}")
        if self.abstraction not in ABSTRACTIONS:
            raise ValueError(f"{self.id}: bad abstraction {self.abstraction!r}")
        if self.expected_issue not in ISSUE_TYPES:
            raise ValueError(f"{self.id}: bad expected_issue {self.expected_issue!r}")
        if self.expected_issue == "IA" and len(self.expected_grounding) < 2:
            raise ValueError(f"{self.id}: ambiguity cases need >= 2 grounding ids")

    @classmethod
    def from_dict(cls, d: dict) -> "TestCase":
        recovery = RecoveryGoal.from_dict(d["recovery"]) if d.get("recovery") else None
        return cls(
            id=d["id"],
            query=d["query"],
            query_type=d["query_type"],
            abstraction=d["abstraction"],
            expected_issue=d["expected_issue"],
            scene_file=d["scene"],
            expected_grounding=set(d.get("expected_grounding", [])),
            explanation_keywords=[list(g) for g in d.get("explanation_keywords", [])],
            recovery=recovery,
            scripted_responses=list(d.get("scripted_responses", [])),
            scripted_plan=d.get("scripted_plan", ""),
        )


def load_corpus(corpus_dir: str | Path) -> list[TestCase]:
    """Load all cases listed in the corpus index file."""
    corpus_dir = Path(corpus_dir)
    index = json.loads((corpus_dir / "index.json").read_text())
    cases = []
    for name in index["cases"]:
        data = json.loads((corpus_dir / name).read_text())
        cases.append(TestCase.from_dict(data))
    return cases


def load_case_scene(case: TestCase, corpus_dir: str | Path) -> Scene:
    path = Path(corpus_dir) / case.scene_file
    if not path.exists():
        path = Path(case.scene_file)
    return load_scene(path)


# -- scoring -------------------------------------------------------------------


@dataclass
class CaseScores:
    det: int
    expl: int
    grnd: Optional[int]  # None when the case requires no grounding
    time_seconds: float


def score_case(case: TestCase, outcome: AgentOutcome) -> CaseScores:
    expected = COARSE_LABEL[case.expected_issue]
    det = 1 if outcome.label == expected else 0
    expl = det
    if det:
        lowered = outcome.explanation.lower()
        for group in case.explanation_keywords:
            if not any(word.lower() in lowered for word in group):
                expl = 0
                break
    grnd: Optional[int] = None
    if case.expected_grounding:
        if case.expected_issue == "IA" and outcome.label == "ambiguity":
            grnd = 1
        else:
            trace = set(outcome.grounding_trace)
            grnd = 1 if case.expected_grounding <= trace else 0
    return CaseScores(det, expl, grnd, outcome.elapsed_seconds)


# -- Precond baseline ----------------------------------------------------------

NOT_SUPPORTED = "not_supported"

_STRUCTURED_QUERY = re.compile(r"^\s*(?P<action>[a-zA-Z_]\w*)\s*\(\s*(?P<args>[^)]*)\)\s*$")

_PRECOND_ACTIONS = ("pick", "place", "open", "close", "turnon", "turnoff", "slice")


def _check(scene: Scene, kind: str, arg: str) -> tuple[bool, str, str]:
    """(passed, positive sentence, negative sentence) for one precondition."""
    objects = scene.objects
    if kind == "is_present":
        ok = arg in objects
        return ok, f"{arg} is present in the scene", f"{arg} is not present in the scene"
    if kind == "robot_holding_none":
        held = scene.robot.holding
        return (
            held is None,
            "the robot's gripper is empty",
            f"the robot is already holding {held}",
        )
    if kind == "robot_holding":
        held = scene.robot.holding
        return (
            held == arg,
            f"the robot is holding {arg}",
            f"the robot is not holding {arg}" + (f" (it is holding {held})" if held else ""),
        )
    obj = objects.get(arg)
    if obj is None:
        return False, "", f"{arg} is not present in the scene"
    if kind == "is_openable":
        ok = obj.properties.get("openable", False)
        return ok, f"{arg} is openable", f"{arg} is not openable"
    if kind == "is_open":
        ok = obj.states.get("open", False)
        return ok, f"{arg} is open", f"{arg} is not open"
    if kind == "is_closed":
        ok = not obj.states.get("open", False)
        return ok, f"{arg} is closed", f"{arg} is not closed"
    if kind == "is_toggeable":
        ok = obj.properties.get("toggleable", False)
        return ok, f"{arg} is toggleable", f"{arg} is not toggleable"
    if kind == "is_turned_on":
        ok = obj.states.get("on", False)
        return ok, f"{arg} is turned on", f"{arg} is not turned on"
    if kind == "is_turned_off":
        ok = not obj.states.get("on", False)
        return ok, f"{arg} is turned off", f"{arg} is not turned off"
    if kind == "is_sliceable":
        ok = obj.properties.get("sliceable", False)
        return ok, f"{arg} is sliceable", f"{arg} is not sliceable"
    if kind == "not_sliced":
        ok = not obj.states.get("sliced", False)
        return ok, f"{arg} is not sliced yet", f"{arg} is already sliced"
    raise ValueError(f"unknown check {kind!r}")  # pragma: no cover


def precond_baseline(query: str, scene: Scene) -> tuple[str, str]:
    """Rule-based issue detection from the fixed precondition table.

    Returns (label, explanation). Unstructured queries, unknown actions and
    arguments that are not exact scene ids other than a missing target yield
    the distinguished NOT_SUPPORTED label. Never returns ambiguity.
    """
    match = _STRUCTURED_QUERY.match(query)
    if not match:
        return NOT_SUPPORTED, "only structured queries with specific arguments are supported"
    action = match.group("action").lower()
    args = [a.strip().strip("'\"") for a in match.group("args").split(",") if a.strip()]
    if action not in _PRECOND_ACTIONS:
        return NOT_SUPPORTED, f"action {action!r} has no precondition model"

    checks: list[tuple[str, str]] = []
    if action in ("pick", "place"):
        if not args:
            return NOT_SUPPORTED, f"{action} requires an object argument"
        obj, loc = args[0], (args[1] if len(args) > 1 else None)
        checks.append(("is_present", obj))
        checks.append(("robot_holding_none", "") if action == "pick" else ("robot_holding", obj))
        if loc is not None and loc in scene.objects:
            if scene.objects[loc].properties.get("openable", False):
                checks.append(("is_open", loc))
    elif action in ("open", "close"):
        if not args:
            return NOT_SUPPORTED, f"{action} requires a receptacle argument"
        recep = args[0]
        checks = [
            ("is_present", recep),
            ("robot_holding_none", ""),
            ("is_openable", recep),
            ("is_closed" if action == "open" else "is_open", recep),
        ]
    elif action in ("turnon", "turnoff"):
        if not args:
            return NOT_SUPPORTED, f"{action} requires an object argument"
        obj = args[0]
        checks = [
            ("is_present", obj),
            ("robot_holding_none", ""),
            ("is_toggeable", obj),
            ("is_turned_off" if action == "turnon" else "is_turned_on", obj),
        ]
    elif action == "slice":
        if not args:
            return NOT_SUPPORTED, "slice requires an object argument"
        obj = args[0]
        checks = [
            ("is_present", obj),
            ("robot_holding", "knife"),
            ("is_sliceable", obj),
            ("not_sliced", obj),
        ]

    positives = []
    for kind, arg in checks:
        passed, positive, negative = _check(scene, kind, arg)
        if not passed:
            return "unfeasibility", negative
        positives.append(positive)
    return "no_issue", "; ".join(positives)


# -- LLMVisualObs baseline -------------------------------------------------------


def visualobs_run(
    query: str,
    scene: Scene,
    backend: ChatBackend,
    config: Optional[RunConfig] = None,
) -> AgentOutcome:
    """Single-shot baseline: full scene description instead of tools."""
    config = config or RunConfig()
    prompt = build_visualobs_prompt(config.prompt, describe_scene(scene))
    log = ConversationLog()
    log.append(pfm.ChatMessage("system", prompt))
    log.append(pfm.ChatMessage("user", build_user_message(query, scene.object_ids())))
    started = time.monotonic()
    assistant = backend.complete(log.messages, config.chat)
    log.append(assistant)
    elapsed = time.monotonic() - started
    final = parse_final_response(assistant.content)
    if final is None:
        return AgentOutcome("timeout", "", log, iterations=1, elapsed_seconds=elapsed)
    label, explanation = final
    return AgentOutcome(label, explanation, log, iterations=1, elapsed_seconds=elapsed)


# -- suite runner ----------------------------------------------------------------


@dataclass
class CaseRecord:
    case_id: str
    expected_issue: str
    abstraction: str
    query_type: str
    label: str
    explanation: str
    det: int
    expl: int
    grnd: Optional[int]
    time_seconds: float
    warnings: dict[str, int] = field(default_factory=dict)
    error: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunReport:
    method: str
    records: list[CaseRecord] = field(default_factory=list)

    def aggregate(self, records: Optional[list[CaseRecord]] = None) -> dict:
        records = self.records if records is None else records
        if not records:
            return {"cases": 0, "Det": 0.0, "Expl": 0.0, "Grnd": 0.0, "Time": 0.0}
        grounded = [r for r in records if r.grnd is not None]
        return {
            "cases": len(records),
            "Det": 100.0 * sum(r.det for r in records) / len(records),
            "Expl": 100.0 * sum(r.expl for r in records) / len(records),
            "Grnd": (
                100.0 * sum(r.grnd for r in grounded) / len(grounded) if grounded else 0.0
            ),
            "Time": statistics.fmean(r.time_seconds for r in records),
        }

    def by_issue_type(self) -> dict[str, dict]:
        groups: dict[str, list[CaseRecord]] = {}
        for r in self.records:
            groups.setdefault(r.expected_issue, []).append(r)
        return {issue: self.aggregate(rs) for issue, rs in sorted(groups.items())}

    def by_abstraction(self) -> dict[str, dict]:
        groups: dict[str, list[CaseRecord]] = {}
        for r in self.records:
            groups.setdefault(r.abstraction, []).append(r)
        return {a: self.aggregate(rs) for a, rs in sorted(groups.items())}

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "records": [r.to_dict() for r in self.records],
            "overall": self.aggregate(),
            "by_issue_type": self.by_issue_type(),
            "by_abstraction": self.by_abstraction(),
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "cases", "Grnd", "Det", "Expl", "Time"])

            def row(name: str, agg: dict) -> list:
                return [
                    name, agg["cases"],
                    f"{agg['Grnd']:.2f}", f"{agg['Det']:.2f}",
                    f"{agg['Expl']:.2f}", f"{agg['Time']:.3f}",
                ]

            writer.writerow(row("overall", self.aggregate()))
            for issue, agg in self.by_issue_type().items():
                writer.writerow(row(issue, agg))
            for abstraction, agg in self.by_abstraction().items():
                writer.writerow(row(abstraction, agg))


def trivial_script(case: TestCase) -> list[str]:
    """A correct scripted run for the case (hermetic suite smoke).

    Grounds every expected object with a state query, then answers.
    """
    label = COARSE_LABEL[case.expected_issue]
    keywords = " ".join(group[0] for group in case.explanation_keywords)
    obj = json.dumps({"final_response": label, "explanation": keywords or label})
    responses = [
        f"call_tool{{tool: get_object_state, args: ['{oid}']}}"
        for oid in sorted(case.expected_grounding)
    ]
    responses.append(obj)
    return responses


BackendFactory = Callable[[TestCase], ChatBackend]


def scripted_backend_factory(case: TestCase) -> ChatBackend:
    responses = case.scripted_responses or trivial_script(case)
    return ScriptedBackend.from_texts(responses)


def run_case(
    case: TestCase,
    scene: Scene,
    method: str,
    registry: ToolRegistry,
    backend_factory: BackendFactory,
    config: Optional[RunConfig] = None,
) -> AgentOutcome:
    config = config or RunConfig()
    if method == "precond":
        started = time.monotonic()
        label, explanation = precond_baseline(case.query, scene)
        elapsed = time.monotonic() - started
        if label == NOT_SUPPORTED:
            # Scored as a failure: the baseline cannot attempt the case.
            return AgentOutcome(
                "timeout", explanation, ConversationLog(), elapsed_seconds=elapsed
            )
        return AgentOutcome(label, explanation, ConversationLog(), elapsed_seconds=elapsed)
    if method == "visualobs":
        return visualobs_run(case.query, scene, backend_factory(case), config)
    if method == "raider":
        return pfm.run(case.query, scene, registry, backend_factory(case), config)
    raise ValueError(f"unknown method {method!r}")


def run_suite(
    corpus_dir: str | Path,
    method: str = "raider",
    registry: Optional[ToolRegistry] = None,
    backend_factory: BackendFactory = scripted_backend_factory,
    config: Optional[RunConfig] = None,
) -> RunReport:
    """Run every corpus case; per-case failures are recorded, not raised."""
    registry = registry or ToolRegistry()
    cases = load_corpus(corpus_dir)
    report = RunReport(method=method)
    for case in cases:
        try:
            scene = load_case_scene(case, corpus_dir)
            outcome = run_case(case, scene, method, registry, backend_factory, config)
            scores = score_case(case, outcome)
            record = CaseRecord(
                case_id=case.id,
                expected_issue=case.expected_issue,
                abstraction=case.abstraction,
                query_type=case.query_type,
                label=outcome.label,
                explanation=outcome.explanation,
                det=scores.det,
                expl=scores.expl,
                grnd=scores.grnd,
                time_seconds=scores.time_seconds,
                warnings=dict(outcome.warnings),
            )
        except Exception as exc:
            record = CaseRecord(
                case_id=case.id,
                expected_issue=case.expected_issue,
                abstraction=case.abstraction,
                query_type=case.query_type,
                label="error",
                explanation="",
                det=0,
                expl=0,
                grnd=0 if case.expected_grounding else None,
                time_seconds=0.0,
                error=str(exc),
            )
        report.records.append(record)
    return report


# -- repeatability -----------------------------------------------------------------


def run_repeatability(
    case: TestCase,
    corpus_dir: str | Path,
    n: int,
    method: str = "raider",
    registry: Optional[ToolRegistry] = None,
    backend_factory: BackendFactory = scripted_backend_factory,
    config: Optional[RunConfig] = None,
) -> dict:
    """n independent runs of one case; success-rate and time distribution."""
    if n < 1:
        raise ValueError("n must be >= 1")
    registry = registry or ToolRegistry()
    records = []
    for _ in range(n):
        scene = load_case_scene(case, corpus_dir)
        outcome = run_case(case, scene, method, registry, backend_factory, config)
        scores = score_case(case, outcome)
        records.append({"expl": scores.expl, "time_seconds": scores.time_seconds})
    times = [r["time_seconds"] for r in records]
    return {
        "case_id": case.id,
        "runs": n,
        "success_rate": sum(r["expl"] for r in records) / n,
        "time_mean": statistics.fmean(times),
        "time_stdev": statistics.stdev(times) if n > 1 else 0.0,
        "records": records,
    }


# -- recovery evaluation --------------------------------------------------------------


def evaluate_recovery_goal(goal: RecoveryGoal, scene: Scene, channel: ScriptedChannel) -> bool:
    for assertion in goal.state_assertions:
        kind = assertion.get("kind", "state")
        if kind == "state":
            obj = scene.objects.get(assertion["object"])
            if obj is None or obj.states.get(assertion["state"], False) != assertion["value"]:
                return False
        elif kind == "holding":
            if scene.robot.holding != assertion["value"]:
                return False
        elif kind == "path_free":
            if not scene.check_free_path(assertion["target"]):
                return False
        else:
            raise ValueError(f"unknown goal assertion kind {kind!r}")
    if goal.ask_keywords:
        asked = " ".join(channel.questions).lower()
        if not all(k.lower() in asked for k in goal.ask_keywords):
            return False
    return True


def run_recovery_eval(
    cases: list[TestCase],
    corpus_dir: str | Path,
    plan_source: Callable[[TestCase, RecoveryQuery, str], str],
    prompt_variant: str = "explanation",
) -> dict:
    """Score recovery plans for cases carrying a recovery goal.

    `plan_source(case, query, prompt)` returns the plan text (scripted or
    via the recovery LLM).
    """
    records = []
    for case in cases:
        if case.recovery is None:
            continue
        scene = load_case_scene(case, corpus_dir)
        explanation = " ".join(g[0] for g in case.explanation_keywords) or case.expected_issue
        query = RecoveryQuery(
            action=case.query,
            issue=COARSE_LABEL[case.expected_issue],
            explanation=explanation,
            held_object=scene.robot.holding,
        )
        prompt = build_recovery_prompt(
            query,
            variant=prompt_variant,
            scene_description=describe_scene(scene) if "scene" in prompt_variant else None,
        )
        channel = ScriptedChannel(case.recovery.channel_answers)
        score, reason = 0, ""
        try:
            plan = parse_plan(plan_source(case, query, prompt))
            execution = execute_plan(plan, scene, channel)
            if execution.halted:
                reason = "execution refused: " + execution.steps[-1].detail
            elif evaluate_recovery_goal(case.recovery, scene, channel):
                score = 1
            else:
                reason = "goal predicate not satisfied"
        except PlanError as exc:
            reason = f"validation: {exc}"
        records.append({"case_id": case.id, "score": score, "reason": reason})
    total = len(records)
    return {
        "variant": prompt_variant,
        "cases": total,
        "Recov_Plan": 100.0 * sum(r["score"] for r in records) / total if total else 0.0,
        "records": records,
    }


def scripted_plan_source(case: TestCase, query: RecoveryQuery, prompt: str) -> str:
    if not case.scripted_plan:
        raise PlanError(f"case {case.id} carries no scripted plan")
    return case.scripted_plan
