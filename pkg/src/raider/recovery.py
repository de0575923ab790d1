"""Interactive recovery: few-shot prompt, code-style plan parsing and
execution against the scene.

Plans are one statement per line: either a call ``action(arg, ...)`` over a
closed action set, or a binding ``var = ask("question")`` whose answer can
be used by later statements. Physical actions enforce the same precondition
table as the rule-based baseline, so a plan cannot cheat the simulator.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol

from .geometry import Aabb, Vec3
from .scene import Scene

ALLOWED_ACTIONS = ("move", "pick", "place", "open", "close", "say", "ask")

EXAMPLES_DIR = Path(__file__).parent / "data" / "recovery_examples"

PROMPT_VARIANTS = ("explanation", "scene", "explanation+scene")


class PlanError(ValueError):
    """Malformed or invalid recovery plan."""


@dataclass(frozen=True)
class PlanStatement:
    action: str
    args: tuple[str, ...]  # literal strings or variable names
    arg_kinds: tuple[str, ...]  # "literal" | "variable", parallel to args
    binding: Optional[str] = None  # set for `var = ask(...)`

    def render(self) -> str:
        rendered = ", ".join(
            f'"{a}"' if kind == "literal" else a
            for a, kind in zip(self.args, self.arg_kinds)
        )
        call = f"{self.action}({rendered})"
        return f"{self.binding} = {call}" if self.binding else call


@dataclass
class RecoveryPlan:
    statements: list[PlanStatement]
    allowed_actions: tuple[str, ...] = ALLOWED_ACTIONS

    def render(self) -> str:
        return "\n".join(s.render() for s in self.statements)


@dataclass
class RecoveryQuery:
    action: str
    issue: str
    explanation: str
    held_object: Optional[str] = None

    def __post_init__(self) -> None:
        if self.issue == "no_issue":
            raise ValueError("recovery requires a detected issue")


class InteractionChannel(Protocol):
    def ask(self, question: str) -> str: ...

    def emit(self, utterance: str) -> None: ...


class ScriptedChannel:
    """Answers `ask` calls from a fixed list; records everything said/asked."""

    def __init__(self, answers: list[str]):
        self.answers = list(answers)
        self.cursor = 0
        self.questions: list[str] = []
        self.utterances: list[str] = []

    def ask(self, question: str) -> str:
        self.questions.append(question)
        if self.cursor >= len(self.answers):
            raise PlanError(f"no scripted answer left for question {question!r}")
        answer = self.answers[self.cursor]
        self.cursor += 1
        return answer

    def emit(self, utterance: str) -> None:
        self.utterances.append(utterance)


# -- prompt -------------------------------------------------------------------

_OBJECTIVE = (
    "A robot detected an issue while executing an action. Produce a short "
    "recovery plan that resolves the issue so the action can proceed, or "
    "state why it cannot. Output only plan statements, one per line."
)

_ACTION_LIST = (
    "Available actions:\n"
    "- move(object): move an object out of the way\n"
    "- pick(object) / pick(object, location): pick an object up\n"
    "- place(object, location): place the held object somewhere\n"
    "- open(receptacle) / close(receptacle)\n"
    "- say(\"utterance\"): communicate with the human\n"
    "- answer = ask(\"question\"): ask the human; the answer can be used in later statements"
)

_CONTEXT_NOTE = (
    "Contextual note: the human nearby can answer questions, move objects and "
    "receive information. Prefer asking when the robot cannot resolve the "
    "issue on its own."
)


def _load_examples() -> list[str]:
    return [p.read_text().strip() for p in sorted(EXAMPLES_DIR.glob("*.txt"))]


def build_recovery_prompt(
    q: RecoveryQuery,
    variant: str = "explanation",
    scene_description: Optional[str] = None,
) -> str:
    """Few-shot recovery prompt; `variant` selects the context given with the query."""
    if variant not in PROMPT_VARIANTS:
        raise ValueError(f"unknown recovery prompt variant {variant!r}")
    if "scene" in variant and not scene_description:
        raise ValueError(f"variant {variant!r} requires a scene description")
    parts = [_OBJECTIVE, _ACTION_LIST, _CONTEXT_NOTE, "Examples:"]
    parts.extend(_load_examples())
    held = q.held_object or "none"
    context_lines = [f"Query: action: {q.action}; issue: {q.issue};"]
    if variant in ("explanation", "explanation+scene"):
        context_lines.append(f"explanation: {q.explanation};")
    if variant in ("scene", "explanation+scene"):
        context_lines.append(f"scene: {scene_description};")
    context_lines.append(f"holding: {held}")
    parts.append(" ".join(context_lines))
    parts.append("Plan:")
    return "\n\n".join(parts)


# -- parsing ------------------------------------------------------------------

_STATEMENT = re.compile(
    r"^(?:(?P<binding>[A-Za-z_]\w*)\s*=\s*)?(?P<action>[A-Za-z_]\w*)\((?P<args>.*)\)$"
)
_IDENTIFIER = re.compile(r"^[A-Za-z_]\w*$")


def _parse_args(raw: str, line_no: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    raw = raw.strip()
    if not raw:
        return (), ()
    args: list[str] = []
    kinds: list[str] = []
    buf = ""
    in_string: Optional[str] = None
    tokens: list[str] = []
    for ch in raw:
        if in_string:
            buf += ch
            if ch == in_string:
                in_string = None
            continue
        if ch in "\"'":
            in_string = ch
            buf += ch
        elif ch == ",":
            tokens.append(buf)
            buf = ""
        else:
            buf += ch
    if in_string is not None:
        raise PlanError(f"line {line_no}: unterminated string literal")
    tokens.append(buf)
    for token in tokens:
        token = token.strip()
        if len(token) >= 2 and token[0] == token[-1] and token[0] in "\"'":
            args.append(token[1:-1])
            kinds.append("literal")
        elif _IDENTIFIER.match(token):
            args.append(token)
            kinds.append("variable")
        else:
            raise PlanError(f"line {line_no}: unparseable argument {token!r}")
    return tuple(args), tuple(kinds)


def parse_plan(text: str, allowed_actions: tuple[str, ...] = ALLOWED_ACTIONS) -> RecoveryPlan:
    """Parse a plan, skipping prose and code fences; validate names and bindings."""
    statements: list[PlanStatement] = []
    bound: set[str] = set()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith(("#", "```")):
            continue
        match = _STATEMENT.match(line)
        if not match:
            continue  # prose line
        action = match.group("action")
        binding = match.group("binding")
        if action not in allowed_actions:
            raise PlanError(f"line {line_no}: unknown action {action!r}")
        if binding and action != "ask":
            raise PlanError(f"line {line_no}: only ask() results can be bound")
        args, kinds = _parse_args(match.group("args"), line_no)
        # Bare identifiers are variables only once bound by ask(); otherwise
        # they name scene objects directly.
        kinds = tuple(
            "literal" if kind == "variable" and arg not in bound else kind
            for arg, kind in zip(args, kinds)
        )
        statements.append(PlanStatement(action, args, kinds, binding))
        if binding:
            bound.add(binding)
    return RecoveryPlan(statements, allowed_actions)


# -- execution ----------------------------------------------------------------


@dataclass
class StepRecord:
    statement: str
    status: str  # ok | refused | asked | said
    detail: str = ""


@dataclass
class ExecutionLog:
    steps: list[StepRecord] = field(default_factory=list)
    bindings: dict[str, str] = field(default_factory=dict)

    @property
    def halted(self) -> bool:
        return any(s.status == "refused" for s in self.steps)


def _is_open(scene: Scene, object_id: str) -> bool:
    return scene.get_object(object_id).states.get("open", False)


def _precondition_failure(scene: Scene, action: str, args: list[str]) -> Optional[str]:
    """First violated precondition for a physical action, rendered as 'check: reason'."""
    target = args[0] if args else ""
    if target not in scene.objects:
        return f"is_present {target}: {target!r} is not present in the scene"
    holding = scene.robot.holding
    if action == "pick":
        if holding is not None:
            return f"robot_holding none: the robot is already holding {holding!r}"
        if len(args) > 1 and args[1] in scene.objects:
            location = args[1]
            if scene.get_object(location).properties.get("openable") and not _is_open(scene, location):
                return f"is_open {location}: {location!r} is closed"
    elif action == "place":
        if holding != target:
            return f"robot_holding {target}: the robot is not holding {target!r}"
        if len(args) < 2:
            return "place requires a location argument"
        location = args[1]
        if location not in scene.objects:
            return f"is_present {location}: {location!r} is not present in the scene"
        if scene.get_object(location).properties.get("openable") and not _is_open(scene, location):
            return f"is_open {location}: {location!r} is closed"
    elif action == "open":
        if holding is not None:
            return f"robot_holding none: the robot is already holding {holding!r}"
        if not scene.get_object(target).properties.get("openable"):
            return f"is_openable {target}: {target!r} is not openable"
        if _is_open(scene, target):
            return f"is_closed {target}: {target!r} is already open"
    elif action == "close":
        if holding is not None:
            return f"robot_holding none: the robot is already holding {holding!r}"
        if not scene.get_object(target).properties.get("openable"):
            return f"is_openable {target}: {target!r} is not openable"
        if not _is_open(scene, target):
            return f"is_open {target}: {target!r} is already closed"
    return None


MOVE_CLEARANCE = 2.0  # lateral displacement applied by move(), meters


def _apply_effect(scene: Scene, action: str, args: list[str]) -> str:
    target = args[0]
    obj = scene.get_object(target)
    if action == "move":
        c = obj.box.center
        obj.box = Aabb(Vec3(c.x + MOVE_CLEARANCE, c.y, c.z), obj.box.half_extents)
        return f"moved {target} aside"
    if action == "pick":
        scene.robot.holding = target
        return f"picked {target}"
    if action == "place":
        location = scene.get_object(args[1])
        top = location.box.top + obj.box.half_extents.z
        obj.box = Aabb(
            Vec3(location.box.center.x, location.box.center.y, top), obj.box.half_extents
        )
        scene.robot.holding = None
        return f"placed {target} on {args[1]}"
    if action == "open":
        obj.states["open"] = True
        return f"opened {target}"
    if action == "close":
        obj.states["open"] = False
        return f"closed {target}"
    raise PlanError(f"no effect for action {action!r}")  # pragma: no cover


def execute_plan(
    plan: RecoveryPlan,
    scene: Scene,
    channel: InteractionChannel,
    on_step: Optional[Callable[[StepRecord], None]] = None,
    between_steps: Optional[Callable[[], None]] = None,
) -> ExecutionLog:
    """Run the plan sequentially; a refused step halts the remainder.

    `on_step` observes each StepRecord as it lands; `between_steps` runs
    before each statement (a safe point for queued scene mutations).
    """
    log = ExecutionLog()

    def record(step: StepRecord) -> None:
        log.steps.append(step)
        if on_step is not None:
            on_step(step)

    for statement in plan.statements:
        if between_steps is not None:
            between_steps()
        args = [
            log.bindings.get(a, a) if kind == "variable" else a
            for a, kind in zip(statement.args, statement.arg_kinds)
        ]
        text = statement.render()
        if statement.action == "ask":
            question = args[0] if args else ""
            answer = channel.ask(question)
            if statement.binding:
                log.bindings[statement.binding] = answer
            record(StepRecord(text, "asked", answer))
        elif statement.action == "say":
            utterance = " ".join(args)
            channel.emit(utterance)
            record(StepRecord(text, "said", utterance))
        else:
            failure = _precondition_failure(scene, statement.action, args)
            if failure is not None:
                record(StepRecord(text, "refused", failure))
                break
            detail = _apply_effect(scene, statement.action, args)
            record(StepRecord(text, "ok", detail))
    return log


# -- detect/recover driver -----------------------------------------------------


@dataclass
class StepRecoveryResult:
    query: str
    attempts: int
    resolved: bool
    outcomes: list  # AgentOutcome per detection attempt
    executions: list[ExecutionLog] = field(default_factory=list)


def run_plan_with_recovery(
    steps: list[str],
    scene: Scene,
    channel: InteractionChannel,
    detect: Callable[[str, Scene], "object"],
    plan_source: Callable[[RecoveryQuery], str],
    retries_per_step: int = 3,
) -> list[StepRecoveryResult]:
    """Drive a multi-step plan: detect issues per step, recover, re-detect.

    `detect(query, scene)` returns an AgentOutcome; `plan_source` maps a
    recovery query to plan text (typically via the recovery LLM).
    """
    results: list[StepRecoveryResult] = []
    for query in steps:
        attempts = 0
        outcomes = []
        executions: list[ExecutionLog] = []
        resolved = False
        while attempts < retries_per_step:
            attempts += 1
            outcome = detect(query, scene)
            outcomes.append(outcome)
            if outcome.label == "no_issue":
                resolved = True
                break
            recovery_query = RecoveryQuery(
                action=query,
                issue=outcome.label,
                explanation=outcome.explanation,
                held_object=scene.robot.holding,
            )
            plan = parse_plan(plan_source(recovery_query))
            executions.append(execute_plan(plan, scene, channel))
        results.append(StepRecoveryResult(query, attempts, resolved, outcomes, executions))
        if not resolved:
            break
    return results


class TimedChannel:
    """Wraps a channel with a per-question timeout (interactive frontends)."""

    def __init__(self, inner: InteractionChannel, timeout_seconds: float = 120.0):
        self.inner = inner
        self.timeout_seconds = timeout_seconds

    def ask(self, question: str) -> str:
        started = time.monotonic()
        answer = self.inner.ask(question)
        if time.monotonic() - started > self.timeout_seconds:
            raise PlanError(f"answer to {question!r} arrived after the timeout")
        return answer

    def emit(self, utterance: str) -> None:
        self.inner.emit(utterance)
