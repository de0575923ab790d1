"""Tool registry: schemas shown to the model plus grounded dispatch.

Tools are read-only views over the scene. Argument strings coming from the
model are resolved against scene ids with fuzzy matching, so calls like
``dist_robot_to_obj("adrianas_medicine")`` land on ``medicine1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from typing import Callable, Optional

from .scene import Scene, relations_for

FUZZY_THRESHOLD = 0.72
RESULT_PREFIX = "Call to tool "


@dataclass(frozen=True)
class ToolSpec:
    name: str
    arg_names: tuple[str, ...]
    description: str
    output_description: str
    profiles: tuple[str, ...]

    def render(self) -> str:
        args = ", ".join(self.arg_names)
        return f"- {self.name}({args}): {self.description} Output: {self.output_description}"


@dataclass
class ToolResult:
    tool: str
    raw_args: list[str]
    resolved_args: list[str]
    value: str
    success: bool = True

    def render(self) -> str:
        return f"{RESULT_PREFIX}{self.tool} with args {self.raw_args!r} returned {self.value}"


@dataclass
class ToolCall:
    """A parsed call_tool expression (or a recorded parse failure)."""

    tool: str
    args: list[str] = field(default_factory=list)
    span: tuple[int, int] = (0, 0)
    parse_error: Optional[str] = None


def fold_name(raw: str) -> str:
    return re.sub(r"[\s_\-]+", " ", raw.strip().lower())


def similarity(a: str, b: str) -> float:
    """Normalized similarity after separator folding.

    Uses the best substring alignment of the shorter string inside the
    longer one, so qualified names ("adrianas medicine") still match their
    bare object id ("medicine1").
    """
    a, b = fold_name(a), fold_name(b)
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0
    short, long = (a, b) if len(a) <= len(b) else (b, a)
    best = SequenceMatcher(None, a, b).ratio()
    for start in range(len(long) - len(short) + 1):
        window = long[start : start + len(short)]
        best = max(best, SequenceMatcher(None, short, window).ratio())
    return best


def resolve_argument(
    raw: str, candidates: list[str], threshold: float = FUZZY_THRESHOLD
) -> Optional[str]:
    """Best-matching candidate id, or None below the threshold.

    Exact matches win; ties break lexicographically.
    """
    if raw in candidates:
        return raw
    scored = sorted(
        ((similarity(raw, c), c) for c in candidates), key=lambda t: (-t[0], t[1])
    )
    if scored and scored[0][0] >= threshold:
        return scored[0][1]
    return None


def _format_length(value: float, suffix: str = "") -> str:
    # Transcript rendering: two decimals with trailing zeros trimmed ("0.6").
    return f"{round(value, 2):g}{suffix}"


# -- user information retrieval --------------------------------------------


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text.lower())


def token_cosine(a: str, b: str) -> float:
    ta, tb = _tokenize(a), _tokenize(b)
    if not ta or not tb:
        return 0.0
    ca: dict[str, int] = {}
    cb: dict[str, int] = {}
    for t in ta:
        ca[t] = ca.get(t, 0) + 1
    for t in tb:
        cb[t] = cb.get(t, 0) + 1
    dot = sum(ca[t] * cb.get(t, 0) for t in ca)
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    return dot / (na * nb)


def retrieve_user_information(
    query: str,
    corpus: list[str],
    scorer: Callable[[str, str], float] = token_cosine,
) -> str:
    """Corpus statement most similar to the query (ties: corpus order)."""
    if not corpus:
        raise ValueError("user information corpus is empty")
    best_score, best = -1.0, corpus[0]
    for statement in corpus:
        score = scorer(query, statement)
        if score > best_score:
            best_score, best = score, statement
    return best


# -- registry ---------------------------------------------------------------

PROFILE_LABELS = ("household", "assistive", "user_prefs")

_SPECS = [
    ToolSpec(
        "object_detection", (),
        "Detects all objects present in the scene.",
        "List of detected object names.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "get_object_state", ("obj",),
        "Returns the current states of the given object (e.g. open, on, sliced).",
        "Mapping of state labels to booleans.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "get_object_properties", ("obj",),
        "Returns the properties of the given object (e.g. openable, toggleable).",
        "Mapping of property labels to booleans.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "get_spatial_relations", ("obj",),
        "Returns the spatial relations of the given object with other objects.",
        "List of relation statements.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "dist_robot_to_obj", ("obj",),
        "Returns the distance from the robot to the given object.",
        "Distance in meters.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "dist_between_objs", ("obj1", "obj2"),
        "Returns the distance between two objects.",
        "Distance in meters.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "robot_holding", (),
        "Returns the object currently held by the robot, if any.",
        "Held object name or None.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "check_free_path", ("target",),
        "Checks whether the path from the robot to the target is free.",
        "True if the path is free, False otherwise.",
        ("household", "assistive", "user_prefs"),
    ),
    ToolSpec(
        "recognize_humans", (),
        "Recognizes the humans present in the scene.",
        "List of recognized names; '-1' for unrecognized humans.",
        ("assistive",),
    ),
    ToolSpec(
        "detect_human_gaze", ("person",),
        "Checks whether the given person is looking at the robot.",
        "True if the person gazes at the robot, False otherwise.",
        ("assistive",),
    ),
    ToolSpec(
        "human_hands_free", ("person",),
        "Checks whether the given person has their hands free.",
        "True if hands are free, False otherwise.",
        ("assistive",),
    ),
    ToolSpec(
        "dist_robot_to_human", ("person",),
        "Returns the distance from the robot to the given person.",
        "Distance in meters.",
        ("assistive",),
    ),
    ToolSpec(
        "retrieve_user_information", ("query",),
        "Retrieves the most relevant stored statement about the user for the query.",
        "A single statement about the user.",
        ("user_prefs",),
    ),
]


@dataclass(frozen=True)
class ToolsetProfile:
    label: str
    members: tuple[str, ...]


class ToolRegistry:
    """Immutable after construction; safe for concurrent reads."""

    def __init__(
        self,
        user_corpus: Optional[list[str]] = None,
        fuzzy_threshold: float = FUZZY_THRESHOLD,
        user_scorer: Callable[[str, str], float] = token_cosine,
    ):
        self.specs: dict[str, ToolSpec] = {s.name: s for s in _SPECS}
        self.user_corpus = list(user_corpus or [])
        self.fuzzy_threshold = fuzzy_threshold
        self.user_scorer = user_scorer

    def profile(self, label: str) -> ToolsetProfile:
        if label not in PROFILE_LABELS:
            raise ValueError(f"unknown toolset profile {label!r}")
        members = tuple(s.name for s in _SPECS if label in s.profiles)
        return ToolsetProfile(label, members)

    def render_tool_descriptions(self, profile: ToolsetProfile) -> str:
        return "\n".join(self.specs[name].render() for name in profile.members)

    def is_registered(self, name: str, profile: ToolsetProfile) -> bool:
        return name in profile.members

    def resolve_object(self, raw: str, scene: Scene) -> Optional[str]:
        return resolve_argument(raw, scene.object_ids(), self.fuzzy_threshold)

    def resolve_human(self, raw: str, scene: Scene) -> Optional[str]:
        names = [h.name for h in scene.humans if h.recognized]
        return resolve_argument(raw, names, self.fuzzy_threshold)

    def invoke(self, call: ToolCall, scene: Scene) -> ToolResult:
        """Dispatch one parsed call against the scene. Never mutates it."""
        if call.parse_error is not None:
            return ToolResult(call.tool, call.args, [], f"parse error: {call.parse_error}", False)
        spec = self.specs.get(call.tool)
        if spec is None:
            return ToolResult(call.tool, call.args, [], f"unknown tool {call.tool!r}", False)
        if len(call.args) != len(spec.arg_names):
            return ToolResult(
                call.tool, call.args, [],
                f"expected {len(spec.arg_names)} argument(s), got {len(call.args)}",
                False,
            )
        try:
            return self._dispatch(spec, call, scene)
        except Exception as exc:  # scene errors become Warning-3 material
            return ToolResult(call.tool, call.args, [], str(exc), False)

    def _need_object(self, call: ToolCall, scene: Scene, raw: str) -> str:
        resolved = self.resolve_object(raw, scene)
        if resolved is None:
            raise ValueError(f"no object matching {raw!r}")
        return resolved

    def _need_human(self, call: ToolCall, scene: Scene, raw: str) -> str:
        resolved = self.resolve_human(raw, scene)
        if resolved is None:
            raise ValueError(f"no recognized person matching {raw!r}")
        return resolved

    def _dispatch(self, spec: ToolSpec, call: ToolCall, scene: Scene) -> ToolResult:
        name, args = spec.name, call.args
        resolved: list[str] = []

        if name == "object_detection":
            value = repr(scene.object_ids())
        elif name == "get_object_state":
            obj = self._need_object(call, scene, args[0])
            resolved = [obj]
            value = repr(scene.get_object(obj).states)
        elif name == "get_object_properties":
            obj = self._need_object(call, scene, args[0])
            resolved = [obj]
            value = repr(scene.get_object(obj).properties)
        elif name == "get_spatial_relations":
            obj = self._need_object(call, scene, args[0])
            resolved = [obj]
            value = repr([r.phrase() for r in relations_for(scene, obj)])
        elif name == "dist_robot_to_obj":
            obj = self._need_object(call, scene, args[0])
            resolved = [obj]
            value = _format_length(scene.distance_robot_to(obj))
        elif name == "dist_between_objs":
            a = self._need_object(call, scene, args[0])
            b = self._need_object(call, scene, args[1])
            resolved = [a, b]
            value = _format_length(scene.distance_between(a, b))
        elif name == "robot_holding":
            value = repr(scene.robot.holding) if scene.robot.holding is None else scene.robot.holding
        elif name == "check_free_path":
            obj = self._need_object(call, scene, args[0])
            resolved = [obj]
            value = str(scene.check_free_path(obj))
        elif name == "recognize_humans":
            value = repr([h.reported_name for h in scene.humans])
        elif name == "detect_human_gaze":
            person = self._need_human(call, scene, args[0])
            resolved = [person]
            value = str(scene.get_human(person).gaze_at_robot)
        elif name == "human_hands_free":
            person = self._need_human(call, scene, args[0])
            resolved = [person]
            value = str(scene.get_human(person).hands_free)
        elif name == "dist_robot_to_human":
            person = self._need_human(call, scene, args[0])
            resolved = [person]
            value = _format_length(scene.distance_robot_to_human(person), suffix="m")
        elif name == "retrieve_user_information":
            value = retrieve_user_information(args[0], self.user_corpus, self.user_scorer)
        else:  # pragma: no cover - every registered spec is dispatched above
            raise ValueError(f"no dispatcher for tool {name!r}")

        return ToolResult(name, list(args), resolved, value)
