"""Ground-truth simulated scene backing every tool the agent can call.

A scene is loaded from a single JSON document (see ``docs`` section in the
README for the schema) and owns objects, the robot state, humans and
annotations. Mutations are applied atomically so queries always observe a
consistent world.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .geometry import Aabb, Vec3, segment_rect_distance_2d

UNRECOGNIZED_NAME = "-1"
EMPTY_SCENE_TEXT = "No objects detected."

DEFAULT_REACH = 1.1
DEFAULT_BODY_RADIUS = 0.3

RELATION_LABELS = (
    "inside",
    "on_top_of",
    "left_of",
    "right_of",
    "above",
    "below",
    "occluding",
    "near",
)

# Thresholds for the spatial relation heuristics. Declared values; see README.
NEAR_DISTANCE = 0.5
INSIDE_VOLUME_FRACTION = 0.8
ON_TOP_FOOTPRINT_FRACTION = 0.5
ON_TOP_CONTACT_TOLERANCE = 0.02
OCCLUSION_OVERLAP_FRACTION = 0.3


class SceneError(ValueError):
    """Raised for malformed scene documents or invalid mutations."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class ObjectInstance:
    id: str
    display_name: str
    box: Aabb
    states: dict[str, bool] = field(default_factory=dict)
    properties: dict[str, bool] = field(default_factory=dict)

    def validate(self) -> None:
        shared = set(self.states) & set(self.properties)
        if shared:
            raise SceneError(
                f"state labels overlap property labels: {sorted(shared)}",
                path=f"objects[{self.id}]",
            )


@dataclass
class RobotState:
    position: Vec3
    reach: float = DEFAULT_REACH
    body_radius: float = DEFAULT_BODY_RADIUS
    holding: Optional[str] = None

    def validate(self) -> None:
        if self.reach <= 0:
            raise SceneError(f"reach must be > 0, got {self.reach}", path="robot.reach")
        if self.body_radius <= 0:
            raise SceneError(
                f"body_radius must be > 0, got {self.body_radius}", path="robot.body_radius"
            )


@dataclass
class HumanState:
    name: str
    position: Vec3
    gaze_at_robot: bool = False
    hands_free: bool = True
    recognized: bool = True

    @property
    def reported_name(self) -> str:
        return self.name if self.recognized else UNRECOGNIZED_NAME


@dataclass(frozen=True)
class SpatialRelation:
    subject: str
    relation: str
    object: str

    def __post_init__(self) -> None:
        if self.relation not in RELATION_LABELS:
            raise ValueError(f"unknown relation label {self.relation!r}")
        if self.subject == self.object:
            raise ValueError("subject and object must differ")

    def phrase(self) -> str:
        words = self.relation.replace("_", " ")
        return f"{self.subject} is {words} {self.object}"


MUTATION_KINDS = (
    "move_object",
    "set_state",
    "remove_object",
    "add_object",
    "set_human_field",
    "set_robot_holding",
)


@dataclass
class SceneMutation:
    kind: str
    payload: dict

    def __post_init__(self) -> None:
        if self.kind not in MUTATION_KINDS:
            raise SceneError(f"unknown mutation kind {self.kind!r}", path="mutation.kind")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneMutation":
        if "kind" not in d:
            raise SceneError("missing 'kind'", path="mutation")
        return cls(d["kind"], {k: v for k, v in d.items() if k != "kind"})


class Scene:
    """Mutable ground-truth world. One instance per session; never shared."""

    def __init__(
        self,
        objects: list[ObjectInstance],
        robot: RobotState,
        humans: Optional[list[HumanState]] = None,
        blocked_paths: Optional[set[str]] = None,
    ):
        self.objects: dict[str, ObjectInstance] = {}
        for obj in objects:
            if obj.id in self.objects:
                raise SceneError(f"duplicate object id {obj.id!r}", path=f"objects[{obj.id}]")
            obj.validate()
            self.objects[obj.id] = obj
        self.robot = robot
        self.robot.validate()
        self.humans: list[HumanState] = list(humans or [])
        self.blocked_paths: set[str] = set(blocked_paths or ())
        if self.robot.holding is not None and self.robot.holding not in self.objects:
            raise SceneError(
                f"robot holds unknown object {self.robot.holding!r}", path="robot.holding"
            )

    # -- lookup ---------------------------------------------------------

    def object_ids(self) -> list[str]:
        return list(self.objects.keys())

    def get_object(self, object_id: str) -> ObjectInstance:
        try:
            return self.objects[object_id]
        except KeyError:
            raise SceneError(f"unknown object id {object_id!r}") from None

    def get_human(self, name: str) -> HumanState:
        for h in self.humans:
            if h.name == name:
                return h
        raise SceneError(f"unknown human {name!r}")

    def copy(self) -> "Scene":
        return copy.deepcopy(self)

    # -- geometric queries ----------------------------------------------

    def distance_robot_to(self, object_id: str) -> float:
        obj = self.get_object(object_id)
        return obj.box.distance_to_point(self.robot.position)

    def distance_between(self, a: str, b: str) -> float:
        if a == b:
            self.get_object(a)
            return 0.0
        return self.get_object(a).box.distance_to_box(self.get_object(b).box)

    def distance_robot_to_human(self, name: str) -> float:
        return self.robot.position.distance_to(self.get_human(name).position)

    def check_free_path(self, target: str, body_radius: Optional[float] = None) -> bool:
        """True iff nothing blocks the 2D robot->target segment.

        An explicit blocked-path annotation for the target always wins over
        the geometric test.
        """
        target_obj = self.get_object(target)
        if target in self.blocked_paths:
            return False
        radius = self.robot.body_radius if body_radius is None else body_radius
        ax, ay = self.robot.position.x, self.robot.position.y
        bx, by = target_obj.box.center.x, target_obj.box.center.y
        for obj in self.objects.values():
            if obj.id == target or obj.id == self.robot.holding:
                continue
            if segment_rect_distance_2d(ax, ay, bx, by, obj.box) < radius:
                return False
        return True

    # -- mutation ---------------------------------------------------------

    def apply_mutation(self, m: SceneMutation) -> None:
        p = m.payload
        if m.kind == "move_object":
            obj = self.get_object(p["id"])
            obj.box = Aabb(Vec3.from_list(p["position"]), obj.box.half_extents)
        elif m.kind == "set_state":
            obj = self.get_object(p["id"])
            obj.states[p["state"]] = bool(p["value"])
            obj.validate()
        elif m.kind == "remove_object":
            self.get_object(p["id"])
            if self.robot.holding == p["id"]:
                raise SceneError(f"cannot remove held object {p['id']!r}")
            del self.objects[p["id"]]
        elif m.kind == "add_object":
            obj = _object_from_dict(p["object"], index=len(self.objects))
            if obj.id in self.objects:
                raise SceneError(f"duplicate object id {obj.id!r}")
            obj.validate()
            self.objects[obj.id] = obj
        elif m.kind == "set_human_field":
            human = self.get_human(p["name"])
            if p["field"] == "position":
                human.position = Vec3.from_list(p["value"])
            elif p["field"] in ("gaze_at_robot", "hands_free", "recognized"):
                setattr(human, p["field"], bool(p["value"]))
            else:
                raise SceneError(f"unknown human field {p['field']!r}")
        elif m.kind == "set_robot_holding":
            held = p.get("id")
            if held is not None:
                self.get_object(held)
            self.robot.holding = held

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "objects": [
                {
                    "id": o.id,
                    "name": o.display_name,
                    "box": o.box.to_dict(),
                    "states": dict(o.states),
                    "properties": dict(o.properties),
                }
                for o in self.objects.values()
            ],
            "robot": {
                "position": self.robot.position.to_list(),
                "reach": self.robot.reach,
                "body_radius": self.robot.body_radius,
                "holding": self.robot.holding,
            },
            "humans": [
                {
                    "name": h.name,
                    "position": h.position.to_list(),
                    "gaze_at_robot": h.gaze_at_robot,
                    "hands_free": h.hands_free,
                    "recognized": h.recognized,
                }
                for h in self.humans
            ],
            "annotations": {"blocked_paths": sorted(self.blocked_paths)},
        }


def _object_from_dict(d: dict, index: int) -> ObjectInstance:
    path = f"objects[{index}]"
    if "id" not in d:
        raise SceneError("missing 'id'", path=path)
    if "box" not in d:
        raise SceneError("missing 'box'", path=f"objects[{d['id']}]")
    try:
        box = Aabb.from_dict(d["box"])
    except (KeyError, ValueError, TypeError) as exc:
        raise SceneError(str(exc), path=f"objects[{d['id']}].box") from exc
    return ObjectInstance(
        id=str(d["id"]),
        display_name=str(d.get("name", d["id"])),
        box=box,
        states={str(k): bool(v) for k, v in d.get("states", {}).items()},
        properties={str(k): bool(v) for k, v in d.get("properties", {}).items()},
    )


def load_scene(document: str | dict | Path) -> Scene:
    """Parse and validate a scene document (JSON text, dict, or file path)."""
    if isinstance(document, Path):
        document = document.read_text()
    if isinstance(document, str):
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SceneError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    else:
        data = document
    if not isinstance(data, dict):
        raise SceneError("top level must be an object")
    if "robot" not in data:
        raise SceneError("missing 'robot'", path="robot")

    objects = [_object_from_dict(d, i) for i, d in enumerate(data.get("objects", []))]

    r = data["robot"]
    try:
        robot = RobotState(
            position=Vec3.from_list(r["position"]),
            reach=float(r.get("reach", DEFAULT_REACH)),
            body_radius=float(r.get("body_radius", DEFAULT_BODY_RADIUS)),
            holding=r.get("holding"),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise SceneError(str(exc), path="robot") from exc

    humans = []
    for i, h in enumerate(data.get("humans", [])):
        try:
            humans.append(
                HumanState(
                    name=str(h["name"]),
                    position=Vec3.from_list(h["position"]),
                    gaze_at_robot=bool(h.get("gaze_at_robot", False)),
                    hands_free=bool(h.get("hands_free", True)),
                    recognized=bool(h.get("recognized", True)),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SceneError(str(exc), path=f"humans[{i}]") from exc

    blocked = set(data.get("annotations", {}).get("blocked_paths", []))
    scene = Scene(objects, robot, humans, blocked)
    for target in blocked:
        if target not in scene.objects:
            raise SceneError(
                f"blocked_paths names unknown object {target!r}", path="annotations.blocked_paths"
            )
    return scene


# -- spatial relations ----------------------------------------------------


def _angular_interval(box: Aabb, px: float, py: float) -> Optional[tuple[float, float]]:
    """Angular extent of the box footprint seen from (px, py), or None if inside."""
    lo, hi = box.min_corner, box.max_corner
    if lo.x <= px <= hi.x and lo.y <= py <= hi.y:
        return None
    angles = [
        math.atan2(cy - py, cx - px)
        for cx, cy in ((lo.x, lo.y), (hi.x, lo.y), (hi.x, hi.y), (lo.x, hi.y))
    ]
    ref = angles[0]
    rel = [(a - ref + math.pi) % (2 * math.pi) - math.pi for a in angles]
    return ref + min(rel), ref + max(rel)


def _interval_overlap(a: tuple[float, float], b: tuple[float, float]) -> float:
    # Compare on a common branch; shift b by whole turns to best align with a.
    best = 0.0
    for k in (-1, 0, 1):
        lo = max(a[0], b[0] + 2 * math.pi * k)
        hi = min(a[1], b[1] + 2 * math.pi * k)
        best = max(best, hi - lo)
    return max(0.0, best)


def compute_relations(scene: Scene) -> set[SpatialRelation]:
    """All pairwise spatial relations under the fixed thresholds."""
    rels: set[SpatialRelation] = set()
    objs = list(scene.objects.values())
    px, py = scene.robot.position.x, scene.robot.position.y
    for a in objs:
        for b in objs:
            if a.id == b.id:
                continue
            box_a, box_b = a.box, b.box

            if box_a.distance_to_box(box_b) < NEAR_DISTANCE:
                rels.add(SpatialRelation(a.id, "near", b.id))

            inside = box_a.overlap_volume(box_b) / box_a.volume() >= INSIDE_VOLUME_FRACTION
            if inside:
                rels.add(SpatialRelation(a.id, "inside", b.id))

            footprint_frac = box_a.footprint_overlap_area(box_b) / box_a.footprint_area()
            if (
                not inside
                and footprint_frac >= ON_TOP_FOOTPRINT_FRACTION
                and abs(box_a.bottom - box_b.top) <= ON_TOP_CONTACT_TOLERANCE
            ):
                rels.add(SpatialRelation(a.id, "on_top_of", b.id))

            if box_a.vertical_overlap(box_b) > 0:
                if box_a.center.x < box_b.center.x:
                    rels.add(SpatialRelation(a.id, "left_of", b.id))
                elif box_a.center.x > box_b.center.x:
                    rels.add(SpatialRelation(a.id, "right_of", b.id))

            if box_a.footprint_overlap_area(box_b) > 0:
                if box_a.center.z > box_b.center.z:
                    rels.add(SpatialRelation(a.id, "above", b.id))
                elif box_a.center.z < box_b.center.z:
                    rels.add(SpatialRelation(a.id, "below", b.id))

            ia = _angular_interval(box_a, px, py)
            ib = _angular_interval(box_b, px, py)
            if ia and ib and (ib[1] - ib[0]) > 0:
                overlap = _interval_overlap(ia, ib)
                nearer = box_a.distance_to_point(scene.robot.position) < box_b.distance_to_point(
                    scene.robot.position
                )
                if nearer and overlap / (ib[1] - ib[0]) >= OCCLUSION_OVERLAP_FRACTION:
                    rels.add(SpatialRelation(a.id, "occluding", b.id))
    return rels


def relations_for(scene: Scene, object_id: str) -> list[SpatialRelation]:
    scene.get_object(object_id)
    rels = [r for r in compute_relations(scene) if r.subject == object_id]
    return sorted(rels, key=lambda r: (r.relation, r.object))


def describe_scene(scene: Scene) -> str:
    """Deterministic full textual scene listing (feeds the visual-obs baseline)."""
    if not scene.objects:
        return EMPTY_SCENE_TEXT
    lines = []
    relations = sorted(
        compute_relations(scene), key=lambda r: (r.subject, r.relation, r.object)
    )
    by_subject: dict[str, list[SpatialRelation]] = {}
    for r in relations:
        by_subject.setdefault(r.subject, []).append(r)
    for obj in scene.objects.values():
        states = ", ".join(k for k, v in sorted(obj.states.items()) if v) or "none"
        props = ", ".join(k for k, v in sorted(obj.properties.items()) if v) or "none"
        lines.append(f"{obj.id}: states: {states}; properties: {props}")
        for r in by_subject.get(obj.id, []):
            lines.append(f"  {r.phrase()}")
    holding = scene.robot.holding if scene.robot.holding else "nothing"
    lines.append(f"The robot is holding {holding}.")
    if scene.humans:
        names = ", ".join(h.reported_name for h in scene.humans)
        lines.append(f"Humans present: {names}.")
    return "\n".join(lines)
