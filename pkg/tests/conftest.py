"""Shared builders for scene fixtures used across the test modules."""

from __future__ import annotations

from raider.scene import Scene, load_scene


def obj(
    id: str,
    center,
    half=(0.05, 0.05, 0.05),
    states=None,
    properties=None,
    name=None,
) -> dict:
    return {
        "id": id,
        "name": name or id,
        "box": {"center": list(center), "half_extents": list(half)},
        "states": states or {},
        "properties": properties or {},
    }


def human(name, position, gaze_at_robot=True, hands_free=True, recognized=True) -> dict:
    return {
        "name": name,
        "position": list(position),
        "gaze_at_robot": gaze_at_robot,
        "hands_free": hands_free,
        "recognized": recognized,
    }


def scene_dict(objects, robot=None, humans=None, annotations=None) -> dict:
    return {
        "objects": list(objects),
        "robot": robot
        or {"position": [0.0, 0.0, 0.0], "reach": 1.1, "body_radius": 0.3, "holding": None},
        "humans": humans or [],
        "annotations": annotations or {"blocked_paths": []},
    }


def build_scene(objects, robot=None, humans=None, annotations=None) -> Scene:
    return load_scene(scene_dict(objects, robot, humans, annotations))
