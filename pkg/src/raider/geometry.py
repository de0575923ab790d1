"""Axis-aligned geometry used by the simulated scene.

All lengths are in meters. The scene convention is x = robot's right,
y = forward (depth), z = up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"non-finite component in Vec3: {c!r}")

    @classmethod
    def from_list(cls, values: list[float]) -> "Vec3":
        if len(values) != 3:
            raise ValueError(f"expected 3 components, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    def distance_to(self, other: "Vec3") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by center and strictly positive half extents."""

    center: Vec3
    half_extents: Vec3

    def __post_init__(self) -> None:
        h = self.half_extents
        if h.x <= 0 or h.y <= 0 or h.z <= 0:
            raise ValueError(f"half_extents must be strictly positive, got {h}")

    @classmethod
    def from_dict(cls, d: dict) -> "Aabb":
        return cls(Vec3.from_list(d["center"]), Vec3.from_list(d["half_extents"]))

    def to_dict(self) -> dict:
        return {"center": self.center.to_list(), "half_extents": self.half_extents.to_list()}

    @property
    def min_corner(self) -> Vec3:
        return Vec3(
            self.center.x - self.half_extents.x,
            self.center.y - self.half_extents.y,
            self.center.z - self.half_extents.z,
        )

    @property
    def max_corner(self) -> Vec3:
        return Vec3(
            self.center.x + self.half_extents.x,
            self.center.y + self.half_extents.y,
            self.center.z + self.half_extents.z,
        )

    @property
    def bottom(self) -> float:
        return self.center.z - self.half_extents.z

    @property
    def top(self) -> float:
        return self.center.z + self.half_extents.z

    def volume(self) -> float:
        h = self.half_extents
        return 8.0 * h.x * h.y * h.z

    def footprint_area(self) -> float:
        return 4.0 * self.half_extents.x * self.half_extents.y

    def contains_point(self, p: Vec3) -> bool:
        lo, hi = self.min_corner, self.max_corner
        return lo.x <= p.x <= hi.x and lo.y <= p.y <= hi.y and lo.z <= p.z <= hi.z

    def distance_to_point(self, p: Vec3) -> float:
        dx = max(0.0, abs(p.x - self.center.x) - self.half_extents.x)
        dy = max(0.0, abs(p.y - self.center.y) - self.half_extents.y)
        dz = max(0.0, abs(p.z - self.center.z) - self.half_extents.z)
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def distance_to_box(self, other: "Aabb") -> float:
        gaps = []
        for axis in ("x", "y", "z"):
            c1, h1 = getattr(self.center, axis), getattr(self.half_extents, axis)
            c2, h2 = getattr(other.center, axis), getattr(other.half_extents, axis)
            gaps.append(max(0.0, abs(c1 - c2) - h1 - h2))
        return math.sqrt(sum(g * g for g in gaps))

    def overlap_volume(self, other: "Aabb") -> float:
        v = 1.0
        for axis in ("x", "y", "z"):
            lo = max(
                getattr(self.center, axis) - getattr(self.half_extents, axis),
                getattr(other.center, axis) - getattr(other.half_extents, axis),
            )
            hi = min(
                getattr(self.center, axis) + getattr(self.half_extents, axis),
                getattr(other.center, axis) + getattr(other.half_extents, axis),
            )
            if hi <= lo:
                return 0.0
            v *= hi - lo
        return v

    def footprint_overlap_area(self, other: "Aabb") -> float:
        a = 1.0
        for axis in ("x", "y"):
            lo = max(
                getattr(self.center, axis) - getattr(self.half_extents, axis),
                getattr(other.center, axis) - getattr(other.half_extents, axis),
            )
            hi = min(
                getattr(self.center, axis) + getattr(self.half_extents, axis),
                getattr(other.center, axis) + getattr(other.half_extents, axis),
            )
            if hi <= lo:
                return 0.0
            a *= hi - lo
        return a

    def vertical_overlap(self, other: "Aabb") -> float:
        lo = max(self.bottom, other.bottom)
        hi = min(self.top, other.top)
        return max(0.0, hi - lo)


def _segment_point_distance_2d(ax: float, ay: float, bx: float, by: float,
                               px: float, py: float) -> float:
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    if L2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * vx + (py - ay) * vy) / L2))
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def _segments_intersect_2d(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def segment_rect_distance_2d(ax: float, ay: float, bx: float, by: float,
                             rect: Aabb) -> float:
    """Minimum distance between the 2D segment (a, b) and rect's xy footprint."""
    lo, hi = rect.min_corner, rect.max_corner

    def inside(px: float, py: float) -> bool:
        return lo.x <= px <= hi.x and lo.y <= py <= hi.y

    if inside(ax, ay) or inside(bx, by):
        return 0.0
    corners = [(lo.x, lo.y), (hi.x, lo.y), (hi.x, hi.y), (lo.x, hi.y)]
    edges = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    for e1, e2 in edges:
        if _segments_intersect_2d((ax, ay), (bx, by), e1, e2):
            return 0.0
    best = math.inf
    for (cx, cy) in corners:
        best = min(best, _segment_point_distance_2d(ax, ay, bx, by, cx, cy))
    # Segment endpoints against the rectangle edges.
    for (e1, e2) in edges:
        for (px, py) in ((ax, ay), (bx, by)):
            best = min(best, _segment_point_distance_2d(e1[0], e1[1], e2[0], e2[1], px, py))
    return best
