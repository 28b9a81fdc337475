"""Oriented-rectangle and polygon algebra in world coordinates (meters).

Everything here is pure. Angles are degrees measured from the east axis;
oriented rectangles carry angles in [-90, 90). Panel/table angle averaging
uses circular means with period 90 degrees (rectangle symmetry), which avoids
the wrap artifacts naive averaging hits near the fold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import shapely
import shapely.geometry

from .errors import DegenerateGeometryError


def _fold_angle(angle_deg: float, period: float = 180.0) -> float:
    """Fold an angle into [-period/2, period/2)."""
    a = math.fmod(angle_deg + period / 2.0, period)
    if a < 0:
        a += period
    return a - period / 2.0


def angle_residual(a_deg: float, b_deg: float, period: float = 90.0) -> float:
    """Signed smallest rotation taking b to a, modulo the given symmetry."""
    return _fold_angle(a_deg - b_deg, period)


def circular_mean(angles_deg: Iterable[float], period: float = 90.0) -> float:
    """Circular mean of angles under a rotational symmetry (default 90 deg)."""
    angles = list(angles_deg)
    if not angles:
        raise ValueError("circular_mean of empty sequence")
    k = 360.0 / period
    s = sum(math.sin(math.radians(a * k)) for a in angles)
    c = sum(math.cos(math.radians(a * k)) for a in angles)
    if abs(s) < 1e-12 and abs(c) < 1e-12:
        # Antipodal inputs; fall back to the first angle's fold.
        return _fold_angle(angles[0], period)
    return _fold_angle(math.degrees(math.atan2(s, c)) / k, period)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon: open exterior ring, counter-clockwise, no holes."""

    ring: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        pts = [tuple(map(float, p)) for p in self.ring]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(set(pts)) < 3:
            raise DegenerateGeometryError("polygon needs >= 3 distinct vertices")
        if _shoelace(pts) < 0:
            pts.reverse()
        if _shoelace(pts) <= 0:
            raise DegenerateGeometryError("polygon area must be > 0")
        object.__setattr__(self, "ring", tuple(pts))

    @cached_property
    def shape(self) -> shapely.geometry.Polygon:
        return shapely.geometry.Polygon(self.ring)

    @property
    def area(self) -> float:
        return _shoelace(self.ring)

    @property
    def centroid(self) -> Tuple[float, float]:
        c = self.shape.centroid
        return (c.x, c.y)

    def contains_point(self, x: float, y: float) -> bool:
        """Point-in-polygon; boundary points count as inside."""
        return bool(self.shape.covers(shapely.geometry.Point(x, y)))

    def is_simple(self) -> bool:
        return bool(self.shape.is_valid)

    def rounded(self, ndigits: int = 9) -> Tuple[Tuple[float, float], ...]:
        return tuple((round(x, ndigits), round(y, ndigits)) for x, y in self.ring)


def _shoelace(pts: Sequence[Tuple[float, float]]) -> float:
    area = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return area / 2.0


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle by center, dimensions, and rotation from the east axis."""

    cx: float
    cy: float
    width: float
    height: float
    angle_deg: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DegenerateGeometryError(
                f"rect dims must be > 0, got {self.width}x{self.height}"
            )
        object.__setattr__(self, "angle_deg", _fold_angle(float(self.angle_deg), 180.0))

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def corners(self) -> np.ndarray:
        """(4, 2) corner array, counter-clockwise."""
        ca = math.cos(math.radians(self.angle_deg))
        sa = math.sin(math.radians(self.angle_deg))
        hw, hh = self.width / 2.0, self.height / 2.0
        local = np.array([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)])
        rot = np.array([(ca, -sa), (sa, ca)])
        return local @ rot.T + np.array([self.cx, self.cy])

    def polygon(self) -> Polygon:
        return Polygon(tuple(map(tuple, self.corners())))

    def with_angle(self, angle_deg: float) -> "OrientedRect":
        return OrientedRect(self.cx, self.cy, self.width, self.height, angle_deg)

    def canonical(self) -> "OrientedRect":
        """Same rectangle with its long side as the width.

        (w, h, a) and (h, w, a+90) describe one rectangle; downstream grid
        fitting needs a single convention, so the longer extent wins.
        """
        if self.height > self.width:
            return OrientedRect(self.cx, self.cy, self.height, self.width,
                                self.angle_deg + 90.0)
        return self

    def inset(self, margin: float) -> Optional["OrientedRect"]:
        """Shrink inward by margin on every side; None when it collapses."""
        if margin < 0:
            raise ValueError("margin must be >= 0")
        w = self.width - 2.0 * margin
        h = self.height - 2.0 * margin
        if w <= 0 or h <= 0:
            return None
        return OrientedRect(self.cx, self.cy, w, h, self.angle_deg)

    def to_local(self, x, y):
        """World -> rect-local coordinates (u along width, v along height)."""
        ca = math.cos(math.radians(self.angle_deg))
        sa = math.sin(math.radians(self.angle_deg))
        dx = np.asarray(x) - self.cx
        dy = np.asarray(y) - self.cy
        return dx * ca + dy * sa, -dx * sa + dy * ca

    def from_local(self, u, v):
        ca = math.cos(math.radians(self.angle_deg))
        sa = math.sin(math.radians(self.angle_deg))
        return (self.cx + np.asarray(u) * ca - np.asarray(v) * sa,
                self.cy + np.asarray(u) * sa + np.asarray(v) * ca)


# ---------------------------------------------------------------------------
# Minimum-area enclosing rectangle (convex hull + rotating calipers)
# ---------------------------------------------------------------------------

def convex_hull(points: Sequence[Tuple[float, float]]) -> list[Tuple[float, float]]:
    """Andrew's monotone chain; returns CCW hull without the closing vertex."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def min_area_rect(points: Sequence[Tuple[float, float]]) -> OrientedRect:
    """Smallest-area rectangle enclosing the points.

    The optimum has a side collinear with a convex-hull edge, so only hull
    edge directions are tested. Raises for collinear input.
    """
    hull = convex_hull(points)
    if len(hull) < 3:
        raise DegenerateGeometryError("min_area_rect needs >= 3 non-collinear points")
    hp = np.asarray(hull)
    best = None
    n = len(hull)
    for i in range(n):
        ex = hp[(i + 1) % n] - hp[i]
        theta = math.atan2(ex[1], ex[0])
        ca, sa = math.cos(-theta), math.sin(-theta)
        xs = hp[:, 0] * ca - hp[:, 1] * sa
        ys = hp[:, 0] * sa + hp[:, 1] * ca
        w = xs.max() - xs.min()
        h = ys.max() - ys.min()
        area = w * h
        if best is None or area < best[0] - 1e-15:
            mx = (xs.max() + xs.min()) / 2.0
            my = (ys.max() + ys.min()) / 2.0
            # Rotate the rotated-frame center back to world coordinates.
            cx = mx * math.cos(theta) - my * math.sin(theta)
            cy = mx * math.sin(theta) + my * math.cos(theta)
            best = (area, cx, cy, w, h, math.degrees(theta))
    _, cx, cy, w, h, ang = best
    return OrientedRect(cx, cy, w, h, ang)


# ---------------------------------------------------------------------------
# Polygon set operations
# ---------------------------------------------------------------------------

def polygon_iou(a: Polygon, b: Polygon) -> float:
    """Intersection area over union area, in [0, 1]."""
    inter = a.shape.intersection(b.shape).area
    if inter <= 0.0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def inset_polygon(p: Polygon, margin: float) -> Optional[Polygon]:
    """Negative (inward) offset by margin; None when the polygon collapses.

    If the offset splits the polygon, the largest piece is kept.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if margin == 0:
        return p
    shrunk = p.shape.buffer(-margin, join_style="mitre")
    if shrunk.is_empty:
        return None
    if shrunk.geom_type == "MultiPolygon":
        shrunk = max(shrunk.geoms, key=lambda g: g.area)
    if shrunk.area <= 0:
        return None
    return Polygon(tuple(shrunk.exterior.coords[:-1]))


# ---------------------------------------------------------------------------
# Angle snapping and cross-tile merge
# ---------------------------------------------------------------------------

def snap_panel_angles(panels: Sequence[OrientedRect], table: OrientedRect,
                      refine: bool = True) -> Tuple[OrientedRect, list[OrientedRect]]:
    """Replace every panel's angle with the table's; centers and dims stay.

    With ``refine``, the table angle is first nudged to the period-90 circular
    mean of the panel angles. Returns (table, snapped panels); an empty panel
    list is a no-op.
    """
    if not panels:
        return table, []
    if refine:
        table = table.with_angle(circular_mean([p.angle_deg for p in panels], 90.0))
    return table, [p.with_angle(table.angle_deg) for p in panels]


def _sort_key(det):
    return (-det.confidence, det.defect_class, det.geometry.rounded(), det.id)


def merge_detections(detections: Sequence, iou_threshold: float = 0.5) -> list:
    """Greedy class-aware NMS over world-coordinate detections.

    Detections are ordered by descending confidence with a deterministic
    tie-break (class, rounded geometry, id), so the survivor set does not
    depend on input order. A detection is suppressed when its IoU with an
    already-kept detection of the same class reaches the threshold.
    """
    ordered = sorted(detections, key=_sort_key)
    kept: list = []
    for det in ordered:
        suppressed = False
        for k in kept:
            if k.defect_class != det.defect_class:
                continue
            if polygon_iou(k.geometry, det.geometry) >= iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(det)
    return kept
