"""Geometry checks against brute-force sweeps and textbook reference code."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solarscan.detect import Detection
from solarscan.errors import DegenerateGeometryError
from solarscan.geometry import (OrientedRect, Polygon, angle_residual,
                                circular_mean, convex_hull, inset_polygon,
                                merge_detections, min_area_rect, polygon_iou,
                                snap_panel_angles)

from factories import random_detections, random_rect
from oracles import (convex_iou, distance_to_ring, greedy_nms_ids,
                     rect_contains_all, sweep_min_rect_area, winding_contains)

angles = st.floats(min_value=-720.0, max_value=720.0,
                   allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# Angle algebra
# ---------------------------------------------------------------------------

@given(angles, angles)
def test_angle_residual_range(a, b):
    r = angle_residual(a, b)
    assert -45.0 <= r < 45.0


@given(angles)
def test_angle_residual_identity(a):
    assert angle_residual(a, a) == pytest.approx(0.0, abs=1e-9)


def test_angle_residual_examples():
    assert angle_residual(95.0, 5.0) == pytest.approx(0.0)
    assert angle_residual(10.0, -10.0) == pytest.approx(20.0)
    assert angle_residual(-44.0, 44.0) == pytest.approx(2.0)


def test_circular_mean_constant():
    assert circular_mean([10.0, 10.0, 10.0]) == pytest.approx(10.0)


def test_circular_mean_wraps_fold():
    # 89 and -89 are 2 degrees apart under the period-90 symmetry.
    assert circular_mean([89.0, -89.0]) == pytest.approx(0.0, abs=1e-9)


def test_circular_mean_empty_raises():
    with pytest.raises(ValueError):
        circular_mean([])


@given(angles, st.floats(min_value=-4.0, max_value=4.0,
                         allow_nan=False, allow_infinity=False))
def test_circular_mean_tracks_tight_cluster(center, jitter):
    got = circular_mean([center - jitter, center + jitter])
    assert abs(angle_residual(got, center)) < 1e-6


# ---------------------------------------------------------------------------
# Polygon basics
# ---------------------------------------------------------------------------

def test_polygon_normalizes_to_ccw():
    cw = ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0))
    p = Polygon(cw)
    assert p.area == pytest.approx(1.0)
    assert set(p.ring) == set(cw)
    xs = [x for x, _ in p.ring]
    ys = [y for _, y in p.ring]
    signed = sum(xs[i] * ys[(i + 1) % 4] - xs[(i + 1) % 4] * ys[i]
                 for i in range(4))
    assert signed > 0


def test_polygon_drops_closing_vertex():
    p = Polygon(((0, 0), (2, 0), (2, 1), (0, 1), (0, 0)))
    assert len(p.ring) == 4


def test_polygon_degenerate_raises():
    with pytest.raises(DegenerateGeometryError):
        Polygon(((0, 0), (1, 1), (2, 2)))


def test_contains_point_matches_winding_oracle():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 1000:
        poly = random_rect(rng).polygon()
        x = float(rng.uniform(-5, 45))
        y = float(rng.uniform(-5, 45))
        if distance_to_ring(poly.ring, x, y) < 1e-9:
            continue
        assert poly.contains_point(x, y) == winding_contains(poly.ring, x, y)
        checked += 1


def test_contains_point_boundary_inclusive():
    p = Polygon(((0, 0), (2, 0), (2, 2), (0, 2)))
    assert p.contains_point(0.0, 1.0)
    assert p.contains_point(2.0, 2.0)
    assert not p.contains_point(2.0000001, 1.0)


# ---------------------------------------------------------------------------
# Convex hull
# ---------------------------------------------------------------------------

def test_hull_contains_all_points():
    rng = np.random.default_rng(11)
    for _ in range(25):
        pts = [(float(x), float(y)) for x, y in rng.uniform(0, 10, size=(30, 2))]
        hull = convex_hull(pts)
        assert len(hull) >= 3
        for x, y in pts:
            assert winding_contains(hull, x, y) or distance_to_ring(hull, x, y) < 1e-9


def test_hull_is_convex_ccw():
    rng = np.random.default_rng(12)
    pts = [(float(x), float(y)) for x, y in rng.uniform(0, 10, size=(50, 2))]
    hull = convex_hull(pts)
    n = len(hull)
    for i in range(n):
        ox, oy = hull[i]
        ax, ay = hull[(i + 1) % n]
        bx, by = hull[(i + 2) % n]
        assert (ax - ox) * (by - oy) - (ay - oy) * (bx - ox) > 0


def test_hull_of_collinear_points():
    assert len(convex_hull([(0, 0), (1, 1), (2, 2)])) < 3


# ---------------------------------------------------------------------------
# Minimum-area rectangle
# ---------------------------------------------------------------------------

def test_min_rect_axis_aligned():
    pts = [(0, 0), (4, 0), (4, 2), (0, 2), (1, 1), (3.5, 0.5)]
    r = min_area_rect(pts)
    assert r.area == pytest.approx(8.0, abs=1e-9)
    assert sorted((r.width, r.height)) == pytest.approx([2.0, 4.0], abs=1e-9)
    assert abs(angle_residual(r.angle_deg, 0.0)) < 1e-7


def test_min_rect_recovers_rotation():
    base = OrientedRect(5.0, 7.0, 4.0, 2.0, 25.0)
    r = min_area_rect([tuple(c) for c in base.corners()])
    assert r.area == pytest.approx(8.0, abs=1e-9)
    assert abs(angle_residual(r.angle_deg, 25.0)) < 1e-7
    assert (r.cx, r.cy) == pytest.approx((5.0, 7.0), abs=1e-9)


def test_min_rect_against_sweep_oracle():
    rng = random.Random(40)
    for _ in range(20):
        pts = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(25)]
        r = min_area_rect(pts)
        corners = [tuple(c) for c in r.corners()]
        assert rect_contains_all(corners, pts)
        assert r.area <= sweep_min_rect_area(pts) + 1e-9


def test_min_rect_collinear_raises():
    with pytest.raises(DegenerateGeometryError):
        min_area_rect([(0, 0), (1, 1), (2, 2), (3, 3)])


def test_canonical_prefers_long_width():
    tall = OrientedRect(0.0, 0.0, 1.0, 2.0, 10.0)
    c = tall.canonical()
    assert (c.width, c.height) == (2.0, 1.0)
    assert polygon_iou(c.polygon(), tall.polygon()) == pytest.approx(1.0, abs=1e-9)
    wide = OrientedRect(0.0, 0.0, 2.0, 1.0, 10.0)
    assert wide.canonical() is wide


# ---------------------------------------------------------------------------
# IoU
# ---------------------------------------------------------------------------

def test_iou_identical():
    a = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert polygon_iou(a, a) == pytest.approx(1.0, abs=1e-12)


def test_iou_half_shift_is_one_third():
    a = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    b = Polygon(((0.5, 0), (1.5, 0), (1.5, 1), (0.5, 1)))
    assert abs(polygon_iou(a, b) - 1.0 / 3.0) < 1e-9


def test_iou_quarter_overlap_is_one_seventh():
    a = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    b = Polygon(((0.5, 0.5), (1.5, 0.5), (1.5, 1.5), (0.5, 1.5)))
    assert abs(polygon_iou(a, b) - 1.0 / 7.0) < 1e-9


def test_iou_disjoint_and_touching():
    a = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert polygon_iou(a, Polygon(((5, 5), (6, 5), (6, 6), (5, 6)))) == 0.0
    assert polygon_iou(a, Polygon(((1, 0), (2, 0), (2, 1), (1, 1)))) == 0.0


def test_iou_matches_clipping_oracle():
    rng = np.random.default_rng(21)
    for _ in range(50):
        a = random_rect(rng, span=6.0).polygon()
        b = random_rect(rng, span=6.0).polygon()
        assert polygon_iou(a, b) == pytest.approx(convex_iou(a.ring, b.ring),
                                                  abs=1e-10)
        assert polygon_iou(a, b) == pytest.approx(polygon_iou(b, a), abs=1e-12)


# ---------------------------------------------------------------------------
# Inset
# ---------------------------------------------------------------------------

def test_inset_polygon_square():
    p = Polygon(((0, 0), (2, 0), (2, 2), (0, 2)))
    inner = inset_polygon(p, 0.25)
    assert inner.area == pytest.approx(2.25, abs=1e-9)
    assert inset_polygon(p, 1.0) is None
    assert inset_polygon(p, 0.0) is p


def test_rect_inset():
    r = OrientedRect(1.0, 1.0, 2.0, 1.0, 30.0)
    inner = r.inset(0.2)
    assert (inner.width, inner.height) == pytest.approx((1.6, 0.6))
    assert inner.angle_deg == r.angle_deg
    assert r.inset(0.5) is None


# ---------------------------------------------------------------------------
# Angle snapping
# ---------------------------------------------------------------------------

def test_snap_panel_angles_to_mean():
    table = OrientedRect(0, 0, 10, 4, 45.0)
    panels = [OrientedRect(i, 0, 1, 2, a) for i, a in enumerate((10.2, 9.8, 10.0))]
    snapped_table, snapped = snap_panel_angles(panels, table)
    assert snapped_table.angle_deg == pytest.approx(10.0, abs=1e-9)
    assert all(p.angle_deg == snapped_table.angle_deg for p in snapped)
    same_table, empty = snap_panel_angles([], table)
    assert same_table is table and empty == []


# ---------------------------------------------------------------------------
# NMS
# ---------------------------------------------------------------------------

def test_nms_matches_quadratic_oracle():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        dets = random_detections(rng, 30)
        kept = merge_detections(dets, iou_threshold=0.5)
        assert [d.id for d in kept] == greedy_nms_ids(dets, 0.5)


def test_nms_order_invariant():
    rng = np.random.default_rng(99)
    dets = random_detections(rng, 40)
    kept = {d.id for d in merge_detections(dets, 0.5)}
    shuffled = list(dets)
    random.Random(5).shuffle(shuffled)
    assert {d.id for d in merge_detections(shuffled, 0.5)} == kept


def test_nms_is_class_aware():
    ring = OrientedRect(0, 0, 2, 1, 0).polygon()
    a = Detection(id="a", defect_class="Hotspot", geometry=ring)
    b = Detection(id="b", defect_class="DiodeBypass", geometry=ring)
    assert len(merge_detections([a, b], 0.5)) == 2


def test_nms_deterministic_tie_break():
    ring = OrientedRect(0, 0, 2, 1, 0).polygon()
    a = Detection(id="z", defect_class="Hotspot", geometry=ring)
    b = Detection(id="a", defect_class="Hotspot", geometry=ring)
    kept = merge_detections([a, b], 0.5)
    assert [d.id for d in kept] == ["a"]


def test_nms_keeps_highest_confidence():
    base = OrientedRect(0, 0, 2, 1, 0)
    near = OrientedRect(0.1, 0, 2, 1, 0)
    lo = Detection(id="lo", defect_class="Hotspot", geometry=base.polygon(),
                   confidence=0.5)
    hi = Detection(id="hi", defect_class="Hotspot", geometry=near.polygon(),
                   confidence=0.9)
    kept = merge_detections([lo, hi], 0.5)
    assert [d.id for d in kept] == ["hi"]
