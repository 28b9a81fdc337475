"""System-level acceptance gate.

Every test here checks one shipped guarantee end to end and registers a
PASS/FAIL line that pytest prints after the run summary. Tolerances and
runtime budgets are part of the assertions.
"""

import json
import shutil
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from solarscan.analytics import (EconomicsConfig, LossModel, build_report,
                                 operating_letter, rate_site, report_from_dict,
                                 report_to_dict, temperature_letter)
from solarscan.config import load_config
from solarscan.detect import detect_hotspots
from solarscan.geojson import detections_from_collection, read_geojson
from solarscan.geometry import OrientedRect, Polygon, merge_detections, polygon_iou
from solarscan.pipeline import run_inspection
from solarscan.preprocess import plan_tiles
from solarscan.server import create_app
from solarscan.synth import generate_site

from conftest import ACCEPTANCE_RESULTS, make_raster
from factories import random_detections
from golden import RATING_GOLDEN
from oracles import (cell_hotspots, distance_to_ring, greedy_nms_ids,
                     uncovered_pixels, winding_contains)


def record(name, ok, detail):
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Shared expensive fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def seed42(tmp_path_factory):
    """The reference synthetic site: seed 42, 4096 px, all six classes."""
    root = tmp_path_factory.mktemp("seed42")
    t0 = time.perf_counter()
    info = generate_site(root, seed=42, size_px=4096, gsd=0.05)
    gen_s = time.perf_counter() - t0
    config = load_config(root / "config.toml")
    t0 = time.perf_counter()
    result = run_inspection(config)
    run_s = time.perf_counter() - t0
    return {"root": root, "info": info, "config": config, "result": result,
            "gen_s": gen_s, "run_s": run_s}


# ---------------------------------------------------------------------------
# Rating algebra
# ---------------------------------------------------------------------------

def test_rating_algebra_exactness():
    t0 = time.perf_counter()
    wrong = [(orr, dt, apm, want, rate_site(orr, dt, apm))
             for orr, dt, apm, want in RATING_GOLDEN
             if rate_site(orr, dt, apm) != want]
    anchors_ok = (operating_letter(0.98) == "B"
                  and temperature_letter(17.0) == "C"
                  and rate_site(1.0, 0.0, 13.0)[2] == "B")
    elapsed = time.perf_counter() - t0
    ok = (not wrong and anchors_ok and len(RATING_GOLDEN) >= 24
          and elapsed < 1.0)
    record("rating algebra golden table", ok,
           f"{len(RATING_GOLDEN)} triples, {len(wrong)} mismatches, "
           f"{elapsed * 1e3:.0f} ms < 1 s")


# ---------------------------------------------------------------------------
# Hotspot oracle equivalence
# ---------------------------------------------------------------------------

def _random_panel(rng):
    gsd = float(rng.uniform(0.03, 0.06))
    size = 96
    values = rng.normal(30.0, 0.25, (size, size)).astype(np.float32)
    raster = make_raster(values, gsd=gsd)
    cx, cy = raster.transform.pixel_to_world(
        size / 2 + rng.uniform(-5, 5), size / 2 + rng.uniform(-5, 5))
    panel = OrientedRect(cx, cy, float(rng.uniform(0.9, 2.4)),
                         float(rng.uniform(0.9, 2.4)),
                         float(rng.uniform(-90.0, 90.0)))
    grid = (int(rng.integers(2, 6)), int(rng.integers(2, 6)))
    inner = panel.inset(0.05)
    for _ in range(int(rng.integers(0, 5))):
        ri = int(rng.integers(0, grid[0]))
        ci = int(rng.integers(0, grid[1]))
        u = (ci + 0.5) / grid[1] * inner.width - inner.width / 2
        v = (ri + 0.5) / grid[0] * inner.height - inner.height / 2
        col, row = raster.transform.world_to_pixel(*panel.from_local(u, v))
        raster.values[int(row), int(col)] += rng.uniform(3.0, 18.0)
    return raster, panel, grid


def test_hotspot_cells_match_brute_force_oracle():
    t0 = time.perf_counter()
    panels = 200
    cells_checked = 0
    mismatches = []
    for seed in range(panels):
        rng = np.random.default_rng(1000 + seed)
        raster, panel, grid = _random_panel(rng)
        got = detect_hotspots(raster, panel, grid=grid, delta_threshold=5.0,
                              margin_m=0.05)
        t = raster.transform
        want = cell_hotspots(raster.values, raster.mask, t.origin_x,
                             t.origin_y, t.pixel_w, t.pixel_h, panel.cx,
                             panel.cy, panel.width, panel.height,
                             panel.angle_deg, grid, 5.0, 0.05,
                             (5.0, 8.0, 11.0, 15.0))
        if [(c.row, c.col, c.severity) for c in got] != \
                [(w[0], w[1], w[3]) for w in want]:
            mismatches.append(seed)
            continue
        for cell, ref in zip(got, want):
            cells_checked += 1
            if abs(cell.delta_t - ref[2]) > 1e-9:
                mismatches.append(seed)
                break
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 10.0
    record("hotspot cell oracle equivalence", ok,
           f"{panels} panels, {cells_checked} hot cells, delta within 1e-9, "
           f"{elapsed:.1f} s < 10 s")


# ---------------------------------------------------------------------------
# Tiling contract
# ---------------------------------------------------------------------------

def test_tiling_contract():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    holes = 0
    edge_ok = True
    for _ in range(50):
        w = int(rng.integers(1, 3000))
        h = int(rng.integers(1, 3000))
        plan = plan_tiles(w, h, 1024, 0.25)
        holes += uncovered_pixels(plan.windows, w, h)
        right = max(win.col_off + win.width for win in plan.windows)
        bottom = max(win.row_off + win.height for win in plan.windows)
        edge_ok = edge_ok and right == w and bottom == h

    plan = plan_tiles(4096, 4096, 1024, 0.25)
    cols = sorted({win.col_off for win in plan.windows})
    stride_ok = cols == [0, 768, 1536, 2304, 3072]
    elapsed = time.perf_counter() - t0
    ok = holes == 0 and edge_ok and stride_ok and elapsed < 1.0
    record("tile plan coverage contract", ok,
           f"50 sizes, {holes} uncovered px, stride 768, "
           f"{elapsed * 1e3:.0f} ms < 1 s")


# ---------------------------------------------------------------------------
# Geometry oracles
# ---------------------------------------------------------------------------

def test_geometry_oracles():
    unit = Polygon(((0, 0), (1, 0), (1, 1), (0, 1)))
    shifted = Polygon(((0.5, 0), (1.5, 0), (1.5, 1), (0.5, 1)))
    iou_ok = (abs(polygon_iou(unit, shifted) - 1.0 / 3.0) <= 1e-9
              and polygon_iou(unit, unit) == 1.0
              and polygon_iou(unit, Polygon(((5, 5), (6, 5), (6, 6), (5, 6)))) == 0.0)

    nms_bad = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        dets = random_detections(rng, 50)
        kept = {d.id for d in merge_detections(dets, 0.5)}
        if kept != set(greedy_nms_ids(dets, 0.5)):
            nms_bad += 1

    rect = OrientedRect(3.0, -2.0, 4.0, 2.5, 31.0).polygon()
    rng = np.random.default_rng(7)
    contains_bad = 0
    checked = 0
    for _ in range(1000):
        x = float(rng.uniform(-3, 9))
        y = float(rng.uniform(-7, 3))
        if distance_to_ring(rect.ring, x, y) < 1e-9:
            continue
        checked += 1
        if rect.contains_point(x, y) != winding_contains(rect.ring, x, y):
            contains_bad += 1

    ok = iou_ok and nms_bad == 0 and contains_bad == 0
    record("geometry oracles", ok,
           f"IoU 1/3 to 1e-9, NMS 100/{100 - nms_bad} seed sets identical, "
           f"containment {checked}/{checked - contains_bad} points agree")


# ---------------------------------------------------------------------------
# End-to-end reference site
# ---------------------------------------------------------------------------

LOSS_FRACTION = {"Hotspot": 0.33, "MultiHotspot": 0.66, "DiodeBypass": 0.33,
                 "PanelOffline": 1.0, "StringOutage": 1.0,
                 "TrackerMisalignment": 0.10}


def test_end_to_end_reference_site(seed42):
    info = seed42["info"]
    result = seed42["result"]
    truth = detections_from_collection(
        read_geojson(seed42["root"] / "truth.geojson"))

    unmatched = list(result.detections)
    matched = 0
    for t in truth:
        hit = next((d for d in unmatched
                    if d.defect_class == t.defect_class
                    and polygon_iou(t.geometry, d.geometry) >= 0.5), None)
        if hit is not None:
            unmatched.remove(hit)
            matched += 1
    precision = matched / len(result.detections) if result.detections else 0.0
    recall = matched / len(truth)

    modules = sum(len(d["panel_ids"]) * LOSS_FRACTION[d["class"]]
                  for d in info["planted"])
    cap = info["capacity_mw_dc"]
    expect_or = (cap - modules * 400.0 / 1e6) / cap
    a_total = sum(1 for d in info["planted"] if d["class"] != "StringOutage")
    expect_rating = rate_site(
        expect_or,
        max(d["delta_t"] for d in info["planted"] if d["delta_t"] is not None),
        a_total / cap)

    rep = result.report
    ok = (precision >= 0.95 and recall >= 0.95
          and abs(rep.or_ratio - expect_or) <= 1e-9
          and rep.rating == expect_rating
          and seed42["run_s"] < 120.0)
    record("end-to-end reference site", ok,
           f"{info['n_panels']} panels, P {precision:.2f} R {recall:.2f} "
           f"@IoU 0.5, OR {rep.or_ratio:.9f} rating {rep.rating} "
           f"(expected {expect_rating}), {seed42['run_s']:.1f} s < 120 s")


def test_determinism_across_worker_counts(seed42, tmp_path):
    root = seed42["root"]
    outs = []
    for workers in (1, 8):
        out = tmp_path / f"workers{workers}"
        cfg = load_config(root / "config.toml", overrides={
            "run": {"workers": workers, "output_dir": str(out)}})
        run_inspection(cfg)
        outs.append(out)
    names = ("tables.geojson", "panels.geojson", "detections.geojson",
             "report.json")
    same = [n for n in names
            if (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()]
    ok = len(same) == len(names)
    record("byte determinism at 1 and 8 workers", ok,
           f"{len(same)}/{len(names)} artifacts identical")


def test_throughput_on_large_ortho(tmp_path_factory):
    root = tmp_path_factory.mktemp("big")
    t0 = time.perf_counter()
    generate_site(root, seed=11, size_px=8192, gsd=0.05)
    gen_s = time.perf_counter() - t0
    config = load_config(root / "config.toml")
    t0 = time.perf_counter()
    result = run_inspection(config)
    run_s = time.perf_counter() - t0
    ok = run_s < 60.0 and result.report.n_panels > 0
    record("full pipeline on 8192 px float32 ortho", ok,
           f"{result.report.n_panels} panels, pipeline {run_s:.1f} s < 60 s "
           f"(generation {gen_s:.1f} s not counted)")


# ---------------------------------------------------------------------------
# Review algebra over HTTP
# ---------------------------------------------------------------------------

def _loss_model_from(d):
    return LossModel(
        hotspot=d["Hotspot"], multi_hotspot=d["MultiHotspot"],
        diode_bypass=d["DiodeBypass"], panel_offline=d["PanelOffline"],
        string_outage=d["StringOutage"],
        tracker_misalignment=d["TrackerMisalignment"])


def test_review_algebra_over_http(seed42, tmp_path):
    run_dir = tmp_path / "review"
    run_dir.mkdir()
    for name in ("tables.geojson", "panels.geojson", "detections.geojson",
                 "report.json", "manifest.json"):
        shutil.copy(seed42["result"].output_dir / name, run_dir / name)

    report_doc = json.loads((run_dir / "report.json").read_text())
    meta, _ = report_from_dict(report_doc)
    loss_model = _loss_model_from(report_doc["loss_model"])
    econ = EconomicsConfig(**report_doc["economics"])
    base_dets = detections_from_collection(
        read_geojson(run_dir / "detections.geojson"))

    rng = np.random.default_rng(2024)
    verdicts = {}
    sequences = 10
    writes_per_seq = 10
    mismatches = 0
    replay_bad = 0

    def expected_summary():
        import dataclasses
        patched = [dataclasses.replace(d, verdict=verdicts.get(d.id, "pending"))
                   for d in base_dets]
        rep = build_report(meta, patched, loss_model, econ,
                           site_baseline_c=report_doc["site_baseline_c"],
                           n_panels=report_doc["n_panels"],
                           n_uninspectable=report_doc["n_uninspectable"])
        return report_to_dict(meta, rep)

    last = None
    for _ in range(sequences):
        with TestClient(create_app(run_dir, load_tiles=False)) as client:
            if last is not None:
                # journal replay must restore state before any new writes
                if client.get("/api/site").json() != last:
                    replay_bad += 1
            ids = [f["id"] for f in
                   client.get("/api/detections").json()["features"]]
            for _ in range(writes_per_seq):
                det_id = ids[int(rng.integers(0, len(ids)))]
                verdict = ("pending", "accepted",
                           "rejected")[int(rng.integers(0, 3))]
                client.post(f"/api/detections/{det_id}/verdict",
                            json={"verdict": verdict})
                verdicts[det_id] = verdict
                live = client.get("/api/site").json()
                want = expected_summary()
                if live != want or live["rating"] != want["rating"]:
                    mismatches += 1
            last = client.get("/api/site").json()

    total = sequences * writes_per_seq
    ok = mismatches == 0 and replay_bad == 0
    record("review algebra over HTTP", ok,
           f"{total} verdict writes in {sequences} sequences, "
           f"{mismatches} summary mismatches, "
           f"{sequences - 1 - replay_bad}/{sequences - 1} replays exact")
