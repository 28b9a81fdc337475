"""GeoJSON export and import: precision, ordering, byte stability."""

import dataclasses
import json

import numpy as np
import pytest

from solarscan.detect import Panel, Table
from solarscan.geojson import (collection_crs, detections_from_collection,
                               detections_to_collection, panels_to_collection,
                               read_geojson, ring_from_wgs84, ring_to_wgs84,
                               tables_to_collection, world_ring_converter,
                               write_geojson)
from solarscan.geometry import OrientedRect

from conftest import CRS
from factories import random_detections


def test_ring_survives_wgs84_round_trip():
    ring = [(500123.456, 4300987.654), (500143.456, 4300987.654),
            (500143.456, 4300991.254), (500123.456, 4300991.254)]
    back = ring_from_wgs84(ring_to_wgs84(ring, CRS), CRS)
    for (x0, y0), (x1, y1) in zip(ring, back):
        assert abs(x0 - x1) < 1e-3
        assert abs(y0 - y1) < 1e-3


def test_detections_round_trip_preserves_everything():
    rng = np.random.default_rng(3)
    dets = random_detections(rng, 25)
    dets[3] = dataclasses.replace(dets[3], delta_t=7.25, severity="S2",
                                  panel_ids=("t000-r0-c00", "t000-r0-c01"),
                                  source="import", verdict="accepted")
    coll = detections_to_collection(dets, CRS)
    back = detections_from_collection(coll)
    assert [d.id for d in back] == sorted(d.id for d in dets)
    by_id = {d.id: d for d in dets}
    for d in back:
        ref = by_id[d.id]
        assert d.defect_class == ref.defect_class
        assert d.confidence == pytest.approx(ref.confidence, abs=1e-6)
        assert d.severity == ref.severity
        assert (d.delta_t is None) == (ref.delta_t is None)
        if ref.delta_t is not None:
            assert d.delta_t == pytest.approx(ref.delta_t, abs=1e-5)
        assert d.panel_ids == ref.panel_ids
        assert d.source == ref.source
        assert d.verdict == ref.verdict
        for (x0, y0), (x1, y1) in zip(ref.geometry.ring, d.geometry.ring):
            assert abs(x0 - x1) < 1e-3 and abs(y0 - y1) < 1e-3


def test_write_read_write_is_byte_stable():
    rng = np.random.default_rng(11)
    coll = detections_to_collection(random_detections(rng, 12), CRS)
    text1 = json.dumps(coll, sort_keys=True, separators=(",", ":"))
    coll2 = detections_to_collection(detections_from_collection(coll), CRS)
    text2 = json.dumps(coll2, sort_keys=True, separators=(",", ":"))
    assert text1 == text2


def test_feature_order_ignores_input_order():
    rng = np.random.default_rng(5)
    dets = random_detections(rng, 10)
    shuffled = list(dets)[::-1]
    a = json.dumps(detections_to_collection(dets, CRS), sort_keys=True)
    b = json.dumps(detections_to_collection(shuffled, CRS), sort_keys=True)
    assert a == b


def test_collection_carries_projected_crs():
    coll = detections_to_collection([], CRS)
    assert coll["projected_crs"] == CRS
    assert collection_crs(coll) == CRS
    with pytest.raises(ValueError, match="projected_crs"):
        collection_crs({"type": "FeatureCollection", "features": []})


def test_world_ring_converter():
    dets = random_detections(np.random.default_rng(2), 3)
    coll = detections_to_collection(dets, CRS)
    conv = world_ring_converter(coll)
    feat = coll["features"][0]
    ring = conv(feat["geometry"]["coordinates"][0])
    src = next(d for d in dets if d.id == feat["id"]).geometry.ring
    for (x0, y0), (x1, y1) in zip(src, ring):
        assert abs(x0 - x1) < 1e-3 and abs(y0 - y1) < 1e-3


def test_table_and_panel_features():
    rect = OrientedRect(500050.0, 4300040.0, 10.4, 4.08, 12.0)
    tables = [Table(id="t001", rect=rect),
              Table(id="t000", rect=OrientedRect(500020.0, 4300040.0,
                                                 10.4, 4.08, 12.0))]
    coll = tables_to_collection(tables, CRS)
    assert [f["id"] for f in coll["features"]] == ["t000", "t001"]
    props = coll["features"][1]["properties"]
    assert props["width_m"] == 10.4
    assert props["height_m"] == 4.08
    assert props["angle_deg"] == 12.0
    ring = coll["features"][0]["geometry"]["coordinates"][0]
    assert len(ring) == 5 and ring[0] == ring[-1]   # closed per RFC 7946

    panel = Panel(id="t000-r0-c00", table_id="t000", row=0, col=0,
                  rect=OrientedRect(500016.0, 4300039.0, 1.0, 2.0, 12.0))
    pcoll = panels_to_collection([panel], CRS)
    pprops = pcoll["features"][0]["properties"]
    assert pprops == {"id": "t000-r0-c00", "table_id": "t000",
                      "row": 0, "col": 0}


def test_file_round_trip(tmp_path):
    coll = detections_to_collection(random_detections(np.random.default_rng(7), 5), CRS)
    path = tmp_path / "detections.geojson"
    write_geojson(coll, path)
    raw = path.read_text()
    assert raw.endswith("\n")
    assert ": " not in raw          # compact separators
    assert read_geojson(path) == coll


def test_coordinates_have_nine_decimals_at_most(tmp_path):
    coll = detections_to_collection(random_detections(np.random.default_rng(9), 8), CRS)
    for feat in coll["features"]:
        for lon, lat in feat["geometry"]["coordinates"][0]:
            assert round(lon, 9) == lon
            assert round(lat, 9) == lat
