"""The synthetic-site fixture generator feeding the end-to-end suites."""

import numpy as np
import pytest

from solarscan.geojson import read_geojson
from solarscan.raster import load_raster
from solarscan.synth import generate_site

BANDS = {
    "Hotspot": (6.0, 18.0),
    "MultiHotspot": (6.0, 14.0),
    "DiodeBypass": (6.0, 8.0),
    "PanelOffline": (5.5, 7.0),
    "StringOutage": (5.5, 7.0),
}


@pytest.fixture(scope="module")
def site(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    info = generate_site(root, seed=5, size_px=1536, gsd=0.05)
    return root, info


def test_emits_the_advertised_files(site):
    root, info = site
    for name in info["files"]:
        assert (root / name).is_file()
    assert set(info["files"]) == {"ir.tif", "rgb.tif", "truth.geojson",
                                  "config.toml"}


def test_summary_arithmetic(site):
    _, info = site
    assert info["n_panels"] == info["n_tables"] * 20
    assert info["capacity_mw_dc"] == pytest.approx(info["n_panels"] * 400 / 1e6)
    assert -20.0 <= info["site_angle_deg"] <= 20.0
    assert len(info["planted"]) == 12
    by_class = {}
    for d in info["planted"]:
        by_class[d["class"]] = by_class.get(d["class"], 0) + 1
    assert by_class == {"Hotspot": 2, "MultiHotspot": 2, "DiodeBypass": 2,
                        "PanelOffline": 2, "StringOutage": 2,
                        "TrackerMisalignment": 2}
    # defects land on distinct tables
    assert len({d["table"] for d in info["planted"]}) == 12


def test_truth_file_matches_summary(site):
    root, info = site
    truth = read_geojson(root / "truth.geojson")
    assert truth["type"] == "FeatureCollection"
    assert len(truth["features"]) == len(info["planted"])
    classes = sorted(f["properties"]["class"] for f in truth["features"])
    assert classes == sorted(d["class"] for d in info["planted"])
    for feat in truth["features"]:
        assert feat["properties"]["source"] == "truth"


def test_planted_deltas_stay_in_class_bands(site):
    _, info = site
    for d in info["planted"]:
        if d["class"] == "TrackerMisalignment":
            assert d["delta_t"] is None
        else:
            lo, hi = BANDS[d["class"]]
            assert lo <= d["delta_t"] <= hi, d


def test_raster_properties(site):
    root, info = site
    ras = load_raster(root / "ir.tif")
    assert ras.values.shape == (1536, 1536)
    assert ras.values.dtype == np.float32
    assert ras.transform.crs_code == "EPSG:32613"
    assert ras.transform.pixel_w == 0.05
    # nodata border frames the scene
    assert not ras.mask[0, :].any()
    assert not ras.mask[:, 0].any()
    assert ras.mask[768, 768]
    vals = ras.values[ras.mask]
    assert 15.0 < float(vals.min()) < 25.0       # ground plus texture
    assert 28.0 < float(vals.max()) < 55.0       # panels plus defects


def test_same_seed_reproduces_bytes(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    info_a = generate_site(a, seed=9, size_px=1536, gsd=0.05)
    info_b = generate_site(b, seed=9, size_px=1536, gsd=0.05)
    assert info_a["planted"] == info_b["planted"]
    for name in ("ir.tif", "truth.geojson", "config.toml"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_different_seeds_differ(tmp_path):
    a = generate_site(tmp_path / "a", seed=1, size_px=1536)
    b = generate_site(tmp_path / "b", seed=2, size_px=1536)
    assert (a["site_angle_deg"] != b["site_angle_deg"]
            or a["planted"] != b["planted"])


def test_config_is_loadable_and_consistent(site):
    root, info = site
    from solarscan.config import load_config
    cfg = load_config(root / "config.toml")
    cfg.validate_files()
    assert cfg.site.capacity_mw_dc == pytest.approx(info["capacity_mw_dc"],
                                                    abs=1e-6)
    assert cfg.site.module_wattage_w == 400.0
    assert cfg.site.mount_type == "tracker"
    assert cfg.ir_path == root / "ir.tif"
