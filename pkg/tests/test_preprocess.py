"""Normalization chain and tile planning."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solarscan.errors import AllNodataError
from solarscan.preprocess import (NormalizationParams, clip_and_stretch,
                                  histogram_equalize, ortho_statistics,
                                  plan_tiles, tile_normalize)

from conftest import make_raster
from oracles import uncovered_pixels


# ---------------------------------------------------------------------------
# Percentile clip and stretch
# ---------------------------------------------------------------------------

def test_ortho_statistics_percentiles():
    vals = np.arange(101, dtype=np.float32).reshape(1, -1)
    lo, hi = ortho_statistics(make_raster(vals), NormalizationParams(0.01, 0.99))
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(99.0)


def test_ortho_statistics_ignores_nodata():
    vals = np.array([[0.0, 50.0, 1e6]], dtype=np.float32)
    mask = np.array([[True, True, False]])
    lo, hi = ortho_statistics(make_raster(vals, mask=mask),
                              NormalizationParams(0.0, 1.0))
    assert hi == pytest.approx(50.0)


def test_ortho_statistics_all_nodata_raises():
    r = make_raster(np.zeros((2, 2)), mask=np.zeros((2, 2), dtype=bool))
    with pytest.raises(AllNodataError):
        ortho_statistics(r, NormalizationParams())


def test_clip_and_stretch_unit_range():
    r = make_raster([[10.0, 20.0, 30.0, 40.0]])
    out = clip_and_stretch(r, 20.0, 30.0)
    assert out.values.tolist() == [[0.0, 0.0, 1.0, 1.0]]
    mid = clip_and_stretch(r, 10.0, 40.0)
    assert mid.values[0, 1] == pytest.approx(1.0 / 3.0)


def test_clip_and_stretch_degenerate_range():
    r = make_raster([[5.0, 5.0]])
    out = clip_and_stretch(r, 5.0, 5.0)
    assert out.values.tolist() == [[0.0, 0.0]]


def test_params_validation():
    with pytest.raises(ValueError):
        NormalizationParams(lo_percentile=0.9, hi_percentile=0.1)
    with pytest.raises(ValueError):
        NormalizationParams(equalization_bins=1)


# ---------------------------------------------------------------------------
# Tile-level normalization and equalization
# ---------------------------------------------------------------------------

def test_tile_normalize_min_max():
    out = tile_normalize(make_raster([[2.0, 4.0], [6.0, 10.0]]))
    assert out.values.min() == 0.0
    assert out.values.max() == 1.0
    assert out.values[0, 1] == pytest.approx(0.25)


def test_tile_normalize_constant_and_empty():
    assert tile_normalize(make_raster([[3.0, 3.0]])).values.tolist() == [[0.0, 0.0]]
    empty = make_raster([[1.0, 2.0]], mask=[[False, False]])
    assert tile_normalize(empty) is None


def test_equalize_monotone_and_bounded():
    rng = np.random.default_rng(7)
    vals = rng.uniform(0, 1, (32, 32)).astype(np.float32)
    out = histogram_equalize(make_raster(vals), bins=256)
    assert out.values.min() >= 0.0
    assert out.values.max() <= 1.0
    flat_in = vals.ravel()
    flat_out = out.values.ravel()
    order = np.argsort(flat_in, kind="stable")
    diffs = np.diff(flat_out[order])
    assert (diffs >= -1e-7).all()


def test_equalize_small_case_by_hand():
    # Two bins: values below 0.5 map to their cumulative share (0.75),
    # values at or above 0.5 map to 1.0.
    vals = np.array([[0.0, 0.2, 0.4, 0.9]], dtype=np.float32)
    out = histogram_equalize(make_raster(vals), bins=2)
    assert out.values.tolist() == [[0.75, 0.75, 0.75, 1.0]]


def test_equalize_uniform_ramp_stays_uniform():
    vals = np.linspace(0, 1, 256, dtype=np.float32).reshape(16, 16)
    out = histogram_equalize(make_raster(vals), bins=256)
    assert np.allclose(np.sort(out.values.ravel()),
                       np.linspace(1 / 256, 1.0, 256), atol=1e-6)


# ---------------------------------------------------------------------------
# Tile planning
# ---------------------------------------------------------------------------

def test_default_stride_is_768():
    plan = plan_tiles(4096, 4096)
    assert plan.stride == 768
    cols = sorted({w.col_off for w in plan.windows})
    assert cols[:3] == [0, 768, 1536]


def test_plan_covers_and_fits_small_cases():
    for w, h in [(1024, 1024), (1025, 1024), (100, 50), (1, 1), (769, 2000)]:
        plan = plan_tiles(w, h)
        assert uncovered_pixels(plan.windows, w, h) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=3000),
       st.integers(min_value=1, max_value=3000))
def test_plan_covers_every_pixel(w, h):
    plan = plan_tiles(w, h, tile_size=256, overlap=0.25)
    assert uncovered_pixels(plan.windows, w, h) == 0
    for win in plan.windows:
        assert win.width == min(256, w)
        assert win.height == min(256, h)


def test_edge_windows_end_at_bounds():
    plan = plan_tiles(2000, 1500)
    assert max(w.col_off + w.width for w in plan.windows) == 2000
    assert max(w.row_off + w.height for w in plan.windows) == 1500


def test_plan_rejects_bad_args():
    with pytest.raises(ValueError):
        plan_tiles(0, 100)
    with pytest.raises(ValueError):
        plan_tiles(100, 100, overlap=1.0)
