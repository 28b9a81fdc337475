"""Shared fixtures: tiny in-memory rasters and a generated site on disk."""

from __future__ import annotations

import numpy as np
import pytest

from solarscan.raster import GeoTransform, ThermalRaster

CRS = "EPSG:32613"

# Acceptance tests register one (criterion, passed, detail) row each so the
# run summary always carries an explicit pass/fail line per criterion.
ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        state = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{state}  {name}  ({detail})")


def make_transform(gsd: float = 0.05, origin=(500000.0, 4300000.0),
                   crs: str = CRS) -> GeoTransform:
    return GeoTransform(origin_x=origin[0], origin_y=origin[1],
                        pixel_w=gsd, pixel_h=-gsd, crs_code=crs)


def make_raster(values, mask=None, gsd: float = 0.05,
                origin=(500000.0, 4300000.0)) -> ThermalRaster:
    values = np.asarray(values, dtype=np.float32)
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    return ThermalRaster(values=values, mask=np.asarray(mask, dtype=bool),
                         transform=make_transform(gsd=gsd, origin=origin))


@pytest.fixture(scope="session")
def small_site(tmp_path_factory):
    """A 1536 px synthetic site with all six defect classes, inspected once."""
    from solarscan.config import load_config
    from solarscan.pipeline import run_inspection
    from solarscan.synth import generate_site

    root = tmp_path_factory.mktemp("site")
    info = generate_site(root, seed=7, size_px=1536, gsd=0.05)
    config = load_config(root / "config.toml")
    result = run_inspection(config)
    return {"root": root, "info": info, "config": config, "result": result}
