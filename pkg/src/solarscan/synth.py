"""Seeded synthetic solar-site fixtures with planted, ground-truthed defects.

Generates an IR ortho (warm panel tables on cool textured ground), an aligned
RGB ortho, a ready-to-run inspection config, and a ground-truth detection
file. Twelve defects covering all six classes are planted, at most one per
table, with differentials randomized inside fixed per-class bands chosen so
class rules and rating letters separate cleanly from pixel noise.

Everything derives from one RNG seed; identical seeds give identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import rasterio.warp

from . import geojson
from .detect import Detection, severity
from .geometry import OrientedRect, min_area_rect
from .raster import GeoTransform, ThermalRaster, write_raster

CRS_CODE = "EPSG:32613"
ORIGIN = (500000.0, 4300000.0)

PANEL_W = 1.0
PANEL_H = 2.0
GAP = 0.04
TABLE_COLS = 10
TABLE_ROWS = 2
TABLE_W = TABLE_COLS * (PANEL_W + GAP)
TABLE_H = TABLE_ROWS * (PANEL_H + GAP)
COL_PITCH = 18.0
ROW_PITCH = 16.5
EDGE_MARGIN = 12.0

GROUND_C = 22.0
PANEL_C = 30.0
PIXEL_NOISE = 0.2
MODULE_W = 400.0

# Differential bands per planted defect. The second Hotspot band is the site
# maximum and the only one at or above 15 C, pinning the temperature letter.
_PLAN = (
    ("Hotspot", (6.5, 7.5)),
    ("Hotspot", (16.0, 17.5)),
    ("MultiHotspot", (8.5, 12.5)),
    ("MultiHotspot", (6.0, 13.5)),
    ("DiodeBypass", (6.0, 8.0)),
    ("DiodeBypass", (6.0, 8.0)),
    ("PanelOffline", (5.5, 7.0)),
    ("PanelOffline", (5.5, 7.0)),
    ("StringOutage", (5.5, 7.0)),
    ("StringOutage", (5.5, 7.0)),
    ("TrackerMisalignment", (10.0, 15.0)),
    ("TrackerMisalignment", (10.0, 15.0)),
)
STRING_RUN = 5
HOTSPOT_MARGIN = 0.05


@dataclass
class PlantedDefect:
    defect_class: str
    table_index: int
    panel_ids: Tuple[str, ...]
    geometry_rect: OrientedRect
    delta_t: Optional[float]

    def to_detection(self, index: int) -> Detection:
        sev = severity(self.delta_t) if self.delta_t is not None else None
        return Detection(
            id=f"gt-{index:03d}", defect_class=self.defect_class,
            geometry=self.geometry_rect.polygon(), delta_t=self.delta_t,
            severity=sev, panel_ids=self.panel_ids, source="truth")


def _paint_rect(values: np.ndarray, transform: GeoTransform, rect: OrientedRect,
                temp: float):
    corners = rect.corners()
    cols, rows = transform.world_to_pixel(corners[:, 0], corners[:, 1])
    c0 = max(int(np.floor(cols.min())), 0)
    r0 = max(int(np.floor(rows.min())), 0)
    c1 = min(int(np.ceil(cols.max())) + 1, values.shape[1])
    r1 = min(int(np.ceil(rows.max())) + 1, values.shape[0])
    if c1 <= c0 or r1 <= r0:
        return
    cc, rr = np.meshgrid(np.arange(c0, c1), np.arange(r0, r1))
    xs, ys = transform.pixel_to_world(cc + 0.5, rr + 0.5)
    u, v = rect.to_local(xs, ys)
    inside = (np.abs(u) <= rect.width / 2.0) & (np.abs(v) <= rect.height / 2.0)
    values[r0:r1, c0:c1][inside] = temp


def _grid_rects(table: OrientedRect, width: float, height: float,
                ) -> List[OrientedRect]:
    """Row-major rectangles of given dims centered on the table's grid cells."""
    rects = []
    cell_w = TABLE_W / TABLE_COLS
    cell_h = TABLE_H / TABLE_ROWS
    for r in range(TABLE_ROWS):
        v = -TABLE_H / 2.0 + (r + 0.5) * cell_h
        for c in range(TABLE_COLS):
            u = -TABLE_W / 2.0 + (c + 0.5) * cell_w
            cx, cy = table.from_local(u, v)
            rects.append(OrientedRect(cx, cy, width, height, table.angle_deg))
    return rects


def _panel_slots(table: OrientedRect) -> List[OrientedRect]:
    """Fitted panel footprints (module dims), matching the detector's layout."""
    return _grid_rects(table, PANEL_W, PANEL_H)


def _paint_cells(table: OrientedRect) -> List[OrientedRect]:
    """Painted panel footprints: full grid cells, so tables image seamlessly.

    The physical inter-module gap is narrower than a pixel at the default
    GSD, so imagery shows contiguous warm tables; painting cells avoids
    sub-pixel cold seams that would split a table into components.
    """
    return _grid_rects(table, TABLE_W / TABLE_COLS, TABLE_H / TABLE_ROWS)


def _hotspot_cell_rect(panel: OrientedRect, row: int, col: int,
                       grid: Tuple[int, int] = (4, 4),
                       shrink: float = 0.6) -> OrientedRect:
    """Centered sub-rectangle of one detection-grid cell of the inset panel."""
    inner = panel.inset(HOTSPOT_MARGIN)
    n_rows, n_cols = grid
    cw = inner.width / n_cols
    ch = inner.height / n_rows
    u = -inner.width / 2.0 + (col + 0.5) * cw
    v = -inner.height / 2.0 + (row + 0.5) * ch
    cx, cy = inner.from_local(u, v)
    return OrientedRect(cx, cy, cw * shrink, ch * shrink, panel.angle_deg)


def generate_site(out_dir: Path, seed: int = 42, size_px: int = 4096,
                  gsd: float = 0.05) -> dict:
    """Write ir.tif, rgb.tif, truth.geojson, and config.toml into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    extent = size_px * gsd
    transform = GeoTransform(origin_x=ORIGIN[0], origin_y=ORIGIN[1],
                             pixel_w=gsd, pixel_h=-gsd, rot_x=0.0, rot_y=0.0,
                             crs_code=CRS_CODE)

    site_angle = float(rng.uniform(-20.0, 20.0))

    # Table centers on a regular grid with clearance for rotation.
    n_cols = int((extent - 2 * EDGE_MARGIN) // COL_PITCH) + 1
    n_rows = int((extent - 2 * EDGE_MARGIN) // ROW_PITCH) + 1
    x0 = ORIGIN[0] + (extent - (n_cols - 1) * COL_PITCH) / 2.0
    y0 = ORIGIN[1] - (extent - (n_rows - 1) * ROW_PITCH) / 2.0
    tables = [OrientedRect(x0 + c * COL_PITCH, y0 - r * ROW_PITCH,
                           TABLE_W, TABLE_H, site_angle)
              for r in range(n_rows) for c in range(n_cols)]

    # Ground: cool base with low-frequency texture plus pixel noise.
    cc, rr = np.meshgrid(np.arange(size_px, dtype=np.float32),
                         np.arange(size_px, dtype=np.float32))
    xm = cc * np.float32(gsd)
    ym = rr * np.float32(gsd)
    values = (GROUND_C
              + 1.2 * np.sin(2 * np.pi * xm / 83.0) * np.cos(2 * np.pi * ym / 61.0)
              + 0.8 * np.sin(2 * np.pi * (xm + ym) / 47.0)).astype(np.float32)
    del cc, rr, xm, ym

    defect_tables = [int(i) for i in
                     rng.choice(len(tables), size=len(_PLAN), replace=False)]
    by_table = {t_idx: (cls, band)
                for (cls, band), t_idx in zip(_PLAN, defect_tables)}

    planted: List[PlantedDefect] = []
    panel_temps = PANEL_C + rng.normal(0.0, 0.3, size=(len(tables),
                                                       TABLE_ROWS * TABLE_COLS))

    def pid(t_idx: int, p_idx: int) -> str:
        r, c = divmod(p_idx, TABLE_COLS)
        return f"t{t_idx:03d}-r{r}-c{c:02d}"

    for t_idx, table in enumerate(tables):
        cells = _paint_cells(table)
        slots = _panel_slots(table)
        defect = by_table.get(t_idx)
        skip_paint: set = set()

        if defect is not None and defect[0] == "TrackerMisalignment":
            # Rotated panel painted in place of its grid cell.
            p_idx = int(rng.integers(0, len(cells)))
            tilt = float(rng.uniform(*defect[1]))
            if rng.random() < 0.5:
                tilt = -tilt
            cell = cells[p_idx]
            _paint_rect(values, transform, cell.with_angle(cell.angle_deg + tilt),
                        panel_temps[t_idx, p_idx])
            skip_paint.add(p_idx)
            slot = slots[p_idx]
            planted.append(PlantedDefect(
                "TrackerMisalignment", t_idx, (pid(t_idx, p_idx),),
                slot.with_angle(slot.angle_deg + tilt), None))

        for p_idx, cell in enumerate(cells):
            if p_idx not in skip_paint:
                _paint_rect(values, transform, cell, panel_temps[t_idx, p_idx])
        if defect is None or defect[0] == "TrackerMisalignment":
            continue

        cls, band = defect
        if cls in ("Hotspot", "MultiHotspot"):
            p_idx = int(rng.integers(0, len(slots)))
            slot = slots[p_idx]
            n_cells = 1 if cls == "Hotspot" else 2
            chosen = [int(i) for i in rng.choice(16, size=n_cells, replace=False)]
            deltas = sorted(float(rng.uniform(*band)) for _ in range(n_cells))
            for cell_idx, delta in zip(chosen, deltas):
                spike = _hotspot_cell_rect(slot, cell_idx // 4, cell_idx % 4)
                _paint_rect(values, transform, spike,
                            panel_temps[t_idx, p_idx] + delta)
            planted.append(PlantedDefect(
                cls, t_idx, (pid(t_idx, p_idx),), slot, max(deltas)))
        elif cls == "DiodeBypass":
            p_idx = int(rng.integers(0, len(cells)))
            cell = cells[p_idx]
            delta = float(rng.uniform(*band))
            stripe_idx = int(rng.integers(0, 3))
            scx, scy = cell.from_local(
                -cell.width / 2.0 + (stripe_idx + 0.5) * cell.width / 3.0, 0.0)
            stripe = OrientedRect(scx, scy, cell.width / 3.0, cell.height,
                                  cell.angle_deg)
            _paint_rect(values, transform, stripe,
                        panel_temps[t_idx, p_idx] + delta)
            planted.append(PlantedDefect(
                cls, t_idx, (pid(t_idx, p_idx),), slots[p_idx], delta))
        elif cls == "PanelOffline":
            p_idx = int(rng.integers(0, len(cells)))
            delta = float(rng.uniform(*band))
            _paint_rect(values, transform, cells[p_idx],
                        panel_temps[t_idx, p_idx] + delta)
            planted.append(PlantedDefect(
                cls, t_idx, (pid(t_idx, p_idx),), slots[p_idx], delta))
        elif cls == "StringOutage":
            row = int(rng.integers(0, TABLE_ROWS))
            start = int(rng.integers(0, TABLE_COLS - STRING_RUN + 1))
            delta = float(rng.uniform(*band))
            members = []
            pts = []
            for c in range(start, start + STRING_RUN):
                p_idx = row * TABLE_COLS + c
                _paint_rect(values, transform, cells[p_idx],
                            panel_temps[t_idx, p_idx] + delta)
                members.append(pid(t_idx, p_idx))
                pts.extend(tuple(pt) for pt in slots[p_idx].corners())
            planted.append(PlantedDefect(
                cls, t_idx, tuple(members), min_area_rect(pts), delta))

    values += rng.standard_normal(values.shape, dtype=np.float32) * PIXEL_NOISE

    mask = np.ones(values.shape, dtype=bool)
    border = max(int(2.0 / gsd), 1)
    mask[:border, :] = False
    mask[-border:, :] = False
    mask[:, :border] = False
    mask[:, -border:] = False
    write_raster(out_dir / "ir.tif", ThermalRaster(values, mask, transform))

    rgb = np.empty((size_px, size_px, 3), dtype=np.uint8)
    warm = values > (GROUND_C + PANEL_C) / 2.0
    shade = np.clip((values - GROUND_C - 2.0) / 14.0, 0.0, 1.0)
    rgb[..., 0] = np.where(warm, 40 + 120 * shade, 126).astype(np.uint8)
    rgb[..., 1] = np.where(warm, 45 + 60 * shade, 118).astype(np.uint8)
    rgb[..., 2] = np.where(warm, 90 - 30 * shade, 92).astype(np.uint8)
    write_raster(out_dir / "rgb.tif", ThermalRaster(rgb, mask, transform),
                 nodata=None)
    del values, warm, shade, rgb

    truth = [d.to_detection(i) for i, d in enumerate(planted)]
    geojson.write_geojson(
        geojson.detections_to_collection(truth, CRS_CODE),
        out_dir / "truth.geojson")

    n_panels = len(tables) * TABLE_ROWS * TABLE_COLS
    capacity_mw = n_panels * MODULE_W / 1e6
    center = transform.pixel_to_world(size_px / 2.0, size_px / 2.0)
    lons, lats = rasterio.warp.transform(CRS_CODE, "EPSG:4326",
                                         [center[0]], [center[1]])
    (out_dir / "config.toml").write_text(
        _CONFIG_TEMPLATE.format(seed=seed, capacity=f"{capacity_mw:.6f}",
                                wattage=f"{MODULE_W:.1f}",
                                lat=f"{lats[0]:.6f}", lon=f"{lons[0]:.6f}"),
        encoding="utf-8")

    return {
        "out_dir": str(out_dir),
        "seed": seed,
        "site_angle_deg": round(site_angle, 4),
        "n_tables": len(tables),
        "n_panels": n_panels,
        "capacity_mw_dc": capacity_mw,
        "planted": [
            {"class": d.defect_class, "table": d.table_index,
             "panel_ids": list(d.panel_ids),
             "delta_t": round(d.delta_t, 4) if d.delta_t is not None else None}
            for d in planted
        ],
        "files": ["ir.tif", "rgb.tif", "truth.geojson", "config.toml"],
    }


_CONFIG_TEMPLATE = """\
# Synthetic inspection fixture (seed {seed}).

[raster]
ir = "ir.tif"
rgb = "rgb.tif"

[site]
site_id = "synth-{seed}"
capacity_mw_dc = {capacity}
module_wattage_w = {wattage}
module_type = "poly-crystalline"
mount_type = "tracker"
commission_year = 2019
state = "CO"
location = [{lat}, {lon}]

[normalize]
lo_percentile = 0.01
hi_percentile = 0.99
bins = 256
tile_size = 1024
overlap = 0.25

[detector]
mode = "baseline"

[detect]
panel_width_m = 1.0
panel_height_m = 2.0
panel_gap_m = 0.04

[run]
output_dir = "results"
workers = 4
"""
