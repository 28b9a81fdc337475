"""Baseline detectors and defect classification.

Tables are found by thresholding the normalized ortho and fitting oriented
rectangles to connected components. Panels come from a regular grid fit to
each table. Hotspots use max-median thresholding on a per-panel cell grid:
a cell is a hotspot when its maximum exceeds the panel median by a
configurable differential (default 5 C). Defective modules are assumed
hotter than baseline; cold anomalies are out of scope.

Classification applies rules in priority order: string outage, whole-panel
outage, diode bypass (one elevated third-stripe), multi-hotspot, hotspot,
and finally tracker misalignment from per-panel angle residuals. Each panel
yields at most one panel-level defect class plus possibly membership in one
string outage.

An import boundary accepts externally produced detections (e.g. from learned
models) as GeoJSON features and normalizes them into the same Detection type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from shapely import STRtree
import shapely.geometry

from .errors import AllNodataError, DegenerateGeometryError
from .geometry import OrientedRect, Polygon, min_area_rect
from .raster import GeoTransform, ThermalRaster

DEFECT_CLASSES = (
    "Hotspot",
    "MultiHotspot",
    "DiodeBypass",
    "PanelOffline",
    "StringOutage",
    "TrackerMisalignment",
)

SEVERITY_LEVELS = ("S1", "S2", "S3", "S4", "S5")

# Band lower edges for S2..S5; S1 and S5 endpoints are fixed, interior
# boundaries are configurable.
DEFAULT_SEVERITY_CUTS = (5.0, 8.0, 11.0, 15.0)

_CLASS_ALIASES = {
    "hotspot": "Hotspot",
    "multihotspot": "MultiHotspot",
    "diodebypass": "DiodeBypass",
    "paneloffline": "PanelOffline",
    "paneloutage": "PanelOffline",
    "singlepaneloutage": "PanelOffline",
    "stringoutage": "StringOutage",
    "trackermisalignment": "TrackerMisalignment",
    "misalignedpanel": "TrackerMisalignment",
    "misalignment": "TrackerMisalignment",
}


@dataclass(frozen=True)
class DetectionParams:
    """Every tunable of the baseline detectors."""

    table_min_area_m2: float = 4.0
    table_threshold: str | float = "otsu"
    panel_width_m: float = 1.0
    panel_height_m: float = 2.0
    panel_gap_m: float = 0.04
    min_valid_pixels: int = 16
    hotspot_grid: Tuple[int, int] = (4, 4)
    hotspot_delta_c: float = 5.0
    hotspot_margin_m: float = 0.05
    severity_cuts: Tuple[float, float, float, float] = DEFAULT_SEVERITY_CUTS
    offline_delta_c: float = 4.0
    uniformity_max_c: float = 3.0
    diode_delta_c: float = 4.0
    string_min_run: int = 4
    misalign_deg: float = 8.0
    misalign_sweep_deg: float = 25.0
    misalign_score_margin: float = 0.1
    nms_iou: float = 0.5


@dataclass(frozen=True)
class PanelStats:
    """Per-panel temperature statistics and deviations from the site baseline."""

    median_c: float
    mean_c: float
    max_c: float
    site_baseline_c: float
    valid_pixel_count: int

    @property
    def dev_median(self) -> float:
        return self.median_c - self.site_baseline_c

    @property
    def dev_mean(self) -> float:
        return self.mean_c - self.site_baseline_c

    @property
    def dev_max(self) -> float:
        return self.max_c - self.site_baseline_c

    def with_baseline(self, baseline_c: float) -> "PanelStats":
        return replace(self, site_baseline_c=baseline_c)


@dataclass(frozen=True)
class HotspotCell:
    """One hotspot cell in a panel's detection grid."""

    row: int
    col: int
    delta_t: float
    severity: str


@dataclass(frozen=True)
class Detection:
    id: str
    defect_class: str
    geometry: Polygon
    confidence: float = 1.0
    delta_t: Optional[float] = None
    severity: Optional[str] = None
    panel_ids: Tuple[str, ...] = ()
    source: str = "baseline"
    verdict: str = "pending"

    def __post_init__(self):
        if self.defect_class not in DEFECT_CLASSES:
            raise ValueError(f"unknown defect class {self.defect_class!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")
        if (self.severity is None) != (self.delta_t is None):
            raise ValueError("severity must be present exactly when delta_t is")
        if self.verdict not in ("pending", "accepted", "rejected"):
            raise ValueError(f"bad verdict {self.verdict!r}")


@dataclass(frozen=True)
class Table:
    id: str
    rect: OrientedRect


@dataclass(frozen=True)
class Panel:
    id: str
    table_id: str
    row: int
    col: int
    rect: OrientedRect


@dataclass
class SiteModel:
    """Geometric scaffold: tables and their panel grids, world coordinates."""

    tables: List[Table]
    panels: List[Panel]

    def panels_of(self, table_id: str) -> List[Panel]:
        return [p for p in self.panels if p.table_id == table_id]

    def grid_shape(self, table_id: str) -> Tuple[int, int]:
        ps = self.panels_of(table_id)
        return (max(p.row for p in ps) + 1, max(p.col for p in ps) + 1)


# ---------------------------------------------------------------------------
# Table and panel localization
# ---------------------------------------------------------------------------

def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's between-class variance maximizer over unit-range values."""
    hist, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    total = hist.sum()
    if total == 0:
        raise AllNodataError("otsu threshold of empty sample")
    centers = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(hist)
    w1 = total - w0
    m0 = np.cumsum(hist * centers)
    mu_t = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (mu_t - m0) / w1
        sigma_b = w0 * w1 * (mu0 - mu1) ** 2
    sigma_b[~np.isfinite(sigma_b)] = -1.0
    return float(edges[int(np.argmax(sigma_b)) + 1])


def foreground_mask(ortho_norm: ThermalRaster,
                    threshold_method: str | float = "otsu") -> Tuple[np.ndarray, float]:
    """Binary table-vs-background mask on the stretched ortho."""
    if threshold_method == "otsu":
        thr = otsu_threshold(ortho_norm.valid_values())
    else:
        thr = float(threshold_method)
    fg = (ortho_norm.values > thr) & ortho_norm.mask
    return fg, thr


def detect_tables(ortho_norm: ThermalRaster, min_area_m2: float = 4.0,
                  threshold_method: str | float = "otsu",
                  fg: Optional[np.ndarray] = None) -> List[OrientedRect]:
    """Oriented table rectangles from connected warm components.

    Components below min_area_m2 are dropped. The fitted rectangle is grown
    by one pixel (half a pixel per side) to account for pixel extent, since
    hull points are pixel centers. Output sorted by area, largest first.
    """
    if fg is None:
        fg, _ = foreground_mask(ortho_norm, threshold_method)
    gsd = ortho_norm.transform.gsd
    labels, n = ndimage.label(fg, structure=np.ones((3, 3), dtype=np.int8))
    if n == 0:
        return []
    min_px = min_area_m2 / (gsd * gsd)
    areas = ndimage.sum_labels(fg, labels, index=np.arange(1, n + 1))
    rects = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        if areas[i - 1] < min_px:
            continue
        comp = labels[sl] == i
        boundary = comp & ~ndimage.binary_erosion(comp)
        rr, cc = np.nonzero(boundary)
        rr = rr + sl[0].start
        cc = cc + sl[1].start
        xs, ys = ortho_norm.transform.pixel_to_world(cc + 0.5, rr + 0.5)
        try:
            rect = min_area_rect(list(zip(xs, ys)))
        except DegenerateGeometryError:
            continue
        rects.append(OrientedRect(rect.cx, rect.cy, rect.width + gsd,
                                  rect.height + gsd, rect.angle_deg).canonical())
    rects.sort(key=lambda r: (-r.area, r.cx, r.cy))
    return rects


def fit_panel_grid(table: OrientedRect, panel_w_m: float, panel_h_m: float,
                   gap_m: float = 0.0) -> Tuple[int, int, List[OrientedRect]]:
    """Regular (row, col) grid of panel rectangles at the table's angle.

    Returns (n_rows, n_cols, rects) with rects row-major. Column count comes
    from rounding table.width / (panel_w + gap); rows likewise.
    """
    pitch_w = panel_w_m + gap_m
    pitch_h = panel_h_m + gap_m
    n_cols = round(table.width / pitch_w)
    n_rows = round(table.height / pitch_h)
    if n_cols < 1 or n_rows < 1:
        raise DegenerateGeometryError(
            f"panel dims {panel_w_m}x{panel_h_m}+{gap_m} imply an empty grid "
            f"for a {table.width:.2f}x{table.height:.2f} table"
        )
    # Cells sit at nominal pitch about the table center rather than evenly
    # dividing the rect: a protruding defect (e.g. a rotated panel) inflates
    # the fitted rect and even division would smear that error across every
    # column, displacing edge slots by a sizable fraction of a panel.
    rects = []
    for r in range(n_rows):
        v = (r - (n_rows - 1) / 2.0) * pitch_h
        for c in range(n_cols):
            u = (c - (n_cols - 1) / 2.0) * pitch_w
            cx, cy = table.from_local(u, v)
            rects.append(OrientedRect(cx, cy, panel_w_m, panel_h_m, table.angle_deg))
    return n_rows, n_cols, rects


def build_site_model(table_rects: Sequence[OrientedRect],
                     params: DetectionParams) -> SiteModel:
    """Assign stable ids and panel grids to detected tables."""
    tables = []
    panels = []
    for t_idx, rect in enumerate(table_rects):
        tid = f"t{t_idx:03d}"
        tables.append(Table(id=tid, rect=rect))
        n_rows, n_cols, rects = fit_panel_grid(
            rect, params.panel_width_m, params.panel_height_m, params.panel_gap_m
        )
        for i, prect in enumerate(rects):
            r, c = divmod(i, n_cols)
            panels.append(Panel(id=f"{tid}-r{r}-c{c:02d}", table_id=tid,
                                row=r, col=c, rect=prect))
    return SiteModel(tables=tables, panels=panels)


# ---------------------------------------------------------------------------
# Per-panel temperature statistics
# ---------------------------------------------------------------------------

def _pixels_in_rect(raster: ThermalRaster, rect: OrientedRect):
    """Valid pixel values and rect-local center coordinates inside a rect."""
    t = raster.transform
    corners = rect.corners()
    cols, rows = t.world_to_pixel(corners[:, 0], corners[:, 1])
    c0 = max(int(np.floor(cols.min())), 0)
    r0 = max(int(np.floor(rows.min())), 0)
    c1 = min(int(np.ceil(cols.max())) + 1, raster.width)
    r1 = min(int(np.ceil(rows.max())) + 1, raster.height)
    if c1 <= c0 or r1 <= r0:
        return (np.empty(0, dtype=np.float64),) * 3
    sub = raster.values[r0:r1, c0:c1]
    msk = raster.mask[r0:r1, c0:c1]
    cc, rr = np.meshgrid(np.arange(c0, c1), np.arange(r0, r1))
    xs, ys = t.pixel_to_world(cc + 0.5, rr + 0.5)
    u, v = rect.to_local(xs, ys)
    inside = (np.abs(u) <= rect.width / 2.0) & (np.abs(v) <= rect.height / 2.0) & msk
    # float64 keeps downstream medians independent of storage precision
    return sub[inside].astype(np.float64), u[inside], v[inside]


def compute_panel_stats(raster: ThermalRaster, panel: OrientedRect,
                        site_baseline: float,
                        min_valid_pixels: int = 16) -> Optional[PanelStats]:
    """Stats over valid pixels whose centers fall inside the panel.

    Returns None when fewer than min_valid_pixels are available: the panel is
    uninspectable and takes no part in classification or the baseline.
    """
    vals, _, _ = _pixels_in_rect(raster, panel)
    if vals.size < min_valid_pixels:
        return None
    return PanelStats(
        median_c=float(np.median(vals)),
        mean_c=float(vals.mean()),
        max_c=float(vals.max()),
        site_baseline_c=site_baseline,
        valid_pixel_count=int(vals.size),
    )


def site_baseline(all_stats: Sequence[PanelStats]) -> float:
    """Median of per-panel median temperatures; robust to defective panels."""
    stats = [s for s in all_stats if s is not None]
    if not stats:
        raise AllNodataError("site baseline needs at least one inspectable panel")
    return float(np.median([s.median_c for s in stats]))


def panel_stripe_medians(raster: ThermalRaster,
                         panel: OrientedRect) -> Optional[np.ndarray]:
    """Median temperature of the three long third-stripes of a panel.

    Stripes run along the panel's long axis (bypass-diode substrings span one
    third of the module across its short dimension). Returns None when any
    stripe lacks pixels.
    """
    vals, u, v = _pixels_in_rect(raster, panel)
    if vals.size == 0:
        return None
    # Band across the short dimension so stripes are long.
    if panel.width >= panel.height:
        coord, extent = v, panel.height
    else:
        coord, extent = u, panel.width
    idx = np.clip(((coord + extent / 2.0) / extent * 3).astype(int), 0, 2)
    medians = np.empty(3)
    for i in range(3):
        sel = vals[idx == i]
        if sel.size == 0:
            return None
        medians[i] = np.median(sel)
    return medians


def stripe_contrast(raster: ThermalRaster, panel: OrientedRect) -> Optional[float]:
    """Hottest stripe median minus the median of the other stripes' pixels."""
    vals, u, v = _pixels_in_rect(raster, panel)
    if vals.size == 0:
        return None
    if panel.width >= panel.height:
        coord, extent = v, panel.height
    else:
        coord, extent = u, panel.width
    idx = np.clip(((coord + extent / 2.0) / extent * 3).astype(int), 0, 2)
    best = None
    for i in range(3):
        stripe = vals[idx == i]
        rest = vals[idx != i]
        if stripe.size == 0 or rest.size == 0:
            return None
        contrast = float(np.median(stripe) - np.median(rest))
        if best is None or contrast > best:
            best = contrast
    return best


# ---------------------------------------------------------------------------
# Hotspots
# ---------------------------------------------------------------------------

def severity(delta_t: float,
             cuts: Tuple[float, float, float, float] = DEFAULT_SEVERITY_CUTS) -> str:
    """Severity band for a temperature differential; negatives are S1."""
    if not math.isfinite(delta_t):
        raise ValueError("delta_t must be finite")
    for level, cut in zip(("S5", "S4", "S3", "S2"), reversed(cuts)):
        if delta_t >= cut:
            return level
    return "S1"


def detect_hotspots(raster: ThermalRaster, panel: OrientedRect,
                    grid: Tuple[int, int] = (4, 4), delta_threshold: float = 5.0,
                    margin_m: float = 0.05,
                    severity_cuts: Tuple[float, ...] = DEFAULT_SEVERITY_CUTS,
                    ) -> List[HotspotCell]:
    """Max-median hotspot cells inside the margin-inset panel footprint.

    The inset footprint is subdivided into grid (rows, cols) cells; a cell is
    a hotspot when its max exceeds the footprint median by delta_threshold.
    The boundary inset suppresses false positives from edge bleed.
    """
    inner = panel.inset(margin_m)
    if inner is None:
        return []
    vals, u, v = _pixels_in_rect(raster, inner)
    if vals.size == 0:
        return []
    n_rows, n_cols = grid
    median = float(np.median(vals))
    ci = np.clip(((u + inner.width / 2.0) / inner.width * n_cols).astype(int),
                 0, n_cols - 1)
    ri = np.clip(((v + inner.height / 2.0) / inner.height * n_rows).astype(int),
                 0, n_rows - 1)
    cell = ri * n_cols + ci
    cell_max = np.full(n_rows * n_cols, -np.inf)
    np.maximum.at(cell_max, cell, vals)
    out = []
    for idx in range(n_rows * n_cols):
        if not np.isfinite(cell_max[idx]):
            continue
        delta = float(cell_max[idx]) - median
        if delta >= delta_threshold:
            out.append(HotspotCell(row=idx // n_cols, col=idx % n_cols,
                                   delta_t=delta,
                                   severity=severity(delta, severity_cuts)))
    return out


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def _is_offline(stats: Optional[PanelStats], params: DetectionParams) -> bool:
    """Uniformly elevated panel: high median deviation, low internal spread."""
    return (stats is not None
            and stats.dev_median >= params.offline_delta_c
            and (stats.max_c - stats.median_c) < params.uniformity_max_c)


def classify_defects(site: SiteModel, table: Table,
                     stats: Dict[str, Optional[PanelStats]],
                     cells: Dict[str, List[HotspotCell]],
                     contrasts: Dict[str, Optional[float]],
                     params: DetectionParams) -> List[Detection]:
    """Apply the defect rules to one table, in priority order.

    String outages claim their member panels first; remaining panels get at
    most one of PanelOffline, DiodeBypass, MultiHotspot, or Hotspot.
    Detections carry placeholder ids; the pipeline renumbers them.
    """
    panels = sorted(site.panels_of(table.id), key=lambda p: (p.row, p.col))
    by_pos = {(p.row, p.col): p for p in panels}
    n_rows = max(p.row for p in panels) + 1
    n_cols = max(p.col for p in panels) + 1

    detections: List[Detection] = []
    in_string: set = set()

    for r in range(n_rows):
        run: List[Panel] = []
        for c in range(n_cols + 1):
            panel = by_pos.get((r, c)) if c < n_cols else None
            if panel is not None and _is_offline(stats.get(panel.id), params):
                run.append(panel)
                continue
            if len(run) >= params.string_min_run:
                pts = [tuple(pt) for p in run for pt in p.rect.corners()]
                geom = min_area_rect(pts).polygon()
                delta = max(stats[p.id].dev_median for p in run)
                detections.append(Detection(
                    id="", defect_class="StringOutage", geometry=geom,
                    delta_t=delta, severity=severity(delta, params.severity_cuts),
                    panel_ids=tuple(p.id for p in run)))
                in_string.update(p.id for p in run)
            run = []

    for panel in panels:
        if panel.id in in_string:
            continue
        st = stats.get(panel.id)
        if st is None:
            continue
        geom = panel.rect.polygon()
        pdet = None
        if _is_offline(st, params):
            pdet = ("PanelOffline", st.dev_median)
        else:
            contrast = contrasts.get(panel.id)
            if contrast is not None and contrast >= params.diode_delta_c:
                pdet = ("DiodeBypass", contrast)
            else:
                hs = cells.get(panel.id, [])
                if len(hs) >= 2:
                    pdet = ("MultiHotspot", max(h.delta_t for h in hs))
                elif len(hs) == 1:
                    pdet = ("Hotspot", hs[0].delta_t)
        if pdet is not None:
            cls, delta = pdet
            detections.append(Detection(
                id="", defect_class=cls, geometry=geom, delta_t=delta,
                severity=severity(delta, params.severity_cuts),
                panel_ids=(panel.id,)))
    return detections


# ---------------------------------------------------------------------------
# Tracker misalignment
# ---------------------------------------------------------------------------

def _panel_angle_fit(fg: np.ndarray, transform: GeoTransform, panel: Panel,
                     neighbors: List[Panel], params: DetectionParams
                     ) -> Optional[Tuple[float, float, float, Tuple[float, float]]]:
    """Best-fit rotation of the panel footprint against the warm mask.

    Sweeps candidate angles and scores each by mean coverage (+1 warm,
    -1 cold) of the rotated footprint. Pixels inside neighboring slots are
    excluded so adjacent panels do not bias the fit. The pivot is refined to
    the centroid of warm pixels near the slot first; a tilted panel also sits
    slightly off its nominal slot center, and sweeping about the wrong pivot
    caps the achievable overlap. Returns (best_angle_residual, best_score,
    zero_score, pivot_world) or None when the window is unusable.
    """
    rect = panel.rect
    pad = 0.35 * max(rect.width, rect.height) + transform.gsd
    half_diag = rect.diagonal / 2.0 + pad
    cx_px, cy_px = transform.world_to_pixel(rect.cx, rect.cy)
    r_px = int(math.ceil(half_diag / transform.gsd))
    c0 = max(int(cx_px) - r_px, 0)
    r0 = max(int(cy_px) - r_px, 0)
    c1 = min(int(cx_px) + r_px + 1, fg.shape[1])
    r1 = min(int(cy_px) + r_px + 1, fg.shape[0])
    if c1 <= c0 or r1 <= r0:
        return None
    window = fg[r0:r1, c0:c1]
    cc, rr = np.meshgrid(np.arange(c0, c1), np.arange(r0, r1))
    xs, ys = transform.pixel_to_world(cc + 0.5, rr + 0.5)
    u, v = rect.to_local(xs, ys)
    include = np.ones(window.shape, dtype=bool)
    for nb in neighbors:
        nu, nv = nb.rect.to_local(xs, ys)
        include &= ~((np.abs(nu) <= nb.rect.width / 2.0)
                     & (np.abs(nv) <= nb.rect.height / 2.0))
    warm = window[include].astype(np.float32) * 2.0 - 1.0
    uu = u[include]
    vv = v[include]
    if warm.size == 0:
        return None

    hw, hh = rect.width / 2.0, rect.height / 2.0

    # Pivot refinement. The envelope stays tight (slot grown by a third of
    # its short side) so warm mass from the next column over cannot drag the
    # centroid; the shift is clamped to the same margin.
    margin = 0.35 * min(rect.width, rect.height)
    hot = (warm > 0) & (np.abs(uu) <= hw + margin) & (np.abs(vv) <= hh + margin)
    if hot.any():
        du = float(np.clip(uu[hot].mean(), -margin, margin))
        dv = float(np.clip(vv[hot].mean(), -margin, margin))
    else:
        du = dv = 0.0
    pu = uu - du
    pv = vv - dv

    def score(angle_deg: float) -> float:
        ca = math.cos(math.radians(angle_deg))
        sa = math.sin(math.radians(angle_deg))
        ru = pu * ca + pv * sa
        rv = -pu * sa + pv * ca
        inside = (np.abs(ru) <= hw) & (np.abs(rv) <= hh)
        if not inside.any():
            return -1.0
        return float(warm[inside].mean())

    zero = score(0.0)
    best_angle, best_score = 0.0, zero
    step = 0.5
    sweep = params.misalign_sweep_deg
    for ang in np.arange(-sweep, sweep + step / 2, step):
        if ang == 0.0:
            continue
        s = score(float(ang))
        if s > best_score + 1e-9 or (s > best_score - 1e-9
                                     and abs(ang) < abs(best_angle)):
            best_angle, best_score = float(ang), s
    pivot = rect.from_local(du, dv)
    return best_angle, best_score, zero, (float(pivot[0]), float(pivot[1]))


def detect_misalignment(fg: np.ndarray, transform: GeoTransform, site: SiteModel,
                        params: DetectionParams) -> List[Detection]:
    """Tracker-misalignment detections from panel-angle residuals.

    A panel is screened first: when its nominal slot is nearly fully covered
    by warm pixels the angle fit is skipped. Flagged panels must beat the
    unrotated fit by a score margin and exceed the angle threshold.
    """
    detections = []
    by_table: Dict[str, List[Panel]] = {}
    for p in site.panels:
        by_table.setdefault(p.table_id, []).append(p)

    for table in site.tables:
        panels = sorted(by_table.get(table.id, []), key=lambda p: (p.row, p.col))
        by_pos = {(p.row, p.col): p for p in panels}
        for panel in panels:
            fill = _slot_fill(fg, transform, panel.rect)
            if fill is None or fill >= 0.95:
                continue
            neighbors = [by_pos[(panel.row + dr, panel.col + dc)]
                         for dr in (-1, 0, 1) for dc in (-1, 0, 1)
                         if (dr, dc) != (0, 0)
                         and (panel.row + dr, panel.col + dc) in by_pos]
            fit = _panel_angle_fit(fg, transform, panel, neighbors, params)
            if fit is None:
                continue
            residual, best, zero, (px, py) = fit
            if (abs(residual) >= params.misalign_deg
                    and best - zero >= params.misalign_score_margin):
                geom = OrientedRect(px, py, panel.rect.width, panel.rect.height,
                                    panel.rect.angle_deg + residual).polygon()
                detections.append(Detection(
                    id="", defect_class="TrackerMisalignment", geometry=geom,
                    panel_ids=(panel.id,)))
    return detections


def _slot_fill(fg: np.ndarray, transform: GeoTransform,
               rect: OrientedRect) -> Optional[float]:
    """Fraction of a slot's pixels that are warm; None if off-raster."""
    corners = rect.corners()
    cols, rows = transform.world_to_pixel(corners[:, 0], corners[:, 1])
    c0 = max(int(np.floor(cols.min())), 0)
    r0 = max(int(np.floor(rows.min())), 0)
    c1 = min(int(np.ceil(cols.max())) + 1, fg.shape[1])
    r1 = min(int(np.ceil(rows.max())) + 1, fg.shape[0])
    if c1 <= c0 or r1 <= r0:
        return None
    cc, rr = np.meshgrid(np.arange(c0, c1), np.arange(r0, r1))
    xs, ys = transform.pixel_to_world(cc + 0.5, rr + 0.5)
    u, v = rect.to_local(xs, ys)
    inside = (np.abs(u) <= rect.width / 2.0) & (np.abs(v) <= rect.height / 2.0)
    n = int(inside.sum())
    if n == 0:
        return None
    return float(fg[r0:r1, c0:c1][inside].sum()) / n


# ---------------------------------------------------------------------------
# Structural filtering and the import boundary
# ---------------------------------------------------------------------------

def filter_off_structure(detections: Sequence[Detection], panels: Sequence[Panel],
                         tables: Sequence[Table]) -> List[Detection]:
    """Drop detections whose centroid lies off the site structure.

    Everything outside all tables is dropped. Imported panel-level detections
    must additionally sit inside a panel polygon; multi-panel string outages
    only need the table test. Baseline detections are panel-born and pass by
    construction. Never adds detections; idempotent.
    """
    table_shapes = [t.rect.polygon().shape for t in tables]
    panel_shapes = [p.rect.polygon().shape for p in panels]
    table_tree = STRtree(table_shapes) if table_shapes else None
    panel_tree = STRtree(panel_shapes) if panel_shapes else None

    kept = []
    for det in detections:
        cx, cy = det.geometry.centroid
        pt = shapely.geometry.Point(cx, cy)
        if table_tree is None:
            continue
        hits = table_tree.query(pt, predicate="covered_by")
        if len(hits) == 0:
            continue
        if det.source == "imported" and det.defect_class != "StringOutage":
            if panel_tree is None:
                continue
            if len(panel_tree.query(pt, predicate="covered_by")) == 0:
                continue
        kept.append(det)
    return kept


def assign_panel_ids(detections: Sequence[Detection],
                     panels: Sequence[Panel]) -> List[Detection]:
    """Attach ids of overlapping panels to detections that lack them."""
    shapes = [p.rect.polygon().shape for p in panels]
    tree = STRtree(shapes) if shapes else None
    out = []
    for det in detections:
        if det.panel_ids or tree is None:
            out.append(det)
            continue
        hits = tree.query(det.geometry.shape, predicate="intersects")
        ids = sorted(panels[i].id for i in hits)
        out.append(replace(det, panel_ids=tuple(ids)))
    return out


@dataclass
class ImportReport:
    accepted: int = 0
    rejected: List[Tuple[str, str]] = field(default_factory=list)


def canonical_class(name: str) -> Optional[str]:
    key = "".join(ch for ch in name.lower() if ch.isalpha())
    return _CLASS_ALIASES.get(key)


def import_detections(collection: dict,
                      ring_to_world: Callable[[Sequence], List[Tuple[float, float]]],
                      severity_cuts: Tuple[float, ...] = DEFAULT_SEVERITY_CUTS,
                      ) -> Tuple[List[Detection], ImportReport]:
    """Parse a GeoJSON FeatureCollection into imported detections.

    Class names are matched case-insensitively; features with unknown classes
    or unusable geometry are rejected per-feature and listed in the report.
    ``ring_to_world`` converts a GeoJSON exterior ring into projected world
    coordinates.
    """
    if collection.get("type") != "FeatureCollection":
        raise ValueError("expected a GeoJSON FeatureCollection")
    detections: List[Detection] = []
    report = ImportReport()
    for i, feat in enumerate(collection.get("features", [])):
        props = feat.get("properties") or {}
        fid = str(feat.get("id") or props.get("id") or f"imp-{i:04d}")
        raw_class = props.get("class") or props.get("defect_class") or ""
        cls = canonical_class(str(raw_class))
        if cls is None:
            report.rejected.append((fid, f"unknown class {raw_class!r}"))
            continue
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon" or not geom.get("coordinates"):
            report.rejected.append((fid, "geometry must be a Polygon"))
            continue
        try:
            ring = ring_to_world(geom["coordinates"][0])
            polygon = Polygon(tuple(ring))
        except (DegenerateGeometryError, ValueError, TypeError) as exc:
            report.rejected.append((fid, f"bad geometry: {exc}"))
            continue
        delta_t = props.get("delta_t")
        delta_t = float(delta_t) if delta_t is not None else None
        sev = props.get("severity") if delta_t is not None else None
        if delta_t is not None and sev not in SEVERITY_LEVELS:
            sev = severity(delta_t, severity_cuts)
        confidence = float(props.get("confidence", 1.0))
        panel_ids = tuple(props.get("panel_ids") or ())
        detections.append(Detection(
            id=fid, defect_class=cls, geometry=polygon, confidence=confidence,
            delta_t=delta_t, severity=sev, panel_ids=panel_ids,
            source="imported", verdict="pending"))
        report.accepted += 1
    return detections, report


def detection_properties(det: Detection) -> dict:
    """GeoJSON property block for one detection."""
    return {
        "id": det.id,
        "class": det.defect_class,
        "confidence": round(det.confidence, 6),
        "delta_t": round(det.delta_t, 6) if det.delta_t is not None else None,
        "severity": det.severity,
        "panel_ids": list(det.panel_ids),
        "source": det.source,
        "verdict": det.verdict,
    }
