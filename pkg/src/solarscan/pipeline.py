"""Inspection run orchestration: ingest through artifacts.

Stages run in a fixed order: ingest, normalize, table detection, tile
planning and per-tile normalization over table-covered tiles only, panel
grid and statistics, defect detection (baseline rules or an imported
prediction file), structural filtering, cross-tile merge, analytics, and
artifact writing. Tile and panel stages fan out on a bounded thread pool;
every reduction happens in input order, so results are identical for any
worker count. Output GeoJSON and report files carry no timestamps; repeated
runs of one config are byte-identical.

Per-stage wall times and item counters land in manifest.json, which also
echoes the full effective config and its hash.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import rasterio
import shapely
import shapely.geometry

from . import __version__, geojson
from .analytics import SiteHealthReport, build_report, report_to_dict
from .config import InspectionConfig
from .detect import (Detection, DetectionParams, HotspotCell, PanelStats,
                     SiteModel, assign_panel_ids, build_site_model,
                     classify_defects, compute_panel_stats, detect_hotspots,
                     detect_misalignment, detect_tables, filter_off_structure,
                     foreground_mask, import_detections, site_baseline,
                     stripe_contrast)
from .errors import AllNodataError, PipelineStageError
from .geometry import merge_detections
from .preprocess import (TilePlan, clip_and_stretch, histogram_equalize,
                         ortho_statistics, plan_tiles, tile_normalize)
from .raster import GeoTransform, RasterSource, ThermalRaster

ARTIFACTS = ("tables.geojson", "panels.geojson", "detections.geojson",
             "report.json", "manifest.json")


@dataclass
class InspectionResult:
    site: SiteModel
    detections: List[Detection]
    report: SiteHealthReport
    manifest: dict
    output_dir: Path

    def path(self, name: str) -> Path:
        return self.output_dir / name


# ---------------------------------------------------------------------------
# Individual stages (public so runs can be composed piecewise)
# ---------------------------------------------------------------------------

def normalized_ortho(raster: ThermalRaster,
                     config: InspectionConfig) -> ThermalRaster:
    lo, hi = ortho_statistics(raster, config.normalization)
    return clip_and_stretch(raster, lo, hi)


def covered_tile_windows(plan: TilePlan, transform: GeoTransform,
                         site: SiteModel) -> List[int]:
    """Indices of planned tiles that overlap at least one table polygon."""
    if not site.tables:
        return []
    tree = shapely.STRtree([t.rect.polygon().shape for t in site.tables])
    covered = []
    for i, win in enumerate(plan.windows):
        corners = [(win.col_off, win.row_off),
                   (win.col_off + win.width, win.row_off),
                   (win.col_off + win.width, win.row_off + win.height),
                   (win.col_off, win.row_off + win.height)]
        pts = [transform.pixel_to_world(c, r) for c, r in corners]
        tile_poly = shapely.geometry.Polygon(pts)
        if len(tree.query(tile_poly, predicate="intersects")) > 0:
            covered.append(i)
    return covered


def equalize_tiles(ortho_norm: ThermalRaster, plan: TilePlan,
                   covered: Sequence[int], bins: int,
                   workers: int) -> Tuple[int, int]:
    """Per-tile min-max normalize + equalize every covered tile.

    The equalized tiles are the input surface of learned detectors; the
    baseline rules work on physical temperatures instead, so tiles are
    processed for the contract (and counters) and then dropped. Returns
    (processed, skipped_all_nodata).
    """
    def job(i: int) -> bool:
        tile = ortho_norm.window(plan.windows[i])
        norm = tile_normalize(tile)
        if norm is None:
            return False
        histogram_equalize(norm, bins=bins)
        return True

    with ThreadPoolExecutor(max_workers=workers) as pool:
        flags = list(pool.map(job, covered))
    processed = sum(flags)
    return processed, len(flags) - processed


def panel_statistics(raster: ThermalRaster, site: SiteModel,
                     params: DetectionParams, workers: int,
                     ) -> Tuple[Optional[float], Dict[str, Optional[PanelStats]],
                                Dict[str, List[HotspotCell]],
                                Dict[str, Optional[float]]]:
    """Per-panel stats, hotspot cells, and stripe contrasts, in parallel.

    The site baseline is the median of panel medians, computed after the
    first pass and folded back into every PanelStats.
    """
    if not site.panels:
        return None, {}, {}, {}

    def job(panel):
        stats = compute_panel_stats(raster, panel.rect, 0.0,
                                    params.min_valid_pixels)
        if stats is None:
            return None, [], None
        cells = detect_hotspots(raster, panel.rect, params.hotspot_grid,
                                params.hotspot_delta_c, params.hotspot_margin_m,
                                params.severity_cuts)
        contrast = stripe_contrast(raster, panel.rect)
        return stats, cells, contrast

    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(job, site.panels))

    inspectable = [r[0] for r in rows if r[0] is not None]
    if not inspectable:
        raise AllNodataError("no inspectable panels on site")
    baseline = site_baseline(inspectable)
    stats = {p.id: (r[0].with_baseline(baseline) if r[0] is not None else None)
             for p, r in zip(site.panels, rows)}
    cells = {p.id: r[1] for p, r in zip(site.panels, rows)}
    contrasts = {p.id: r[2] for p, r in zip(site.panels, rows)}
    return baseline, stats, cells, contrasts


def baseline_detections(site: SiteModel, stats, cells, contrasts,
                        fg: np.ndarray, transform: GeoTransform,
                        params: DetectionParams) -> List[Detection]:
    detections: List[Detection] = []
    for table in site.tables:
        if site.panels_of(table.id):
            detections.extend(
                classify_defects(site, table, stats, cells, contrasts, params))
    detections.extend(detect_misalignment(fg, transform, site, params))
    return [replace(d, id=f"d{i:04d}") for i, d in enumerate(detections)]


def imported_detections(config: InspectionConfig, crs_code: str,
                        site: SiteModel, params: DetectionParams,
                        ) -> Tuple[List[Detection], dict]:
    collection = geojson.read_geojson(config.import_path)
    dets, report = import_detections(
        collection, lambda ring: geojson.ring_from_wgs84(ring, crs_code),
        params.severity_cuts)
    dets = assign_panel_ids(dets, site.panels)
    return dets, {"accepted": report.accepted,
                  "rejected": [list(r) for r in report.rejected]}


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------

def run_inspection(config: InspectionConfig) -> InspectionResult:
    config.validate_files()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = config.detection

    timings: Dict[str, float] = {}
    counters: Dict[str, object] = {}
    manifest: Dict[str, object] = {}

    @contextmanager
    def stage(name: str):
        t0 = time.perf_counter()
        try:
            yield
        except PipelineStageError:
            raise
        except Exception as exc:
            timings[name] = round(time.perf_counter() - t0, 6)
            _write_manifest(out, config, counters, timings,
                            error={"stage": name, "message": str(exc)})
            raise PipelineStageError(name, str(exc)) from exc
        timings[name] = round(time.perf_counter() - t0, 6)

    with stage("ingest"):
        with RasterSource(config.ir_path) as src:
            raster = src.read_full()
        transform = raster.transform
        crs_code = transform.crs_code
        counters["raster_px"] = [raster.width, raster.height]

    with stage("normalize"):
        ortho_norm = normalized_ortho(raster, config)

    with stage("tables"):
        fg, threshold = foreground_mask(ortho_norm, params.table_threshold)
        rects = detect_tables(ortho_norm, params.table_min_area_m2,
                              params.table_threshold, fg=fg)
        site = build_site_model(rects, params)
        counters["tables_detected"] = len(site.tables)
        counters["panels_gridded"] = len(site.panels)
        counters["fg_threshold"] = round(threshold, 6)

    with stage("tiles"):
        plan = plan_tiles(raster.width, raster.height, config.tile_size,
                          config.overlap)
        covered = covered_tile_windows(plan, transform, site)
        processed, skipped = equalize_tiles(
            ortho_norm, plan, covered, config.normalization.equalization_bins,
            config.workers)
        counters["tiles_planned"] = len(plan.windows)
        counters["tiles_covered"] = len(covered)
        counters["tiles_processed"] = processed
        counters["tiles_skipped_nodata"] = skipped

    with stage("panels"):
        if site.panels:
            baseline, stats, cells, contrasts = panel_statistics(
                raster, site, params, config.workers)
        else:
            baseline, stats, cells, contrasts = None, {}, {}, {}
        counters["panels_uninspectable"] = sum(
            1 for s in stats.values() if s is None)

    with stage("detect"):
        if config.detector_mode == "import":
            detections, import_report = imported_detections(
                config, crs_code, site, params)
            counters["import"] = import_report
        else:
            detections = baseline_detections(site, stats, cells, contrasts,
                                             fg, transform, params)
        counters["detections_raw"] = len(detections)

    with stage("filter"):
        detections = filter_off_structure(detections, site.panels, site.tables)
        counters["detections_on_structure"] = len(detections)

    with stage("merge"):
        detections = merge_detections(detections, params.nms_iou)
        detections.sort(key=lambda d: d.id)
        counters["detections_final"] = len(detections)

    with stage("analytics"):
        report = build_report(
            config.site, detections, config.loss_model, config.economics,
            site_baseline_c=baseline, n_panels=len(site.panels),
            n_uninspectable=int(counters["panels_uninspectable"]))

    with stage("artifacts"):
        geojson.write_geojson(
            geojson.tables_to_collection(site.tables, crs_code),
            out / "tables.geojson")
        geojson.write_geojson(
            geojson.panels_to_collection(site.panels, crs_code),
            out / "panels.geojson")
        geojson.write_geojson(
            geojson.detections_to_collection(detections, crs_code),
            out / "detections.geojson")
        report_doc = report_to_dict(config.site, report)
        (out / "report.json").write_text(
            json.dumps(report_doc, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")

    manifest = _write_manifest(out, config, counters, timings)
    return InspectionResult(site=site, detections=detections, report=report,
                            manifest=manifest, output_dir=out)


def config_hash(config: InspectionConfig) -> str:
    blob = json.dumps(config.echo(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(out: Path, config: InspectionConfig, counters: dict,
                    timings: dict, error: Optional[dict] = None) -> dict:
    manifest = {
        "config": config.echo(),
        "config_sha256": config_hash(config),
        "versions": {
            "solarscan": __version__,
            "numpy": np.__version__,
            "rasterio": rasterio.__version__,
            "shapely": shapely.__version__,
        },
        "counters": counters,
        "timings_s": timings,
        "artifacts": [a for a in ARTIFACTS if (out / a).exists()
                      or a == "manifest.json"],
    }
    if error is not None:
        manifest["error"] = error
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return manifest
