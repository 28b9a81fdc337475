"""HTTP review service over a completed inspection run.

Serves the site summary, filterable detection overlays, web-mercator raster
tiles (IR grayscale and RGB), and verdict writes. Ratings returned by the
API are always recomputed from the current verdict state with the same
analytics code the pipeline used; pending detections count as real.

Verdicts persist as an append-only JSONL journal next to the run artifacts,
with a snapshot written every few dozen entries; loading a session replays
the journal, so state survives restarts byte-for-byte. Writes are serialized
through one lock; tile endpoints are read-only.
"""

from __future__ import annotations

import io
import json
import threading
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from fastapi import FastAPI, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel
from rasterio.crs import CRS
from rasterio.warp import calculate_default_transform, reproject, Resampling

from . import geojson
from .analytics import (EconomicsConfig, LossModel, build_report,
                        power_and_revenue_loss, report_from_dict,
                        report_to_dict)
from .detect import DEFECT_CLASSES, SEVERITY_LEVELS, Detection
from .raster import RasterSource

SNAPSHOT_EVERY = 25
VERDICTS = ("pending", "accepted", "rejected")

SEVERITY_COLOR = {
    "S1": ("yellow", "#fbbc04"),
    "S2": ("yellow", "#fbbc04"),
    "S3": ("orange", "#f29900"),
    "S4": ("red", "#d93025"),
    "S5": ("red", "#d93025"),
}

MERC = "EPSG:3857"
_HALF_WORLD = 20037508.342789244


def _loss_model_from(d: Dict[str, float]) -> LossModel:
    return LossModel(
        hotspot=d.get("Hotspot", 0.33),
        multi_hotspot=d.get("MultiHotspot", 0.66),
        diode_bypass=d.get("DiodeBypass", 0.33),
        panel_offline=d.get("PanelOffline", 1.0),
        string_outage=d.get("StringOutage", 1.0),
        tracker_misalignment=d.get("TrackerMisalignment", 0.10),
    )


class ReviewSession:
    """Verdict state over one run's detections, with durable journal."""

    def __init__(self, results_dir: Path):
        self.results_dir = Path(results_dir)
        self.journal_path = self.results_dir / "review.jsonl"
        self.snapshot_path = self.results_dir / "review_snapshot.json"
        self._lock = threading.Lock()
        self._summary_cache: Optional[dict] = None

        report_doc = json.loads(
            (self.results_dir / "report.json").read_text(encoding="utf-8"))
        self.meta, self._pipeline_report = report_from_dict(report_doc)
        self.loss_model = _loss_model_from(report_doc.get("loss_model", {}))
        econ = report_doc.get("economics", {})
        self.economics = EconomicsConfig(
            capacity_factor=econ.get("capacity_factor", 0.25),
            energy_price_usd_per_mwh=econ.get("energy_price_usd_per_mwh", 30.0),
            horizon_years=econ.get("horizon_years", 1.0),
        )

        collection = geojson.read_geojson(self.results_dir / "detections.geojson")
        self._features = {str(f["id"]): f for f in collection["features"]}
        self.crs_code = geojson.collection_crs(collection)
        base = geojson.detections_from_collection(collection)
        self._detections: Dict[str, Detection] = {d.id: d for d in base}
        self._order = [d.id for d in base]

        # verdict state: id -> {verdict, note, ts}
        self._state: Dict[str, dict] = {}
        self._journal_lines = 0
        self._load_state()

    # -- persistence --------------------------------------------------------

    def _load_state(self) -> None:
        start = 0
        if self.snapshot_path.exists():
            snap = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            self._state = {k: dict(v) for k, v in snap.get("state", {}).items()
                           if k in self._detections}
            start = int(snap.get("journal_lines", 0))
        lines = []
        if self.journal_path.exists():
            with open(self.journal_path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        for line in lines[start:]:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            if entry.get("id") in self._detections:
                self._state[entry["id"]] = {
                    "verdict": entry["verdict"],
                    "note": entry.get("note", ""),
                    "ts": entry.get("ts", 0.0),
                }
        self._journal_lines = len(lines)
        self._apply_state()

    def _snapshot(self) -> None:
        doc = {"state": self._state, "journal_lines": self._journal_lines}
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
        tmp.replace(self.snapshot_path)

    def _apply_state(self) -> None:
        for det_id, entry in self._state.items():
            det = self._detections[det_id]
            if det.verdict != entry["verdict"]:
                self._detections[det_id] = replace(det, verdict=entry["verdict"])
        self._summary_cache = None

    # -- queries ------------------------------------------------------------

    def detections(self) -> List[Detection]:
        return [self._detections[i] for i in self._order]

    def verdict_of(self, det_id: str) -> dict:
        entry = self._state.get(det_id)
        if entry is not None:
            return entry
        return {"verdict": "pending", "note": "", "ts": 0.0}

    def detection_loss(self, det: Detection) -> Tuple[float, float]:
        n = max(len(det.panel_ids), 1)
        frac = self.loss_model.fraction(det.defect_class)
        loss_mw = n * frac * self.meta.module_wattage_w / 1e6
        return power_and_revenue_loss(loss_mw, self.economics)

    def summary(self) -> dict:
        with self._lock:
            if self._summary_cache is None:
                report = build_report(
                    self.meta, self.detections(), self.loss_model,
                    self.economics,
                    site_baseline_c=self._pipeline_report.site_baseline_c,
                    n_panels=self._pipeline_report.n_panels,
                    n_uninspectable=self._pipeline_report.n_uninspectable)
                self._summary_cache = report_to_dict(self.meta, report)
            return self._summary_cache

    # -- writes -------------------------------------------------------------

    def set_verdict(self, det_id: str, verdict: str, note: str = "") -> dict:
        if det_id not in self._detections:
            raise KeyError(det_id)
        if verdict not in VERDICTS:
            raise ValueError(f"bad verdict {verdict!r}")
        with self._lock:
            current = self._state.get(det_id)
            if (current is not None and current["verdict"] == verdict
                    and current.get("note", "") == note):
                return dict(current)
            entry = {"id": det_id, "verdict": verdict, "note": note,
                     "ts": round(time.time(), 3)}
            with open(self.journal_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._journal_lines += 1
            self._state[det_id] = {"verdict": verdict, "note": note,
                                   "ts": entry["ts"]}
            self._detections[det_id] = replace(self._detections[det_id],
                                               verdict=verdict)
            self._summary_cache = None
            if self._journal_lines % SNAPSHOT_EVERY == 0:
                self._snapshot()
            return dict(self._state[det_id])


# ---------------------------------------------------------------------------
# Raster tile layers
# ---------------------------------------------------------------------------

class TileLayer:
    """One raster reprojected to web-mercator, sampled per tile on demand.

    All tiles sample a single global-grid array with nearest neighbor, so
    adjacent tiles share edge pixels by construction.
    """

    def __init__(self, rgba: np.ndarray, transform, width: int, height: int):
        self.rgba = rgba
        self.a = transform.a
        self.c = transform.c
        self.e = transform.e
        self.f = transform.f
        self.width = width
        self.height = height
        self.x_min = self.c
        self.x_max = self.c + self.a * width
        self.y_max = self.f
        self.y_min = self.f + self.e * height

    def tile(self, z: int, x: int, y: int) -> Optional[bytes]:
        n = 2 ** z
        if not 0 <= x < n or not 0 <= y < n:
            return None
        span = 2 * _HALF_WORLD / n
        tx0 = -_HALF_WORLD + x * span
        ty1 = _HALF_WORLD - y * span
        if (tx0 > self.x_max or tx0 + span < self.x_min
                or ty1 < self.y_min or ty1 - span > self.y_max):
            return None
        step = span / 256.0
        xs = tx0 + (np.arange(256) + 0.5) * step
        ys = ty1 - (np.arange(256) + 0.5) * step
        cols = np.floor((xs - self.c) / self.a).astype(np.int64)
        rows = np.floor((ys - self.f) / self.e).astype(np.int64)
        ok_c = (cols >= 0) & (cols < self.width)
        ok_r = (rows >= 0) & (rows < self.height)
        out = np.zeros((256, 256, 4), dtype=np.uint8)
        if ok_c.any() and ok_r.any():
            block = self.rgba[np.ix_(rows[ok_r], cols[ok_c])]
            out[np.ix_(ok_r, ok_c)] = block
        buf = io.BytesIO()
        Image.fromarray(out, mode="RGBA").save(buf, format="PNG")
        return buf.getvalue()


def _reproject_to_mercator(values: np.ndarray, mask: np.ndarray, transform,
                           crs_code: str):
    """Nearest-neighbor reprojection of an RGBA uint8 stack to EPSG:3857."""
    src_crs = CRS.from_string(crs_code)
    dst_crs = CRS.from_string(MERC)
    height, width = values.shape[:2]
    left = transform.origin_x
    top = transform.origin_y
    right = left + transform.pixel_w * width
    bottom = top + transform.pixel_h * height
    dst_transform, dst_w, dst_h = calculate_default_transform(
        src_crs, dst_crs, width, height,
        left=left, bottom=bottom, right=right, top=top)
    bands = values.shape[2]
    rgba = np.zeros((dst_h, dst_w, 4), dtype=np.uint8)
    src_affine = transform.to_affine()
    for b in range(bands):
        reproject(source=np.ascontiguousarray(values[:, :, b]),
                  destination=rgba[:, :, b],
                  src_transform=src_affine, src_crs=src_crs,
                  dst_transform=dst_transform, dst_crs=dst_crs,
                  resampling=Resampling.nearest)
    if bands == 1:
        rgba[:, :, 1] = rgba[:, :, 0]
        rgba[:, :, 2] = rgba[:, :, 0]
    alpha = np.zeros((dst_h, dst_w), dtype=np.uint8)
    reproject(source=mask.astype(np.uint8) * 255, destination=alpha,
              src_transform=src_affine, src_crs=src_crs,
              dst_transform=dst_transform, dst_crs=dst_crs,
              resampling=Resampling.nearest)
    rgba[:, :, 3] = alpha
    return TileLayer(rgba, dst_transform, dst_w, dst_h)


def _load_layers(results_dir: Path, manifest: dict) -> Dict[str, TileLayer]:
    from .preprocess import NormalizationParams, ortho_statistics
    from .raster import load_raster, load_rgb

    layers: Dict[str, TileLayer] = {}
    cfg = manifest.get("config", {})
    ir_path = cfg.get("raster", {}).get("ir")
    rgb_path = cfg.get("raster", {}).get("rgb")
    norm = cfg.get("normalize", {})
    params = NormalizationParams(
        lo_percentile=norm.get("lo_percentile", 0.01),
        hi_percentile=norm.get("hi_percentile", 0.99),
        equalization_bins=norm.get("bins", 256))

    ir_file = _find_raster(results_dir, ir_path)
    if ir_file is not None:
        raster = load_raster(ir_file)
        lo, hi = ortho_statistics(raster, params)
        if hi <= lo:
            hi = lo + 1.0
        gray = np.clip((raster.values - lo) / (hi - lo), 0.0, 1.0)
        gray_u8 = (gray * 255.0 + 0.5).astype(np.uint8)[:, :, None]
        layers["ir"] = _reproject_to_mercator(gray_u8, raster.mask,
                                              raster.transform,
                                              raster.transform.crs_code)
    rgb_file = _find_raster(results_dir, rgb_path)
    if rgb_file is not None:
        rgb = load_rgb(rgb_file)
        layers["rgb"] = _reproject_to_mercator(rgb.values, rgb.mask,
                                               rgb.transform,
                                               rgb.transform.crs_code)
    return layers


def _find_raster(results_dir: Path, recorded: Optional[str]) -> Optional[Path]:
    """Resolve a manifest raster path; falls back to the run directory area."""
    if not recorded:
        return None
    p = Path(recorded)
    for candidate in (p, results_dir / p.name, results_dir.parent / p.name):
        if candidate.is_file():
            return candidate
    return None


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------

class VerdictBody(BaseModel):
    verdict: str
    note: str = ""


def create_app(results_dir: Path, frontend_dir: Optional[Path] = None,
               load_tiles: bool = True) -> FastAPI:
    results_dir = Path(results_dir)
    app = FastAPI(title="solarscan review")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    have_results = (results_dir / "report.json").is_file() and \
        (results_dir / "detections.geojson").is_file()
    session: Optional[ReviewSession] = None
    layers: Dict[str, TileLayer] = {}
    if have_results:
        session = ReviewSession(results_dir)
        manifest_path = results_dir / "manifest.json"
        manifest = (json.loads(manifest_path.read_text(encoding="utf-8"))
                    if manifest_path.is_file() else {})
        if load_tiles:
            layers = _load_layers(results_dir, manifest)
    app.state.session = session

    def _no_results() -> JSONResponse:
        return JSONResponse({"detail": "no results loaded"}, status_code=404)

    @app.get("/api/site")
    def api_site():
        if session is None:
            return _no_results()
        return session.summary()

    @app.get("/api/detections")
    def api_detections(severity: Optional[str] = None,
                       defect_class: Optional[str] = Query(None, alias="class"),
                       verdict: Optional[str] = None):
        if session is None:
            return _no_results()
        if severity is not None and severity not in SEVERITY_LEVELS:
            return JSONResponse({"detail": f"bad severity {severity!r}"},
                                status_code=400)
        if defect_class is not None and defect_class not in DEFECT_CLASSES:
            return JSONResponse({"detail": f"bad class {defect_class!r}"},
                                status_code=400)
        if verdict is not None and verdict not in VERDICTS:
            return JSONResponse({"detail": f"bad verdict {verdict!r}"},
                                status_code=400)
        feats = []
        for det in session.detections():
            if severity is not None and det.severity != severity:
                continue
            if defect_class is not None and det.defect_class != defect_class:
                continue
            if verdict is not None and det.verdict != verdict:
                continue
            feat = json.loads(json.dumps(session._features[det.id]))
            props = feat["properties"]
            props["verdict"] = det.verdict
            props["note"] = session.verdict_of(det.id)["note"]
            band, color = SEVERITY_COLOR.get(det.severity or "S1")
            props["severity_band"] = band
            props["color"] = color
            loss_mw, loss_usd = session.detection_loss(det)
            props["loss_mw"] = round(loss_mw, 9)
            props["loss_usd"] = round(loss_usd, 2)
            feats.append(feat)
        return {"type": "FeatureCollection",
                "projected_crs": session.crs_code, "features": feats}

    @app.post("/api/detections/{det_id}/verdict")
    def api_verdict(det_id: str, body: VerdictBody):
        if session is None:
            return _no_results()
        try:
            entry = session.set_verdict(det_id, body.verdict, body.note)
        except KeyError:
            return JSONResponse({"detail": f"unknown detection {det_id!r}"},
                                status_code=404)
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        return {"id": det_id, "verdict": entry["verdict"],
                "note": entry["note"], "summary": session.summary()}

    @app.get("/tiles/{layer}/{z}/{x}/{y}.png")
    def api_tile(layer: str, z: int, x: int, y: int):
        if layer not in ("ir", "rgb"):
            return JSONResponse({"detail": f"unknown layer {layer!r}"},
                                status_code=404)
        tl = layers.get(layer)
        if tl is None:
            return JSONResponse({"detail": f"layer {layer!r} not loaded"},
                                status_code=404)
        png = tl.tile(z, x, y)
        if png is None:
            return Response(status_code=204)
        return Response(content=png, media_type="image/png")

    @app.get("/api/meta")
    def api_meta():
        if session is None:
            return _no_results()
        bounds = None
        if layers:
            tl = next(iter(layers.values()))
            bounds = {"x_min": tl.x_min, "y_min": tl.y_min,
                      "x_max": tl.x_max, "y_max": tl.y_max}
        return {"layers": sorted(layers.keys()),
                "mercator_bounds": bounds,
                "site_id": session.meta.site_id,
                "crs": session.crs_code}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True),
                  name="console")
    return app
