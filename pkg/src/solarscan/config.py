"""Inspection run configuration, loaded from a single TOML document.

Every tunable lives here: raster paths, site metadata, normalization and
tiling parameters, detector thresholds, the loss model, economics, and run
settings. Relative paths resolve against the config file's directory. The
full effective configuration (defaults included) is echoed into the run
manifest so results are self-describing.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analytics import EconomicsConfig, LossModel, SiteMetadata
from .detect import DetectionParams
from .errors import ConfigError
from .preprocess import NormalizationParams

DETECTOR_MODES = ("baseline", "import")


@dataclass(frozen=True)
class InspectionConfig:
    ir_path: Path
    site: SiteMetadata
    output_dir: Path
    rgb_path: Optional[Path] = None
    normalization: NormalizationParams = field(default_factory=NormalizationParams)
    tile_size: int = 1024
    overlap: float = 0.25
    detector_mode: str = "baseline"
    import_path: Optional[Path] = None
    detection: DetectionParams = field(default_factory=DetectionParams)
    loss_model: LossModel = field(default_factory=LossModel)
    economics: EconomicsConfig = field(default_factory=EconomicsConfig)
    workers: int = 4

    def __post_init__(self):
        if self.detector_mode not in DETECTOR_MODES:
            raise ConfigError(f"detector mode must be one of {DETECTOR_MODES}")
        if self.detector_mode == "import" and self.import_path is None:
            raise ConfigError("detector mode 'import' needs an import_path")
        if self.tile_size < 64:
            raise ConfigError("tile_size must be >= 64")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError("overlap must be in [0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def validate_files(self) -> None:
        if not self.ir_path.is_file():
            raise ConfigError(f"IR raster not found: {self.ir_path}")
        if self.rgb_path is not None and not self.rgb_path.is_file():
            raise ConfigError(f"RGB raster not found: {self.rgb_path}")
        if self.import_path is not None and not self.import_path.is_file():
            raise ConfigError(f"import file not found: {self.import_path}")

    def echo(self) -> dict:
        """Every effective setting, defaults included, as plain data."""
        det = self.detection
        norm = self.normalization
        return {
            "raster": {
                "ir": str(self.ir_path),
                "rgb": str(self.rgb_path) if self.rgb_path else None,
            },
            "site": {
                "site_id": self.site.site_id,
                "capacity_mw_dc": self.site.capacity_mw_dc,
                "module_wattage_w": self.site.module_wattage_w,
                "module_type": self.site.module_type,
                "mount_type": self.site.mount_type,
                "commission_year": self.site.commission_year,
                "state": self.site.state,
                "location": list(self.site.location),
            },
            "normalize": {
                "lo_percentile": norm.lo_percentile,
                "hi_percentile": norm.hi_percentile,
                "bins": norm.equalization_bins,
                "tile_size": self.tile_size,
                "overlap": self.overlap,
            },
            "detector": {
                "mode": self.detector_mode,
                "import_path": str(self.import_path) if self.import_path else None,
            },
            "detect": {
                "table_min_area_m2": det.table_min_area_m2,
                "table_threshold": det.table_threshold,
                "panel_width_m": det.panel_width_m,
                "panel_height_m": det.panel_height_m,
                "panel_gap_m": det.panel_gap_m,
                "min_valid_pixels": det.min_valid_pixels,
                "hotspot_grid": list(det.hotspot_grid),
                "hotspot_delta_c": det.hotspot_delta_c,
                "hotspot_margin_m": det.hotspot_margin_m,
                "severity_cuts": list(det.severity_cuts),
                "offline_delta_c": det.offline_delta_c,
                "uniformity_max_c": det.uniformity_max_c,
                "diode_delta_c": det.diode_delta_c,
                "string_min_run": det.string_min_run,
                "misalign_deg": det.misalign_deg,
                "misalign_sweep_deg": det.misalign_sweep_deg,
                "misalign_score_margin": det.misalign_score_margin,
                "nms_iou": det.nms_iou,
            },
            "loss": self.loss_model.as_dict(),
            "economics": {
                "capacity_factor": self.economics.capacity_factor,
                "energy_price_usd_per_mwh": self.economics.energy_price_usd_per_mwh,
                "horizon_years": self.economics.horizon_years,
            },
            "run": {
                "output_dir": str(self.output_dir),
                "workers": self.workers,
            },
        }


def _resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def load_config(path: Path, overrides: Optional[dict] = None) -> InspectionConfig:
    """Parse and validate a TOML config file.

    ``overrides`` patches top-level sections after parsing (CLI flags use it,
    e.g. forcing workers or the output directory).
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    if overrides:
        for section, patch in overrides.items():
            doc.setdefault(section, {}).update(patch)
    base = path.parent

    raster = doc.get("raster", {})
    ir = _resolve(base, raster.get("ir"))
    if ir is None:
        raise ConfigError("raster.ir is required")

    site_doc = doc.get("site", {})
    try:
        site = SiteMetadata(
            site_id=str(site_doc.get("site_id", path.stem)),
            capacity_mw_dc=float(site_doc["capacity_mw_dc"]),
            module_wattage_w=float(site_doc["module_wattage_w"]),
            module_type=site_doc.get("module_type", "poly-crystalline"),
            mount_type=site_doc.get("mount_type", "ground-fixed"),
            commission_year=int(site_doc.get("commission_year", 2018)),
            state=str(site_doc.get("state", "CO")),
            location=tuple(site_doc.get("location", (0.0, 0.0))),
        )
    except KeyError as exc:
        raise ConfigError(f"site section missing required key {exc}")
    except ValueError as exc:
        raise ConfigError(f"bad site metadata: {exc}")

    norm_doc = doc.get("normalize", {})
    try:
        norm = NormalizationParams(
            lo_percentile=float(norm_doc.get("lo_percentile", 0.01)),
            hi_percentile=float(norm_doc.get("hi_percentile", 0.99)),
            equalization_bins=int(norm_doc.get("bins", 256)),
        )
        detector_doc = doc.get("detector", {})
        det_doc = doc.get("detect", {})
        defaults = DetectionParams()
        detection = DetectionParams(**{
            f: _coerce_like(getattr(defaults, f), det_doc[f])
            for f in det_doc if hasattr(defaults, f)
        })
        loss_doc = doc.get("loss", {})
        loss = LossModel(
            hotspot=float(loss_doc.get("hotspot", 0.33)),
            multi_hotspot=float(loss_doc.get("multi_hotspot", 0.66)),
            diode_bypass=float(loss_doc.get("diode_bypass", 0.33)),
            panel_offline=float(loss_doc.get("panel_offline", 1.0)),
            string_outage=float(loss_doc.get("string_outage", 1.0)),
            tracker_misalignment=float(loss_doc.get("tracker_misalignment", 0.10)),
        )
        econ_doc = doc.get("economics", {})
        econ = EconomicsConfig(
            capacity_factor=float(econ_doc.get("capacity_factor", 0.25)),
            energy_price_usd_per_mwh=float(
                econ_doc.get("energy_price_usd_per_mwh", 30.0)),
            horizon_years=float(econ_doc.get("horizon_years", 1.0)),
        )
        run_doc = doc.get("run", {})
        return InspectionConfig(
            ir_path=ir,
            rgb_path=_resolve(base, raster.get("rgb")),
            site=site,
            normalization=norm,
            tile_size=int(norm_doc.get("tile_size", 1024)),
            overlap=float(norm_doc.get("overlap", 0.25)),
            detector_mode=str(detector_doc.get("mode", "baseline")),
            import_path=_resolve(base, detector_doc.get("import_path")),
            detection=detection,
            loss_model=loss,
            economics=econ,
            output_dir=_resolve(base, run_doc.get("output_dir", "results")),
            workers=int(run_doc.get("workers", 4)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in {path}: {exc}")


def _coerce_like(default, value):
    """Coerce a TOML value to the type of the matching default."""
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int) and not isinstance(value, bool):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return tuple(type(d)(v) for d, v in zip(default, value))
    return value
