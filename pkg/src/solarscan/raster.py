"""Georeferenced raster access.

Loads thermal (single-band float) and RGB (3-band uint8) GeoTIFFs, serves
rectangular pixel windows without materializing the whole file, and converts
between pixel and world coordinates via the GDAL-style affine geotransform.
Temperatures are taken as stored (degrees C); no radiometric correction is
applied here.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import rasterio
from rasterio.transform import Affine
from rasterio.windows import Window

from .errors import (
    GeographicCrsError,
    MissingGeoreferenceError,
    RasterReadError,
    WindowOutsideBoundsError,
)

DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel->world map in a projected CRS (meters).

    ``pixel_h`` is negative for north-up rasters. ``rot_x``/``rot_y`` are the
    off-diagonal shear terms, normally zero for orthomosaics.
    """

    origin_x: float
    origin_y: float
    pixel_w: float
    pixel_h: float
    rot_x: float = 0.0
    rot_y: float = 0.0
    crs_code: str = ""

    def __post_init__(self):
        if self.pixel_w <= 0:
            raise ValueError(f"pixel_w must be > 0, got {self.pixel_w}")
        if self.pixel_h == 0:
            raise ValueError("pixel_h must be nonzero")
        if abs(self.det) <= 1e-12:
            raise ValueError("geotransform linear part is singular")

    @property
    def det(self) -> float:
        return self.pixel_w * self.pixel_h - self.rot_x * self.rot_y

    @property
    def gsd(self) -> float:
        """Ground sampling distance (meters/pixel) along the x axis."""
        return abs(self.pixel_w)

    def pixel_to_world(self, col, row):
        """Map fractional pixel coordinates to world (x, y). Accepts arrays."""
        x = self.origin_x + np.asarray(col) * self.pixel_w + np.asarray(row) * self.rot_x
        y = self.origin_y + np.asarray(col) * self.rot_y + np.asarray(row) * self.pixel_h
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def world_to_pixel(self, x, y):
        """Inverse affine map from world (x, y) to fractional (col, row)."""
        dx = np.asarray(x) - self.origin_x
        dy = np.asarray(y) - self.origin_y
        det = self.det
        col = (dx * self.pixel_h - dy * self.rot_x) / det
        row = (dy * self.pixel_w - dx * self.rot_y) / det
        if np.ndim(col) == 0:
            return float(col), float(row)
        return col, row

    def translated(self, col_off: int, row_off: int) -> "GeoTransform":
        """Transform for a window whose (0,0) sits at (col_off, row_off)."""
        ox, oy = self.pixel_to_world(col_off, row_off)
        return replace(self, origin_x=ox, origin_y=oy)

    def to_affine(self) -> Affine:
        return Affine(self.pixel_w, self.rot_x, self.origin_x,
                      self.rot_y, self.pixel_h, self.origin_y)

    @classmethod
    def from_affine(cls, a: Affine, crs_code: str) -> "GeoTransform":
        return cls(origin_x=a.c, origin_y=a.f, pixel_w=a.a, pixel_h=a.e,
                   rot_x=a.b, rot_y=a.d, crs_code=crs_code)


@dataclass(frozen=True)
class PixelWindow:
    """Rectangular pixel region (column/row offsets, width, height)."""

    col_off: int
    row_off: int
    width: int
    height: int

    def clamped(self, raster_width: int, raster_height: int) -> "PixelWindow":
        """Intersect with the raster bounds; raises if the result is empty."""
        c0 = max(self.col_off, 0)
        r0 = max(self.row_off, 0)
        c1 = min(self.col_off + self.width, raster_width)
        r1 = min(self.row_off + self.height, raster_height)
        if c1 <= c0 or r1 <= r0:
            raise WindowOutsideBoundsError(
                f"window {self} lies outside a {raster_width}x{raster_height} raster"
            )
        return PixelWindow(c0, r0, c1 - c0, r1 - r0)


@dataclass
class ThermalRaster:
    """In-memory raster: values grid, validity mask, and geotransform.

    ``values`` is (H, W) float for thermal data or (H, W, 3) uint8 for RGB.
    ``mask`` is (H, W) bool, True where the pixel is valid. Masked pixels are
    excluded from every downstream statistic.
    """

    values: np.ndarray
    mask: np.ndarray
    transform: GeoTransform

    def __post_init__(self):
        if self.values.shape[:2] != self.mask.shape:
            raise ValueError("values and mask shapes disagree")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def valid_values(self) -> np.ndarray:
        """1-D array of valid pixel values (thermal rasters only)."""
        return self.values[self.mask]

    def window(self, win: PixelWindow) -> "ThermalRaster":
        """Sub-raster for a window, clamped to bounds."""
        w = win.clamped(self.width, self.height)
        sl = (slice(w.row_off, w.row_off + w.height),
              slice(w.col_off, w.col_off + w.width))
        return ThermalRaster(self.values[sl], self.mask[sl],
                             self.transform.translated(w.col_off, w.row_off))

    def replaced(self, values: np.ndarray) -> "ThermalRaster":
        return ThermalRaster(values, self.mask, self.transform)


def _check_dataset(src: rasterio.DatasetReader, band: int, path: Path) -> str:
    if band < 1 or band > src.count:
        raise RasterReadError(f"{path}: band {band} not present (file has {src.count})")
    if src.transform is None or src.transform == Affine.identity():
        raise MissingGeoreferenceError(f"{path}: no affine geotransform")
    if src.crs is None:
        raise MissingGeoreferenceError(f"{path}: no CRS metadata")
    if src.crs.is_geographic:
        raise GeographicCrsError(
            f"{path}: CRS {src.crs} is geographic; reproject to a projected "
            "(meter-unit) CRS before inspection"
        )
    dtype = src.dtypes[band - 1]
    if dtype.startswith("complex"):
        raise RasterReadError(f"{path}: unsupported sample format {dtype}")
    return str(src.crs)


class RasterSource:
    """Windowed read access to a GeoTIFF.

    A source may be shared across worker threads: each thread gets its own
    dataset handle, so concurrent window reads are safe. Read-only.
    """

    def __init__(self, path, band: int = 1):
        self.path = Path(path)
        self.band = band
        if not self.path.exists():
            raise RasterReadError(f"raster not found: {self.path}")
        self._local = threading.local()
        with rasterio.open(self.path) as src:
            self._crs_code = _check_dataset(src, band, self.path)
            self.width = src.width
            self.height = src.height
            self.nodata = src.nodata
            self.transform = GeoTransform.from_affine(src.transform, self._crs_code)

    def _dataset(self) -> rasterio.DatasetReader:
        ds = getattr(self._local, "ds", None)
        if ds is None or ds.closed:
            ds = rasterio.open(self.path)
            self._local.ds = ds
        return ds

    def read(self, window: PixelWindow) -> ThermalRaster:
        """Read one clamped window; only the requested pixels are fetched."""
        w = window.clamped(self.width, self.height)
        ds = self._dataset()
        data = ds.read(self.band, window=Window(w.col_off, w.row_off, w.width, w.height))
        values = data.astype(np.float32, copy=False)
        mask = np.isfinite(values)
        if self.nodata is not None:
            mask &= values != np.float32(self.nodata)
        return ThermalRaster(values, mask, self.transform.translated(w.col_off, w.row_off))

    def read_full(self) -> ThermalRaster:
        return self.read(PixelWindow(0, 0, self.width, self.height))

    def close(self):
        ds = getattr(self._local, "ds", None)
        if ds is not None and not ds.closed:
            ds.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def load_raster(path, band: int = 1) -> ThermalRaster:
    """Load a whole single-band raster into memory."""
    with RasterSource(path, band) as src:
        return src.read_full()


def load_rgb(path) -> ThermalRaster:
    """Load a 3-band uint8 raster (display only; analytics never touch RGB)."""
    p = Path(path)
    if not p.exists():
        raise RasterReadError(f"raster not found: {p}")
    with rasterio.open(p) as src:
        crs_code = _check_dataset(src, 1, p)
        if src.count < 3:
            raise RasterReadError(f"{p}: expected 3 bands, found {src.count}")
        data = src.read([1, 2, 3])
        mask = src.read_masks(1) > 0
        transform = GeoTransform.from_affine(src.transform, crs_code)
    values = np.moveaxis(data, 0, -1).astype(np.uint8)
    return ThermalRaster(values, mask, transform)


def write_raster(path, raster: ThermalRaster, tiled: bool = True,
                 nodata: Optional[float] = DEFAULT_NODATA):
    """Write a ThermalRaster to GeoTIFF. Invalid pixels get the nodata value.

    RGB rasters (H, W, 3 uint8) are written as 3 bands with a dataset mask
    instead of a nodata tag.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    is_rgb = raster.values.ndim == 3
    count = 3 if is_rgb else 1
    dtype = "uint8" if is_rgb else "float32"
    profile = {
        "driver": "GTiff",
        "width": raster.width,
        "height": raster.height,
        "count": count,
        "dtype": dtype,
        "crs": raster.transform.crs_code,
        "transform": raster.transform.to_affine(),
        "compress": "deflate",
    }
    if tiled:
        profile.update(tiled=True, blockxsize=256, blockysize=256)
    if not is_rgb:
        profile["nodata"] = nodata
    with rasterio.open(path, "w", **profile) as dst:
        if is_rgb:
            for b in range(3):
                dst.write(raster.values[:, :, b], b + 1)
            dst.write_mask(np.where(raster.mask, 255, 0).astype(np.uint8))
        else:
            out = raster.values.astype(np.float32, copy=True)
            if nodata is not None:
                out[~raster.mask] = nodata
            dst.write(out, 1)
