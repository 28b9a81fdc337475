"""Normalization chain and overlapping tile planning.

The chain runs ortho-level percentile clipping and linear stretching to [0, 1],
then per-tile min-max normalization and histogram equalization. Tiles default
to 1024 px squares with 25% overlap; edge tiles are shifted inward (never
shrunk or padded) so tile statistics are never diluted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import AllNodataError
from .raster import PixelWindow, ThermalRaster


@dataclass(frozen=True)
class NormalizationParams:
    lo_percentile: float = 0.01
    hi_percentile: float = 0.99
    equalization_bins: int = 256

    def __post_init__(self):
        if not (0.0 <= self.lo_percentile < self.hi_percentile <= 1.0):
            raise ValueError(
                f"need 0 <= lo < hi <= 1, got {self.lo_percentile}, {self.hi_percentile}"
            )
        if self.equalization_bins < 2:
            raise ValueError("equalization_bins must be >= 2")


@dataclass(frozen=True)
class TilePlan:
    tile_size: int
    overlap: float
    windows: Tuple[PixelWindow, ...]

    @property
    def stride(self) -> int:
        return max(1, round(self.tile_size * (1.0 - self.overlap)))


def ortho_statistics(raster: ThermalRaster,
                     params: NormalizationParams) -> Tuple[float, float]:
    """Clip percentiles over valid pixels, linear-interpolated rank."""
    valid = raster.valid_values()
    if valid.size == 0:
        raise AllNodataError("cannot compute ortho statistics: no valid pixels")
    lo, hi = np.percentile(valid, [params.lo_percentile * 100.0,
                                   params.hi_percentile * 100.0])
    return float(lo), float(hi)


def clip_and_stretch(raster: ThermalRaster, p_lo: float, p_hi: float) -> ThermalRaster:
    """Clamp to [p_lo, p_hi] and rescale to [0, 1]; nodata is preserved.

    A degenerate range (p_lo == p_hi) maps every valid pixel to 0.0 so constant
    backgrounds never produce NaN.
    """
    if p_lo > p_hi:
        raise ValueError(f"p_lo {p_lo} > p_hi {p_hi}")
    values = raster.values.astype(np.float32, copy=False)
    if p_lo == p_hi:
        out = np.zeros_like(values)
    else:
        out = np.clip((values - p_lo) / (p_hi - p_lo), 0.0, 1.0).astype(np.float32)
    out[~raster.mask] = 0.0
    return raster.replaced(out)


def _axis_offsets(length: int, tile: int, stride: int) -> list[int]:
    if length <= tile:
        return [0]
    offs = list(range(0, length - tile, stride))
    offs.append(length - tile)  # last window shifted inward to end at the edge
    return offs


def plan_tiles(width: int, height: int, tile_size: int = 1024,
               overlap: float = 0.25) -> TilePlan:
    """Row-major tile windows covering every pixel.

    Default parameters give a 768 px stride. Images smaller than tile_size in
    an axis get a single window clamped to the image extent in that axis.
    """
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    stride = max(1, round(tile_size * (1.0 - overlap)))
    cols = _axis_offsets(width, tile_size, stride)
    rows = _axis_offsets(height, tile_size, stride)
    windows = tuple(
        PixelWindow(c, r, min(tile_size, width), min(tile_size, height))
        for r in rows for c in cols
    )
    return TilePlan(tile_size=tile_size, overlap=overlap, windows=windows)


def tile_normalize(tile: ThermalRaster) -> Optional[ThermalRaster]:
    """Min-max rescale a tile over its valid pixels.

    Returns None for an all-nodata tile (skip signal: the tile is dropped from
    detection). A constant tile maps to 0.0 everywhere.
    """
    valid = tile.valid_values()
    if valid.size == 0:
        return None
    lo = float(valid.min())
    hi = float(valid.max())
    if hi == lo:
        out = np.zeros_like(tile.values, dtype=np.float32)
    else:
        out = ((tile.values - lo) / (hi - lo)).astype(np.float32)
        out = np.clip(out, 0.0, 1.0)
    out[~tile.mask] = 0.0
    return tile.replaced(out)


def histogram_equalize(tile: ThermalRaster, bins: int = 256) -> ThermalRaster:
    """CDF-map a unit-range tile; monotone in the input, output in [0, 1]."""
    values = tile.values
    idx = np.minimum((values * bins).astype(np.int32), bins - 1)
    idx = np.maximum(idx, 0)
    counts = np.bincount(idx[tile.mask], minlength=bins)
    total = counts.sum()
    if total == 0:
        return tile.replaced(np.zeros_like(values, dtype=np.float32))
    cdf = np.cumsum(counts) / float(total)
    out = cdf[idx].astype(np.float32)
    out[~tile.mask] = 0.0
    return tile.replaced(out)
