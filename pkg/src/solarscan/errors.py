"""Exception types shared across the package."""


class SolarScanError(Exception):
    """Base class for all package errors."""


class RasterReadError(SolarScanError):
    """File missing, unreadable, or with an unsupported sample format."""


class MissingGeoreferenceError(RasterReadError):
    """Raster has no usable affine geotransform."""


class GeographicCrsError(RasterReadError):
    """Raster CRS is geographic (degrees); a projected, metric CRS is required."""


class WindowOutsideBoundsError(SolarScanError):
    """Requested pixel window does not intersect the raster."""


class AllNodataError(SolarScanError):
    """Operation needs at least one valid pixel but found none."""


class DegenerateGeometryError(SolarScanError):
    """Input points or polygon are degenerate (collinear, zero area, ...)."""


class ConfigError(SolarScanError):
    """Invalid or inconsistent inspection configuration."""


class PipelineStageError(SolarScanError):
    """A pipeline stage failed; carries the stage name for the run manifest."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
