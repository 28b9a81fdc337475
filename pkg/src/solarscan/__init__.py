"""Thermal-orthomosaic inspection of solar PV sites.

Reads a georeferenced thermal ortho, localizes tables and panels, flags
defects by their IR signatures, grades the site with a three-letter health
rating, and serves results for analyst review.
"""

__version__ = "0.1.0"

from .errors import (AllNodataError, ConfigError, DegenerateGeometryError,
                     GeographicCrsError, MissingGeoreferenceError,
                     PipelineStageError, RasterReadError, SolarScanError,
                     WindowOutsideBoundsError)

__all__ = [
    "__version__",
    "AllNodataError",
    "ConfigError",
    "DegenerateGeometryError",
    "GeographicCrsError",
    "MissingGeoreferenceError",
    "PipelineStageError",
    "RasterReadError",
    "SolarScanError",
    "WindowOutsideBoundsError",
]
