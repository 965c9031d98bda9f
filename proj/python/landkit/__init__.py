"""Landsat land-cover toolkit: compositing, classification, change detection.

Thin wrapper over the C++ core. Every pipeline function takes the path to a
JSONC pipeline config (the same file the `landkit` CLI reads) and returns a
dict of the artifacts it wrote. Rasters cross the boundary as dicts with
``names``, a ``(bands, height, width)`` float64 ``data`` cube, a ``mask``,
and the georeference fields.
"""

from landkit._core import (
    ConfigError,
    Error,
    InsufficientDataError,
    IoError,
    __version__,
    append_indices,
    change,
    classify,
    composite,
    index_names,
    read_raster,
    sweep,
    synth,
    train,
    write_raster,
)

__all__ = [
    "ConfigError",
    "Error",
    "InsufficientDataError",
    "IoError",
    "__version__",
    "append_indices",
    "change",
    "classify",
    "composite",
    "index_names",
    "read_raster",
    "sweep",
    "synth",
    "train",
    "write_raster",
]
