#pragma once

#include <string>

#include "landkit/raster.hpp"

namespace landkit {

// Reads a single- or multi-band GeoTIFF. Supported pixel types: uint8, uint16,
// int16, float32, float64 (anything else is a FormatError). Both strip and tile
// layouts are accepted; compression is whatever libtiff decodes. A pixel is
// masked when any band equals the file's nodata value (tag 42113). Band names
// come from GDAL-style per-band descriptions when present, else "band_k".
// The file must carry a geotransform (pixel scale + tiepoint, or an
// axis-aligned transformation matrix).
Raster read_geotiff(const std::string& path);

// Writes bands as interleaved float64 with deflate compression. Masked pixels
// are stored as NaN and advertised through the nodata tag, so
// read_geotiff(write_geotiff(r)) reproduces values, mask, and GeoRef exactly
// for valid pixels.
void write_geotiff(const Raster& raster, const std::string& path);

}  // namespace landkit
