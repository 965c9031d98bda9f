#pragma once

#include <string>

#include "landkit/raster.hpp"

namespace landkit {

// Dependency-free raster container used for test fixtures and intermediate
// artifacts. Layout (little-endian throughout):
//   magic "LKR1"
//   u32 width, u32 height, u32 band_count
//   crs: u16 length + UTF-8 bytes
//   f64 origin_lon, origin_lat, pixel_dlon, pixel_dlat
//   per band: name (u16 length + UTF-8), then width*height f64 row-major values
//   width*height mask bytes (1 = valid)
Raster read_portable(const std::string& path);
void write_portable(const Raster& raster, const std::string& path);

}  // namespace landkit
