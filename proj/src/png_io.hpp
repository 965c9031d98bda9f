// Minimal deterministic PNG writers over libpng. Compression level and filter
// strategy are pinned so identical pixels produce identical bytes, which the
// rendering contracts rely on.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace landkit::pngio {

using Rgb = std::array<uint8_t, 3>;

// 8-bit indexed-color image; palette holds at most 256 entries.
void write_indexed(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& indices,
                   const std::vector<Rgb>& palette);

// 8-bit RGB image, 3 bytes per pixel, row-major.
void write_rgb(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb);

}  // namespace landkit::pngio
