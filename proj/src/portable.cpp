#include "landkit/portable.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "landkit/errors.hpp"
#include "wire.hpp"

namespace landkit {

namespace {

constexpr char kMagic[4] = {'L', 'K', 'R', '1'};
constexpr const char* kWhat = "portable raster";

}  // namespace

void write_portable(const Raster& raster, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");

    os.write(kMagic, 4);
    wire::put_u32(os, static_cast<uint32_t>(raster.width()));
    wire::put_u32(os, static_cast<uint32_t>(raster.height()));
    wire::put_u32(os, static_cast<uint32_t>(raster.band_count()));
    wire::put_string(os, raster.geo().crs);
    wire::put_f64(os, raster.geo().origin_lon);
    wire::put_f64(os, raster.geo().origin_lat);
    wire::put_f64(os, raster.geo().pixel_dlon);
    wire::put_f64(os, raster.geo().pixel_dlat);
    for (const auto& band : raster.bands()) {
        wire::put_string(os, band.name);
        for (double v : band.values) wire::put_f64(os, v);
    }
    os.write(reinterpret_cast<const char*>(raster.mask().data()),
             static_cast<std::streamsize>(raster.mask().size()));
    if (!os) throw IoError("failed writing '" + path + "'");
}

Raster read_portable(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");

    char magic[4];
    if (!is.read(magic, 4)) throw IoError("portable raster truncated");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("'" + path + "' is not a portable raster (bad magic)");

    uint32_t width = wire::get_u32(is, kWhat);
    uint32_t height = wire::get_u32(is, kWhat);
    uint32_t band_count = wire::get_u32(is, kWhat);
    if (width == 0 || height == 0 || band_count == 0)
        throw FormatError("portable raster has degenerate dimensions");

    GeoRef geo;
    geo.crs = wire::get_string(is, kWhat);
    geo.origin_lon = wire::get_f64(is, kWhat);
    geo.origin_lat = wire::get_f64(is, kWhat);
    geo.pixel_dlon = wire::get_f64(is, kWhat);
    geo.pixel_dlat = wire::get_f64(is, kWhat);

    const size_t n = static_cast<size_t>(width) * height;
    std::vector<Band> bands;
    bands.reserve(band_count);
    for (uint32_t b = 0; b < band_count; ++b) {
        Band band;
        band.name = wire::get_string(is, kWhat);
        band.values.resize(n);
        for (size_t i = 0; i < n; ++i) band.values[i] = wire::get_f64(is, kWhat);
        bands.push_back(std::move(band));
    }
    std::vector<uint8_t> mask(n);
    if (!is.read(reinterpret_cast<char*>(mask.data()),
                 static_cast<std::streamsize>(n)))
        throw IoError("portable raster truncated");

    return Raster(static_cast<int>(width), static_cast<int>(height),
                  std::move(bands), std::move(mask), std::move(geo));
}

}  // namespace landkit
