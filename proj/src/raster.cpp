#include "landkit/raster.hpp"

#include <cmath>
#include <set>

#include "landkit/errors.hpp"

namespace landkit {

std::pair<int, int> GeoRef::nearest_pixel(double lon, double lat) const {
    int col = static_cast<int>(std::lround((lon - origin_lon) / pixel_dlon));
    int row = static_cast<int>(std::lround((lat - origin_lat) / pixel_dlat));
    return {col, row};
}

Raster::Raster(int width, int height, std::vector<Band> bands,
               std::vector<uint8_t> mask, GeoRef geo)
    : width_(width), height_(height), bands_(std::move(bands)),
      mask_(std::move(mask)), geo_(std::move(geo)) {
    if (width_ <= 0 || height_ <= 0)
        throw ShapeError("raster dimensions must be positive");
    if (bands_.empty())
        throw ShapeError("raster needs at least one band");
    const size_t n = pixel_count();
    std::set<std::string> names;
    for (const auto& b : bands_) {
        if (b.values.size() != n)
            throw ShapeError("band '" + b.name + "' size does not match raster grid");
        if (!names.insert(b.name).second)
            throw NameCollision("duplicate band name '" + b.name + "'");
    }
    if (mask_.size() != n)
        throw ShapeError("mask size does not match raster grid");
    if (geo_.crs.empty())
        throw ShapeError("CRS identifier must be non-empty");
    if (geo_.pixel_dlon == 0.0 || geo_.pixel_dlat == 0.0)
        throw ShapeError("pixel size components must be non-zero");
}

const Band& Raster::band(const std::string& name) const {
    int i = band_index(name);
    if (i < 0) throw BandNotFound("no band named '" + name + "'");
    return bands_[static_cast<size_t>(i)];
}

bool Raster::has_band(const std::string& name) const {
    return band_index(name) >= 0;
}

int Raster::band_index(const std::string& name) const {
    for (size_t i = 0; i < bands_.size(); ++i)
        if (bands_[i].name == name) return static_cast<int>(i);
    return -1;
}

size_t Raster::valid_count() const {
    size_t n = 0;
    for (uint8_t m : mask_) n += m != 0;
    return n;
}

Raster clip(const Raster& raster, const PixelWindow& window) {
    if (window.width <= 0 || window.height <= 0)
        throw BoundsError("clip window must have positive size");
    if (window.col < 0 || window.row < 0 ||
        window.col + window.width > raster.width() ||
        window.row + window.height > raster.height())
        throw BoundsError("clip window exceeds raster bounds");

    const size_t n = static_cast<size_t>(window.width) * window.height;
    std::vector<Band> bands;
    bands.reserve(raster.bands().size());
    for (const auto& src : raster.bands()) {
        Band b{src.name, src.wavelength_um, std::vector<double>(n)};
        for (int r = 0; r < window.height; ++r) {
            const double* src_row = src.values.data() +
                static_cast<size_t>(window.row + r) * raster.width() + window.col;
            std::copy(src_row, src_row + window.width,
                      b.values.data() + static_cast<size_t>(r) * window.width);
        }
        bands.push_back(std::move(b));
    }
    std::vector<uint8_t> mask(n);
    for (int r = 0; r < window.height; ++r) {
        const uint8_t* src_row = raster.mask().data() +
            static_cast<size_t>(window.row + r) * raster.width() + window.col;
        std::copy(src_row, src_row + window.width,
                  mask.data() + static_cast<size_t>(r) * window.width);
    }

    GeoRef geo = raster.geo();
    geo.origin_lon += window.col * geo.pixel_dlon;
    geo.origin_lat += window.row * geo.pixel_dlat;
    return Raster(window.width, window.height, std::move(bands), std::move(mask),
                  std::move(geo));
}

}  // namespace landkit
