#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace landkit {

// Coordinate reference for a pixel grid. `origin` is the lon/lat of the CENTER
// of pixel (0,0); `pixel_size` is the per-pixel step (d_lat is negative for the
// usual north-up grids).
struct GeoRef {
    std::string crs = "EPSG:4326";
    double origin_lon = 0.0;
    double origin_lat = 0.0;
    double pixel_dlon = 1.0;
    double pixel_dlat = -1.0;

    bool operator==(const GeoRef&) const = default;

    // Center coordinates of pixel (col, row).
    std::pair<double, double> pixel_center(int col, int row) const {
        return {origin_lon + col * pixel_dlon, origin_lat + row * pixel_dlat};
    }
    // Nearest pixel for a lon/lat position (may be out of bounds; caller checks).
    std::pair<int, int> nearest_pixel(double lon, double lat) const;
};

// One channel of a raster: a width*height row-major grid of doubles.
struct Band {
    std::string name;
    std::optional<std::pair<double, double>> wavelength_um;
    std::vector<double> values;
};

// Immutable multiband raster with one shared validity mask (1 = valid pixel).
// All mutation happens by constructing a new Raster, so instances can be shared
// freely across threads.
class Raster {
public:
    Raster(int width, int height, std::vector<Band> bands,
           std::vector<uint8_t> mask, GeoRef geo);

    int width() const { return width_; }
    int height() const { return height_; }
    size_t pixel_count() const { return static_cast<size_t>(width_) * height_; }
    int band_count() const { return static_cast<int>(bands_.size()); }

    const std::vector<Band>& bands() const { return bands_; }
    const Band& band(int i) const { return bands_.at(static_cast<size_t>(i)); }
    // Throws BandNotFound.
    const Band& band(const std::string& name) const;
    bool has_band(const std::string& name) const;
    int band_index(const std::string& name) const;  // -1 if absent

    const std::vector<uint8_t>& mask() const { return mask_; }
    bool valid_at(int col, int row) const {
        return mask_[static_cast<size_t>(row) * width_ + col] != 0;
    }
    size_t valid_count() const;

    double value_at(int band, int col, int row) const {
        return bands_[static_cast<size_t>(band)]
            .values[static_cast<size_t>(row) * width_ + col];
    }

    const GeoRef& geo() const { return geo_; }

private:
    int width_;
    int height_;
    std::vector<Band> bands_;
    std::vector<uint8_t> mask_;
    GeoRef geo_;
};

struct PixelWindow {
    int col = 0;
    int row = 0;
    int width = 0;
    int height = 0;
};

// Sub-raster copy with a translated GeoRef origin. Throws BoundsError if the
// window leaves the grid.
Raster clip(const Raster& raster, const PixelWindow& window);

}  // namespace landkit
