#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "landkit/raster.hpp"
#include "landkit/rng.hpp"

namespace testsup {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / ("landkit_" + tag + "_" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create temp dir");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path path() const { return path_; }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }

private:
    std::filesystem::path path_;
};

// Random raster with the given shape; mask_prob is the chance a pixel is valid.
landkit::Raster random_raster(int width, int height, int bands, uint64_t seed,
                              double mask_prob = 1.0);

// Writes a TIFF the way a foreign tool would (selectable pixel type, optional
// nodata), so the reader is exercised against files our writer never produces.
enum class FixturePixel { U8, U16, I16, F32, F64 };
void write_foreign_tiff(const std::string& path, int width, int height,
                        int bands, FixturePixel type,
                        const std::vector<double>& values, bool tiled = false,
                        const double* nodata = nullptr);

bool rasters_equal(const landkit::Raster& a, const landkit::Raster& b,
                   bool compare_masked_values = true);

}  // namespace testsup
