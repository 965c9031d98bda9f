#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "landkit/raster.hpp"

namespace landkit {

struct ClassDef {
    int id = 0;
    std::string name;
    std::array<uint8_t, 3> color{0, 0, 0};  // render palette RGB
};

// Ordered label vocabulary; ids must run 0..n-1 in order.
struct ClassScheme {
    std::vector<ClassDef> classes;

    // Seven-class land-cover scheme: Urban Areas, Grass/Agricultural Land,
    // Forest, Bare Soil, Water Bodies, Coastal Areas, Wetland.
    static ClassScheme lulc7();

    size_t size() const { return classes.size(); }
    const ClassDef& class_by_id(int id) const;  // throws ConfigError
    int id_of(const std::string& name) const;   // -1 if absent
    void validate() const;                      // throws ConfigError
};

// A ground-truth annotation at one pixel.
struct LabeledPoint {
    int col = 0;
    int row = 0;
    int class_id = 0;
    int year = 0;
    std::string source;  // annotation provenance, e.g. "csv:points.csv"
};

// Square window cut from a raster, pixel-major / channel-minor, so the flat
// vector is also the MLP input layout and per-pixel channel runs stay
// contiguous for 1x1 convolutions.
struct Chip {
    int chip_size = 0;
    int channels = 0;
    std::pair<int, int> center{0, 0};  // (col, row) in the source raster
    std::optional<int> label;
    std::vector<double> window;  // chip_size * chip_size * channels

    double at(int dx, int dy, int c) const {
        return window[(static_cast<size_t>(dy) * chip_size + dx) * channels + c];
    }
};

struct NormalizationStats {
    std::vector<double> mean;    // per channel
    std::vector<double> stddev;  // per channel; zero-variance forced to 1

    bool operator==(const NormalizationStats&) const = default;
};

struct ChipDataset {
    std::vector<Chip> chips;
    std::string split_tag = "unlabeled";  // train | test | unlabeled
    std::optional<NormalizationStats> normalization;

    size_t size() const { return chips.size(); }
    int channels() const { return chips.empty() ? 0 : chips.front().channels; }
    int chip_size() const { return chips.empty() ? 0 : chips.front().chip_size; }
};

// Window centered at `center`; positions outside the grid replicate the edge
// pixel, and in-bounds but masked neighbors take the center pixel's values so
// no-information pixels cannot leak garbage into the window. Throws
// BoundsError for centers off the grid, ConfigError for even/non-positive
// chip sizes.
Chip extract_chip(const Raster& raster, std::pair<int, int> center,
                  int chip_size = 9);

// One chip per pixel in row-major order, without materializing them all (a
// full scene's chips would not fit in memory). Returns the number visited.
size_t for_each_chip(const Raster& raster, int chip_size,
                     const std::function<void(const Chip&)>& fn);

// What to do when a class has fewer points than train+test asks for.
enum class UnderfullPolicy {
    error,     // throw InsufficientDataError
    warn,      // proportional split at the reduced size, note a warning
    upsample,  // proportional split, then resample each side up to target
};

struct SplitOptions {
    int per_class_train = 175;
    int per_class_test = 75;
    int chip_size = 9;
    UnderfullPolicy underfull = UnderfullPolicy::upsample;
};

struct LabeledSplit {
    ChipDataset train;
    ChipDataset test;
    std::vector<std::string> warnings;  // one entry per underfull class
};

// Stratified per-class split, deterministic under `seed`, train/test disjoint
// by pixel. Duplicate points at one pixel collapse when they agree and throw
// ConflictError when they do not; a class with zero points throws
// MissingClassError.
LabeledSplit build_labeled_set(const Raster& raster,
                               const std::vector<LabeledPoint>& points,
                               const ClassScheme& scheme,
                               const SplitOptions& options, uint64_t seed);

// Grows one class to target_count by sampling its existing chips with
// replacement (appended at the end); never fabricates values. No-op when the
// class already meets the target; MissingClassError when it is absent.
ChipDataset upsample_class(const ChipDataset& dataset, int class_id,
                           size_t target_count, uint64_t seed);

// Per-channel z-score fitted on `dataset` (population std; zero variance
// becomes 1). Returns the transformed copy plus the stats for reuse on other
// splits. Throws EmptyInputError.
std::pair<ChipDataset, NormalizationStats> normalize(const ChipDataset& dataset);

// Applies previously fitted stats without re-fitting.
ChipDataset apply_normalization(const ChipDataset& dataset,
                                const NormalizationStats& stats);

// Rule-of-thumb floor: 10 * n_inputs * n_classes.
int minimum_sample_size(int n_inputs, int n_classes);

// Cochran's sample size with finite-population correction, rounded up.
int cochran_sample_size(size_t population, double z = 1.959963984540054,
                        double margin = 0.05, double p = 0.5);

// The fixed ladder used by the sample-size sweep.
std::vector<int> sweep_sample_sizes();  // {490, 700, 1050, 1400, 1750}

// k stratified folds of sample indices: disjoint, exhaustive, per-class counts
// differing by at most 1 across folds (fold sizes likewise). Deterministic
// under seed. Throws InsufficientDataError when labels.size() < k.
std::vector<std::vector<size_t>> stratified_fold_indices(
    const std::vector<int>& labels, int k, uint64_t seed);

// Chip windows as flat rows (the MLP/forest/k-means input form).
std::vector<std::vector<double>> flatten_chips(const ChipDataset& dataset);

// Labels of every chip; throws MissingClassError if any chip is unlabeled.
std::vector<int> labels_of(const ChipDataset& dataset);

// Label files. CSV columns: lon, lat, class_name, year (any column order,
// header required). GeoJSON: FeatureCollection of Point features with
// class_name/year properties. Coordinates convert to pixels through the
// raster's GeoRef; off-grid points throw BoundsError.
std::vector<LabeledPoint> load_label_csv(const std::string& path,
                                         const ClassScheme& scheme,
                                         const Raster& raster);
std::vector<LabeledPoint> load_label_geojson(const std::string& path,
                                             const ClassScheme& scheme,
                                             const Raster& raster);

// Chip-set container (LKC1): shape header + f64 tensors + labels + stats.
void save_chipset(const std::string& path, const ChipDataset& dataset);
ChipDataset load_chipset(const std::string& path);

}  // namespace landkit
