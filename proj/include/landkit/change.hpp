#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "landkit/dataset.hpp"
#include "landkit/models.hpp"
#include "landkit/raster.hpp"

namespace landkit {

// A classified scene: one class id per pixel, or masked where the input had
// no usable data.
struct ClassMap {
    int year = 0;
    int width = 0;
    int height = 0;
    std::vector<int32_t> classes;  // class id per pixel; undefined when masked
    std::vector<uint8_t> mask;     // 1 = classified, 0 = masked
    ClassScheme scheme;
    GeoRef geo;
    std::string provenance;  // model kind + input shape, for report headers

    size_t pixel_count() const { return classes.size(); }
    bool valid_at(int col, int row) const {
        return mask[static_cast<size_t>(row) * width + col] != 0;
    }
    int32_t class_at(int col, int row) const {
        return classes[static_cast<size_t>(row) * width + col];
    }

    // Every unmasked value must be a valid scheme id. Throws ConfigError.
    void validate() const;
};

// Classifies every valid pixel of the feature raster by running chips through
// the model in batches; masked pixels stay masked. The scheme provides class
// names and render colors for downstream products.
ClassMap classify_map(const Raster& raster, const TrainedModel& model,
                      const ClassScheme& scheme, int year, int chip_size = 9,
                      size_t batch_size = 4096);

// First-urban-year grid: for pixels urban in the FINAL year, the earliest
// year already classified urban; everything else is kNever (rendered white).
// Pixels that left and re-entered the urban class keep their first year and
// are tallied in flicker_count as a quality diagnostic.
struct ExpansionGrid {
    static constexpr int32_t kNever = -1;

    int width = 0;
    int height = 0;
    std::vector<int32_t> first_urban_year;  // kNever or a year from `years`
    std::vector<uint8_t> mask;              // final-year validity
    std::vector<int> years;                 // the input years, ascending
    size_t flicker_count = 0;
    GeoRef geo;
};

ExpansionGrid urban_expansion(const std::vector<ClassMap>& maps,
                              int urban_class_id);

// Per-year class shares over unmasked pixels (each row sums to 1 when the
// year has any valid pixel).
struct ProportionTable {
    std::vector<int> years;
    std::vector<std::vector<double>> shares;  // [year index][class id]
};

ProportionTable class_proportions(const std::vector<ClassMap>& maps);

// counts[i][j] = pixels classified i in `a` and j in `b`, over pixels valid
// in both maps.
std::vector<std::vector<size_t>> transition_matrix(const ClassMap& a,
                                                   const ClassMap& b);

// Indexed-color PNG (palette = class colors + one mask entry) plus a
// "<path>.legend.csv" sidecar naming every palette index. Output bytes are
// deterministic for identical inputs.
void render_map(const ClassMap& map, const std::string& png_path);

// Expansion rendering: one color per year (dark-to-light ramp), white for
// never-urban, gray for masked.
void render_expansion(const ExpansionGrid& grid, const std::string& png_path);

// GeoTIFF-able forms. Class ids / years ride in a single band; masked pixels
// are NaN. `kNever` survives as the value -1.
Raster to_raster(const ClassMap& map);
Raster to_raster(const ExpansionGrid& grid);
ClassMap classmap_from_raster(const Raster& raster, const ClassScheme& scheme,
                              int year);

void write_proportions_csv(const std::string& path, const ProportionTable& table,
                           const ClassScheme& scheme);
void write_transitions_csv(const std::string& path,
                           const std::vector<std::vector<size_t>>& counts,
                           const ClassScheme& scheme);

}  // namespace landkit
