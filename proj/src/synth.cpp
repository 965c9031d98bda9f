#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "landkit/change.hpp"
#include "landkit/config.hpp"
#include "landkit/errors.hpp"
#include "landkit/geotiff.hpp"
#include "landkit/indices.hpp"
#include "landkit/pipeline.hpp"
#include "landkit/rng.hpp"
#include "csv_util.hpp"
#include "stage_log.hpp"

namespace landkit {

namespace {

namespace fs = std::filesystem;
using stagelog::Stage;

const char* const kBandNames[7] = {"coastal", "blue",  "green", "red",
                                   "nir",     "swir1", "swir2"};

// Per-class reflectance signatures over the seven canonical bands, separated
// well beyond the default noise so the fixture classes are actually learnable.
// Roughly plausible spectra: vegetation peaks in nir, water falls off toward
// swir, built-up and bare ground lift the swir bands.
constexpr double kSignatures[7][7] = {
    {0.18, 0.20, 0.22, 0.24, 0.26, 0.30, 0.28},  // urban
    {0.06, 0.08, 0.12, 0.10, 0.35, 0.22, 0.14},  // grass / agriculture
    {0.04, 0.05, 0.07, 0.05, 0.42, 0.15, 0.08},  // forest
    {0.12, 0.16, 0.22, 0.28, 0.34, 0.44, 0.40},  // bare soil
    {0.10, 0.09, 0.07, 0.05, 0.03, 0.02, 0.01},  // water
    {0.14, 0.13, 0.12, 0.09, 0.06, 0.04, 0.03},  // coastal shallows
    {0.07, 0.08, 0.10, 0.09, 0.20, 0.10, 0.06},  // wetland
};

constexpr double kCloudLevel = 0.85;
constexpr double kShadowLevel = 0.02;
// QA codes: bit 6 = clear, bits 1+3 = (dilated) cloud, bit 4 = cloud shadow.
constexpr double kQaClear = 64.0;
constexpr double kQaCloud = 10.0;
constexpr double kQaShadow = 16.0;

enum CloudKind : uint8_t { kClear = 0, kCloud = 1, kShadow = 2 };

// Static background layout: a west waterfront, a coastal strip, and forest /
// bare-soil / wetland blocks in a grass matrix. Proportional to the grid so
// non-default sizes keep every class present.
int base_class(int col, int row, int w, int h) {
    const double x = (col + 0.5) / w;
    const double y = (row + 0.5) / h;
    if (x < 0.16) return 4;                            // water
    if (x < 0.24) return 5;                            // coastal
    if (y < 0.40 && x >= 0.60) return 2;               // forest
    if (y >= 0.55 && y < 0.80 && x >= 0.70) return 3;  // bare soil
    if (y >= 0.80 && x < 0.60) return 6;               // wetland
    return 1;                                          // grass
}

// The urban patch grows concentrically into the grass; year t's radius is
// radius + t*growth. Only grass converts, so water/forest stay put and the
// ground-truth expansion map is exactly this predicate's first-true year.
int class_of(int col, int row, int w, int h, double urban_radius) {
    const int base = base_class(col, row, w, h);
    if (base != 1) return base;
    const double cx = 0.42 * w;
    const double cy = 0.30 * h;
    const double dx = col + 0.5 - cx;
    const double dy = row + 0.5 - cy;
    return dx * dx + dy * dy <= urban_radius * urban_radius ? 0 : base;
}

GeoRef synth_geo() {
    GeoRef geo;
    geo.origin_lon = 30.0;
    geo.origin_lat = -5.0;
    geo.pixel_dlon = 0.00027;
    geo.pixel_dlat = -0.00027;
    return geo;
}

// Cloud/shadow disks for one scene. Disk count targets `fraction` of the
// grid; radii span 3..max(4, min(w,h)/8).
std::vector<CloudKind> cloud_grid(int w, int h, double fraction, Rng& rng) {
    std::vector<CloudKind> grid(static_cast<size_t>(w) * h, kClear);
    if (fraction <= 0.0) return grid;
    const double r_lo = 3.0;
    const double r_hi = std::max(4.0, std::min(w, h) / 8.0);
    const double mean_area =
        M_PI * (r_lo * r_lo + r_hi * r_hi + r_lo * r_hi) / 3.0;
    const int disks = static_cast<int>(
        std::lround(fraction * w * h / mean_area));
    for (int d = 0; d < disks; ++d) {
        const double cx = rng.next_uniform(0.0, w);
        const double cy = rng.next_uniform(0.0, h);
        const double r = rng.next_uniform(r_lo, r_hi);
        const CloudKind kind = rng.next_double() < 0.3 ? kShadow : kCloud;
        const int col_lo = std::max(0, static_cast<int>(cx - r) - 1);
        const int col_hi = std::min(w - 1, static_cast<int>(cx + r) + 1);
        const int row_lo = std::max(0, static_cast<int>(cy - r) - 1);
        const int row_hi = std::min(h - 1, static_cast<int>(cy + r) + 1);
        for (int row = row_lo; row <= row_hi; ++row)
            for (int col = col_lo; col <= col_hi; ++col) {
                const double dx = col + 0.5 - cx;
                const double dy = row + 0.5 - cy;
                if (dx * dx + dy * dy <= r * r)
                    grid[static_cast<size_t>(row) * w + col] = kind;
            }
    }
    return grid;
}

double clamp_reflectance(double v) {
    return std::min(0.999, std::max(0.001, v));
}

Raster make_scene(const SynthParams& p, double urban_radius,
                  const std::vector<CloudKind>& clouds, Rng& rng) {
    const size_t n = static_cast<size_t>(p.width) * p.height;
    std::vector<Band> bands(8);
    for (int b = 0; b < 7; ++b) {
        bands[static_cast<size_t>(b)].name = kBandNames[b];
        bands[static_cast<size_t>(b)].values.resize(n);
    }
    bands[7].name = "qa";
    bands[7].values.resize(n);

    size_t at = 0;
    for (int row = 0; row < p.height; ++row) {
        for (int col = 0; col < p.width; ++col, ++at) {
            const int cls = class_of(col, row, p.width, p.height, urban_radius);
            const CloudKind sky = clouds[at];
            for (int b = 0; b < 7; ++b) {
                double v = sky == kCloud    ? kCloudLevel
                           : sky == kShadow ? kShadowLevel
                                            : kSignatures[cls][b];
                v += p.noise_sigma * rng.next_normal();
                bands[static_cast<size_t>(b)].values[at] = clamp_reflectance(v);
            }
            bands[7].values[at] = sky == kCloud    ? kQaCloud
                                  : sky == kShadow ? kQaShadow
                                                   : kQaClear;
        }
    }
    return Raster(p.width, p.height, std::move(bands),
                  std::vector<uint8_t>(n, 1), synth_geo());
}

// Clean per-year raster: exact signatures, no clouds, no noise; with the
// configured index bands appended this is the ground-truth feature stack.
Raster make_clean_features(const SynthParams& p, double urban_radius,
                           const std::vector<std::string>& indices) {
    const size_t n = static_cast<size_t>(p.width) * p.height;
    std::vector<Band> bands(7);
    for (int b = 0; b < 7; ++b) {
        bands[static_cast<size_t>(b)].name = kBandNames[b];
        bands[static_cast<size_t>(b)].values.resize(n);
    }
    size_t at = 0;
    for (int row = 0; row < p.height; ++row)
        for (int col = 0; col < p.width; ++col, ++at) {
            const int cls = class_of(col, row, p.width, p.height, urban_radius);
            for (int b = 0; b < 7; ++b)
                bands[static_cast<size_t>(b)].values[at] = kSignatures[cls][b];
        }
    Raster clean(p.width, p.height, std::move(bands),
                 std::vector<uint8_t>(n, 1), synth_geo());
    std::vector<IndexRecipe> recipes;
    for (const auto& name : indices) recipes.push_back(recipe_for(name));
    return append_feature_bands(clean, recipes);
}

ClassMap truth_map(const SynthParams& p, const ClassScheme& scheme, int year,
                   double urban_radius) {
    ClassMap map;
    map.year = year;
    map.width = p.width;
    map.height = p.height;
    map.scheme = scheme;
    map.geo = synth_geo();
    map.provenance = "synthetic layout";
    const size_t n = static_cast<size_t>(p.width) * p.height;
    map.classes.resize(n);
    map.mask.assign(n, 1);
    size_t at = 0;
    for (int row = 0; row < p.height; ++row)
        for (int col = 0; col < p.width; ++col, ++at)
            map.classes[at] = class_of(col, row, p.width, p.height, urban_radius);
    return map;
}

std::string generated_config_text(const PipelineConfig& config) {
    const SynthParams& p = config.synth;
    std::ostringstream os;
    os << "// Generated by `landkit synth` alongside the fixtures it points at.\n";
    os << "// Run composite -> train -> classify -> change against it, in that\n";
    os << "// order; artifacts land in run/ next to this file.\n";
    os << "{\n";
    os << "  \"version\": 1,\n";
    os << "  \"seed\": " << config.seed << ",\n";
    os << "  \"output_dir\": \"run\",\n";
    os << "  \"qa\": { \"band\": \"qa\", \"bits\": [1, 3, 4] },\n";
    os << "  \"scenes\": [\n";
    for (int y = 0; y < p.years; ++y) {
        const int year = p.first_year + y;
        os << "    { \"year\": " << year << ", \"paths\": [";
        for (int s = 0; s < p.scenes_per_year; ++s) {
            if (s) os << ", ";
            os << "\"scenes/scene_" << year << "_" << s << ".tif\"";
        }
        os << "] }" << (y + 1 < p.years ? "," : "") << "\n";
    }
    os << "  ],\n";
    os << "  \"composites\": [\n";
    for (int y = 0; y < p.years; ++y) {
        const int year = p.first_year + y;
        os << "    { \"year\": " << year << ", \"path\": \"run/composite_"
           << year << ".tif\" }" << (y + 1 < p.years ? "," : "") << "\n";
    }
    os << "  ],\n";
    os << "  \"labels\": { \"path\": \"labels.csv\" },\n";
    os << "  \"model\": { \"kind\": \"cnn\" },\n";
    os << "  \"change\": { \"urban_class\": 0 }\n";
    os << "}\n";
    return os.str();
}

}  // namespace

SynthOutput cmd_synth(const PipelineConfig& config) {
    validate_for(config, Command::synth);
    const SynthParams& p = config.synth;
    fs::create_directories(config.output_dir + "/scenes");
    fs::create_directories(config.output_dir + "/truth");

    SynthOutput out;
    const size_t n = static_cast<size_t>(p.width) * p.height;

    std::vector<int> years;
    for (int y = 0; y < p.years; ++y) years.push_back(p.first_year + y);
    const auto radius_at = [&](int y) {
        return p.urban_radius + y * p.urban_growth;
    };

    for (int y = 0; y < p.years; ++y) {
        Stage stage("synth");
        stage.note("year", years[y]);
        const uint64_t year_seed =
            derive_seed(config.seed, "synth-year", static_cast<uint64_t>(y));

        // Cloud layouts first: the last scene keeps only the clouds that do
        // not black out a pixel across the whole year, so every pixel stays
        // observable and the yearly composite has no holes.
        std::vector<std::vector<CloudKind>> clouds;
        for (int s = 0; s < p.scenes_per_year; ++s) {
            Rng rng(derive_seed(year_seed, "clouds", static_cast<uint64_t>(s)));
            clouds.push_back(cloud_grid(p.width, p.height, p.cloud_fraction, rng));
        }
        if (p.scenes_per_year > 1) {
            auto& last = clouds.back();
            for (size_t i = 0; i < n; ++i) {
                bool any_clear = false;
                for (int s = 0; s + 1 < p.scenes_per_year; ++s)
                    any_clear = any_clear || clouds[static_cast<size_t>(s)][i] ==
                                                 kClear;
                if (!any_clear) last[i] = kClear;
            }
        } else {
            clouds.back().assign(n, kClear);
        }

        size_t cloudy = 0;
        for (const auto& grid : clouds)
            for (const CloudKind kind : grid) cloudy += kind != kClear;
        stage.note("cloud_px", cloudy);

        for (int s = 0; s < p.scenes_per_year; ++s) {
            Rng rng(derive_seed(year_seed, "scene", static_cast<uint64_t>(s)));
            const Raster scene =
                make_scene(p, radius_at(y), clouds[static_cast<size_t>(s)], rng);
            const std::string path = config.output_dir + "/scenes/scene_" +
                                     std::to_string(years[y]) + "_" +
                                     std::to_string(s) + ".tif";
            write_geotiff(scene, path);
            out.scene_paths.push_back(path);
        }

        const std::string features_path = config.output_dir +
                                          "/truth/features_" +
                                          std::to_string(years[y]) + ".tif";
        write_geotiff(make_clean_features(p, radius_at(y), config.indices),
                      features_path);
        out.feature_paths.push_back(features_path);

        const std::string map_path = config.output_dir + "/truth/truth_map_" +
                                     std::to_string(years[y]) + ".tif";
        write_geotiff(to_raster(truth_map(p, config.scheme, years[y],
                                          radius_at(y))),
                      map_path);
        out.truth_map_tifs.push_back(map_path);
    }

    {  // exact expansion ground truth straight from the growth predicate
        ExpansionGrid grid;
        grid.width = p.width;
        grid.height = p.height;
        grid.years = years;
        grid.geo = synth_geo();
        grid.mask.assign(n, 1);
        grid.first_urban_year.assign(n, ExpansionGrid::kNever);
        size_t at = 0;
        for (int row = 0; row < p.height; ++row)
            for (int col = 0; col < p.width; ++col, ++at)
                for (int y = 0; y < p.years; ++y)
                    if (class_of(col, row, p.width, p.height, radius_at(y)) ==
                        0) {
                        grid.first_urban_year[at] = years[y];
                        break;
                    }
        out.expansion_truth_tif = config.output_dir + "/truth/expansion.tif";
        write_geotiff(to_raster(grid), out.expansion_truth_tif);
    }

    {  // labels from the final-year truth, one deliberately rare class
        Stage stage("synth-labels");
        const int final_year = years.back();
        const double final_radius = radius_at(p.years - 1);
        const int rare_id = config.scheme.id_of(p.rare_class);
        const GeoRef geo = synth_geo();

        out.labels_csv = config.output_dir + "/labels.csv";
        auto os = csvu::open(out.labels_csv);
        os << "lon,lat,class_name,year\n";
        size_t total = 0;
        for (const auto& cls : config.scheme.classes) {
            std::vector<std::pair<int, int>> pixels;
            for (int row = 0; row < p.height; ++row)
                for (int col = 0; col < p.width; ++col)
                    if (class_of(col, row, p.width, p.height, final_radius) ==
                        cls.id)
                        pixels.emplace_back(col, row);
            Rng rng(derive_seed(config.seed, "synth-labels",
                                static_cast<uint64_t>(cls.id)));
            rng.shuffle(pixels);
            const size_t want = cls.id == rare_id
                                    ? static_cast<size_t>(p.rare_count)
                                    : static_cast<size_t>(p.labels_per_class);
            if (pixels.size() < want)
                std::fprintf(stderr,
                             "landkit: warning stage=synth class '%s' has only "
                             "%zu pixels for %zu labels\n",
                             cls.name.c_str(), pixels.size(), want);
            const size_t take = std::min(want, pixels.size());
            for (size_t i = 0; i < take; ++i) {
                const auto [lon, lat] =
                    geo.pixel_center(pixels[i].first, pixels[i].second);
                os << csvu::number(lon) << "," << csvu::number(lat) << ","
                   << csvu::field(cls.name) << "," << final_year << "\n";
            }
            total += take;
        }
        csvu::finish(os, out.labels_csv);
        stage.note("labels", total);
    }

    out.config_path = config.output_dir + "/pipeline.jsonc";
    {
        auto os = csvu::open(out.config_path);
        os << generated_config_text(config);
        csvu::finish(os, out.config_path);
    }
    return out;
}

}  // namespace landkit
