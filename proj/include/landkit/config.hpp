#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "landkit/dataset.hpp"
#include "landkit/models.hpp"
#include "landkit/preprocess.hpp"

namespace landkit {

// Scenes of one calendar year, composited together.
struct SceneGroup {
    int year = 0;
    std::vector<std::string> paths;
};

struct CompositeRef {
    int year = 0;
    std::string path;
};

struct LabelSource {
    std::string path;
    std::string format;  // "csv" | "geojson" | "" = by extension
};

struct SynthParams {
    int width = 64;
    int height = 64;
    int years = 3;
    int first_year = 2014;
    int scenes_per_year = 4;
    int labels_per_class = 250;
    std::string rare_class = "Coastal Areas";
    int rare_count = 91;
    double cloud_fraction = 0.12;
    double noise_sigma = 0.010;
    double urban_radius = 7.0;  // first-year radius of the planted urban patch
    double urban_growth = 2.0;  // radius increase per year
};

// Everything a pipeline run needs, parsed from one commented JSON file.
// Relative paths (inputs and output_dir alike) resolve against the config
// file's directory, so a config travels with its data.
struct PipelineConfig {
    std::string path;  // the file this was loaded from, used in error messages
    int version = 1;
    uint64_t seed = 0;
    std::string output_dir;

    ClassScheme scheme;               // defaults to ClassScheme::lulc7()
    std::vector<std::pair<std::string, std::string>> band_map;  // canonical -> source
    std::vector<std::string> indices;  // recipe names; default ndvi,mndwi,ndbi

    std::string qa_band;  // name of the QA band after renaming; "" = not set
    QaBitSpec qa_bits;

    std::vector<SceneGroup> scenes;        // composite inputs
    std::vector<CompositeRef> composites;  // train/classify inputs
    LabelSource labels;
    std::optional<int> train_year;  // default: newest composite

    ModelSpec model;
    bool train_all = false;  // model.kind was "all": mlp + forest + cnn
    int per_class_train = 175;
    int per_class_test = 75;
    int chip_size = 9;
    UnderfullPolicy underfull = UnderfullPolicy::upsample;
    int cv_folds = 10;

    std::vector<int> classify_years;        // empty = every composite
    int urban_class = 0;                    // change detection target class
    std::vector<CompositeRef> change_maps;  // empty = class_map_<year>.tif
    std::vector<int> sweep_sizes;           // empty = the standard ladder
    ModelKind sweep_model = ModelKind::cnn;
    SynthParams synth;

    int threads = 1;  // worker cap; overridable via --threads
};

// Parses a commented-JSON config file. Structural problems (unreadable file,
// bad JSON, wrong types, unknown keys, missing seed) throw ConfigError with
// the file path and the offending field spelled out.
PipelineConfig load_pipeline_config(const std::string& path);

// Same parser over an in-memory document; `name` stands in for the path in
// error messages and relative paths resolve against `base_dir`.
PipelineConfig parse_pipeline_config(const std::string& text,
                                     const std::string& name,
                                     const std::string& base_dir);

enum class Command { composite, train, classify, change, sweep, synth };

// Command-scoped fail-fast validation: required fields present and every
// referenced input file exists, before any computation starts. Throws
// ConfigError naming the config path and field.
void validate_for(const PipelineConfig& config, Command command);

// Effective class-map list for cmd_change: explicit change_maps, else
// class_map_<year>.tif under output_dir for every classify year.
std::vector<CompositeRef> effective_change_maps(const PipelineConfig& config);

}  // namespace landkit
