#pragma once

#include <string>
#include <vector>

#include "landkit/config.hpp"
#include "landkit/evaluate.hpp"

namespace landkit {

// The pipeline commands behind the CLI subcommands. Each validates its slice
// of the config first (fail-fast), writes artifacts only under
// config.output_dir, logs structured stage lines to stderr, and returns the
// paths it wrote so callers (tests, bindings) can skip directory scans.
// Given the same config and seed, every command reproduces its artifacts
// byte for byte.

struct CompositeOutput {
    std::vector<int> years;
    std::vector<std::string> paths;
    std::vector<double> valid_fraction;  // per composite, of all pixels
};

// QA-mask every scene, median-composite each year, write one GeoTIFF per
// year as composite_<year>.tif with canonical band names.
CompositeOutput cmd_composite(const PipelineConfig& config);

struct TrainOutput {
    std::vector<std::string> model_names;   // kinds trained, e.g. {"cnn"}
    std::vector<std::string> model_paths;   // one .lkm1 per kind
    std::vector<MetricReport> test_reports; // held-out metrics per kind
    std::vector<std::string> artifacts;     // every file written
    std::vector<std::string> warnings;      // underfull classes etc.
};

// Builds the labeled chip set from the training-year composite, runs k-fold
// CV, fits the final model(s) on the full training split, and reports test
// metrics. kind "all" trains mlp+forest+cnn and adds a comparison table;
// kmeans skips the supervised reports and renders a cluster map instead.
// `kind_override` ("" = config.model.kind) mirrors the --model flag.
TrainOutput cmd_train(const PipelineConfig& config,
                      const std::string& kind_override = "");

struct ClassifyOutput {
    std::vector<int> years;
    std::vector<std::string> tif_paths;
    std::vector<std::string> png_paths;
};

// Classifies every selected composite with a saved model into
// class_map_<year>.tif/.png.
ClassifyOutput cmd_classify(const PipelineConfig& config,
                            const std::string& model_path);

struct ChangeOutput {
    std::string expansion_tif;
    std::string expansion_png;
    std::string proportions_csv;
    std::vector<std::string> transition_csvs;  // consecutive year pairs
    size_t flicker_count = 0;
};

ChangeOutput cmd_change(const PipelineConfig& config);

struct SweepOutput {
    std::string csv_path;
    SweepResult sweep;
};

// Sample-size ladder experiment on the training composite; one land-cover
// map per size plus the summary table.
SweepOutput cmd_sweep(const PipelineConfig& config);

struct SynthOutput {
    std::vector<std::string> scene_paths;     // per year x scene, with QA band
    std::vector<std::string> feature_paths;   // clean per-year feature rasters
    std::vector<std::string> truth_map_tifs;  // per-year class-id rasters
    std::string expansion_truth_tif;
    std::string labels_csv;
    std::string config_path;  // ready-to-run pipeline config for the fixtures
};

// Deterministic synthetic test estate: per-year scene stacks with planted
// class signatures, noise and QA-flagged cloud blobs; the clean feature
// rasters; exact ground-truth class maps and urban-expansion grid; a label
// CSV (one deliberately rare class); and a pipeline config wired to it all.
SynthOutput cmd_synth(const PipelineConfig& config);

}  // namespace landkit
