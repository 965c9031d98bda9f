#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "landkit/change.hpp"
#include "landkit/dataset.hpp"
#include "landkit/models.hpp"
#include "landkit/raster.hpp"

namespace landkit {

// Rows are true classes, columns predictions.
struct ConfusionMatrix {
    std::vector<std::vector<size_t>> counts;

    size_t n_classes() const { return counts.size(); }
    size_t total() const;
    size_t diagonal() const;
};

// Throws ShapeError on length mismatch, ConfigError on out-of-range labels.
ConfusionMatrix confusion(const std::vector<int>& truth,
                          const std::vector<int>& predicted, int n_classes);

// One-vs-rest scores for a single class. `degenerate` marks any metric whose
// denominator was zero (reported as 0 by convention).
struct ClassMetrics {
    double accuracy = 0.0;   // (TP+TN) / (TP+TN+FP+FN)
    double precision = 0.0;  // TP / (TP+FP)
    double recall = 0.0;     // TP / (TP+FN)
    double f1 = 0.0;         // 2*TP / (2*TP+FP+FN)
    bool degenerate = false;
};

struct MetricReport {
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;         // unweighted means across classes
    double overall_accuracy = 0.0;  // diagonal / total, the headline number
};

// Throws EmptyInputError when the matrix has no classes or no samples.
MetricReport metrics(const ConfusionMatrix& cm);

// One-vs-rest areas under the ROC curve from per-class scores, tie-handled by
// midranks. Classes absent from the truth (or spanning every sample) have no
// pairs to rank: their entry is NaN with defined=0 and they stay out of the
// macro average.
struct AucReport {
    std::vector<double> per_class;
    std::vector<uint8_t> defined;
    double macro = 0.0;
};

AucReport roc_auc(const std::vector<int>& truth,
                  const std::vector<std::vector<double>>& probabilities,
                  int n_classes);

double mean_of(const std::vector<double>& values);
double population_std(const std::vector<double>& values);

// Stratified k-fold cross-validation; the model trained on the best-scoring
// fold (ties to the earliest) is kept as the selected model.
struct CvResult {
    std::vector<double> fold_accuracy;  // size k
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // population std over the folds
    size_t best_fold = 0;
    TrainedModel best_model;
};

// Throws InsufficientDataError when the dataset is smaller than k,
// MissingClassError when chips are unlabeled.
CvResult kfold_cv(const ChipDataset& dataset, const ModelSpec& spec, int k,
                  uint64_t seed);

// One sweep row: metrics on the held-out split at this sample budget, plus the
// rendered land-cover map trained at it.
struct SweepRow {
    int sample_size = 0;
    double accuracy = 0.0;  // overall
    double precision = 0.0; // macro
    double recall = 0.0;    // macro
    double f1 = 0.0;        // macro
    std::string map_path;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> warnings;  // underfull classes, per size
};

struct SweepOptions {
    std::vector<int> sizes;  // defaults to sweep_sample_sizes() when empty
    int chip_size = 9;
    int year = 0;            // stamped on the rendered maps
    size_t batch_size = 4096;
    UnderfullPolicy underfull = UnderfullPolicy::upsample;
};

// For each size: an even per-class budget (size/C, 70/30 train/test), a fresh
// model, held-out metrics, and a rendered map under artifact_dir. Sizes must
// divide evenly by the class count. Throws InsufficientDataError under
// UnderfullPolicy::error when points run short.
SweepResult sample_size_sweep(const Raster& raster,
                              const std::vector<LabeledPoint>& points,
                              const ClassScheme& scheme, const ModelSpec& spec,
                              const SweepOptions& options,
                              const std::string& artifact_dir, uint64_t seed);

// Report files. CSVs carry fixed 4-decimal scores; PNGs are deterministic.
void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm,
                         const ClassScheme& scheme);
void render_confusion_png(const std::string& path, const ConfusionMatrix& cm);

void write_curve_csv(const std::string& path, const LearningCurve& curve);
void render_curve_png(const std::string& path, const LearningCurve& curve);

// Fold-by-model accuracy table with Mean and Std footer rows.
void write_cv_table_csv(const std::string& path,
                        const std::vector<std::string>& model_names,
                        const std::vector<CvResult>& results);

// One row per model: overall accuracy + macro precision/recall/f1.
void write_comparison_csv(const std::string& path,
                          const std::vector<std::string>& model_names,
                          const std::vector<MetricReport>& reports);

void write_sweep_csv(const std::string& path, const SweepResult& sweep);

}  // namespace landkit
