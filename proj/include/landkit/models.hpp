#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "landkit/dataset.hpp"

namespace landkit {

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansParams {
    int k = 7;
    int max_iters = 300;
    double tol = 1e-6;  // stop when no centroid moves farther than this
};

struct KMeansModel {
    KMeansParams params;
    std::vector<std::vector<double>> centroids;  // k rows of d
    // Squared-error objective J after each assignment step; non-increasing.
    std::vector<double> objective_curve;
    // Optional cluster -> class relabeling fitted from labeled data (empty =
    // raw cluster ids). Lets the unsupervised model participate in accuracy
    // tables next to the classifiers.
    std::vector<int> cluster_to_class;
    uint64_t seed = 0;
};

// k-means++ seeding, then Lloyd iterations until assignments stabilize,
// movement < tol, or max_iters. Empty clusters re-seed to the point farthest
// from its centroid. Throws InsufficientDataError when n < k.
KMeansModel kmeans_fit(const std::vector<std::vector<double>>& vectors,
                       const KMeansParams& params, uint64_t seed);

// Nearest centroid by squared distance, ties to the lowest id. Raw cluster
// ids; apply the model's cluster_to_class separately when classes are wanted.
std::vector<int> kmeans_predict(const KMeansModel& model,
                                const std::vector<std::vector<double>>& vectors);

// Majority label per cluster (ties to the lowest class id; clusters with no
// members map to class 0).
std::vector<int> majority_cluster_mapping(const std::vector<int>& clusters,
                                          const std::vector<int>& labels,
                                          int k, int n_classes);

// ---------------------------------------------------------------------------
// random forest (CART trees, Gini impurity, bootstrap + majority vote)
// ---------------------------------------------------------------------------

struct ForestParams {
    int n_estimators = 100;
    int max_depth = -1;        // -1 = unlimited
    int max_features = 0;      // >0 explicit, 0 = floor(sqrt(d)) (min 1), -1 = all
    int min_samples_leaf = 1;
    int min_samples_split = 2;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    int label = 0;  // majority class (leaves)
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    int predict(const std::vector<double>& x) const;
};

struct ForestModel {
    ForestParams params;
    int n_features = 0;
    int n_classes = 0;
    std::vector<DecisionTree> trees;
    uint64_t seed = 0;
};

struct ForestPrediction {
    std::vector<int> labels;              // majority vote, ties to lowest id
    std::vector<std::vector<int>> votes;  // votes[i][t]: tree t's class for row i
};

// Grows n_estimators trees, each on an independent bootstrap, sampling
// max_features candidate features per split. Throws DegenerateLabelsError
// when the labels hold a single class.
ForestModel forest_fit(const std::vector<std::vector<double>>& vectors,
                       const std::vector<int>& labels,
                       const ForestParams& params, uint64_t seed);

ForestPrediction forest_predict(const ForestModel& model,
                                const std::vector<std::vector<double>>& vectors);

// Per-class vote shares (rows sum to 1), the forest's probability analogue.
std::vector<std::vector<double>> forest_vote_shares(
    const ForestModel& model, const std::vector<std::vector<double>>& vectors);

struct ForestGrid {
    std::vector<int> n_estimators{100, 200, 500};
    std::vector<int> max_depth{8, 16, -1};
    std::vector<int> max_features{0, -1};  // sqrt(d), all
    std::vector<int> min_samples_leaf{1, 3};
    std::vector<int> min_samples_split{2, 5};
};

struct ForestCvRow {
    ForestParams params;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

struct ForestGridResult {
    ForestParams best;
    double best_accuracy = 0.0;
    std::vector<ForestCvRow> table;  // one row per grid point, search order
};

// Exhaustive search over the grid by mean stratified-CV accuracy; ties keep
// the earlier (lexicographically first) parameter combination. Throws
// ConfigError on an empty grid axis.
ForestGridResult forest_grid_search(
    const std::vector<std::vector<double>>& vectors,
    const std::vector<int>& labels, const ForestGrid& grid, int folds,
    uint64_t seed);

// ---------------------------------------------------------------------------
// neural networks (MLP and 1x1-conv CNN with a checkable backward pass)
// ---------------------------------------------------------------------------

struct MlpModel {
    int input_dim = 810;  // chip_size^2 * channels
    int hidden = 32;
    int n_classes = 7;
    Eigen::MatrixXd w1;       // input_dim x hidden
    Eigen::RowVectorXd b1;    // hidden
    Eigen::MatrixXd w2;       // hidden x n_classes
    Eigen::RowVectorXd b2;    // n_classes

    size_t parameter_count() const;
};

struct CnnModel {
    int chip_size = 9;
    int channels = 10;
    int n_classes = 7;
    std::vector<int> conv_channels{32, 48, 64};  // 1x1 kernels per conv layer
    double dropout2 = 0.25;  // after conv-2
    double dropout3 = 0.5;   // after conv-3
    std::vector<Eigen::MatrixXd> conv_w;      // per layer: in x out
    std::vector<Eigen::RowVectorXd> conv_b;   // per layer: out
    Eigen::MatrixXd dense_w;                  // (chip_size^2 * last) x n_classes
    Eigen::RowVectorXd dense_b;               // n_classes

    size_t parameter_count() const;  // 41367 for the default shape
};

// Glorot-uniform initialized models, deterministic under seed.
MlpModel make_mlp(int input_dim, int hidden, int n_classes, uint64_t seed);
CnnModel make_cnn(int chip_size, int channels, std::vector<int> conv_channels,
                  int n_classes, uint64_t seed);

struct TrainConfig {
    double learning_rate = 1e-3;  // Adam
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int max_epochs = 150;
    int batch_size = 32;
    int patience = 15;          // early stopping on validation accuracy
    double val_fraction = 0.15; // train_model's internal validation carve
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// Epoch metrics, 1-based epoch numbering (index 0 = epoch 1).
struct LearningCurve {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
    int best_epoch = 0;  // epoch whose validation accuracy won
    int epochs_run = 0;  // best_epoch + patience when stopped early
};

// Mini-batch Adam on cross-entropy with early stopping; the returned model
// carries the parameters of the best validation epoch. Chips must already be
// normalized. Throws DivergenceError (with the epoch) if the loss goes NaN.
std::pair<MlpModel, LearningCurve> nn_fit(const MlpModel& init,
                                          const ChipDataset& train,
                                          const ChipDataset& val,
                                          const TrainConfig& config);
std::pair<CnnModel, LearningCurve> nn_fit(const CnnModel& init,
                                          const ChipDataset& train,
                                          const ChipDataset& val,
                                          const TrainConfig& config);

struct Prediction {
    std::vector<std::vector<double>> probabilities;  // simplex rows
    std::vector<int> labels;                         // argmax, ties to lowest
};

// Inference (dropout off). Throws ShapeError when chips do not match the
// model's input shape.
Prediction nn_predict(const MlpModel& model, const ChipDataset& chips);
Prediction nn_predict(const CnnModel& model, const ChipDataset& chips);

// Max relative error between analytic gradients and central finite
// differences across every parameter, |a-n| / max(1, |a|, |n|). Dropout off.
// Check at a differentiable point: a pre-activation sitting exactly on the
// ReLU kink (zero-initialized biases fed by dead units) makes the one-sided
// difference disagree with any subgradient choice, so perturb biases away
// from zero before checking a fresh model.
double gradient_check(const MlpModel& model, const ChipDataset& batch,
                      double epsilon = 1e-5);
double gradient_check(const CnnModel& model, const ChipDataset& batch,
                      double epsilon = 1e-5);

// ---------------------------------------------------------------------------
// model selection plumbing and the LKM1 container
// ---------------------------------------------------------------------------

enum class ModelKind { kmeans = 0, forest = 1, mlp = 2, cnn = 3 };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);  // ConfigError

struct ModelSpec {
    ModelKind kind = ModelKind::cnn;
    KMeansParams kmeans;
    ForestParams forest;
    int mlp_hidden = 32;
    std::vector<int> cnn_channels{32, 48, 64};
    TrainConfig train;  // nn kinds
};

// A fitted model plus the normalization fitted on its training data, so the
// file is self-contained for inference on raw chips.
struct TrainedModel {
    std::variant<KMeansModel, ForestModel, MlpModel, CnnModel> model;
    std::optional<NormalizationStats> normalization;

    ModelKind kind() const;
};

// Fits per spec on raw (unnormalized) labeled chips: normalizes internally,
// carves a stratified validation slice for the nn kinds, and relabels k-means
// clusters by majority class. `curve` (optional) receives the learning curve
// for the nn kinds and is reset to empty for the others.
TrainedModel train_model(const ModelSpec& spec, const ChipDataset& train_raw,
                         uint64_t seed, LearningCurve* curve = nullptr);

// Class ids / probability rows on raw chips (normalization applied from the
// model; k-means probabilities are one-hot over mapped classes).
std::vector<int> predict_labels(const TrainedModel& model,
                                const ChipDataset& raw);
std::vector<std::vector<double>> predict_probabilities(const TrainedModel& model,
                                                       const ChipDataset& raw);

// Typed access; throws FormatError naming the actual kind on mismatch.
const KMeansModel& as_kmeans(const TrainedModel& model);
const ForestModel& as_forest(const TrainedModel& model);
const MlpModel& as_mlp(const TrainedModel& model);
const CnnModel& as_cnn(const TrainedModel& model);

// LKM1 container: magic + version + kind tag + normalization + parameters.
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace landkit
