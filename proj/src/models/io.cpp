#include <algorithm>
#include <cmath>
#include <fstream>

#include "landkit/errors.hpp"
#include "landkit/models.hpp"
#include "landkit/rng.hpp"
#include "../wire.hpp"

namespace landkit {

namespace {

constexpr char kMagic[4] = {'L', 'K', 'M', '1'};
constexpr uint16_t kVersion = 1;
constexpr const char* kWhat = "model file";

void put_i32(std::ostream& os, int v) {
    wire::put_u32(os, static_cast<uint32_t>(v));
}

int get_i32(std::istream& is) {
    return static_cast<int>(wire::get_u32(is, kWhat));
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    wire::put_u32(os, static_cast<uint32_t>(m.rows()));
    wire::put_u32(os, static_cast<uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) wire::put_f64(os, m(r, c));
}

Eigen::MatrixXd get_matrix(std::istream& is) {
    const auto rows = wire::get_u32(is, kWhat);
    const auto cols = wire::get_u32(is, kWhat);
    Eigen::MatrixXd m(rows, cols);
    for (uint32_t r = 0; r < rows; ++r)
        for (uint32_t c = 0; c < cols; ++c) m(r, c) = wire::get_f64(is, kWhat);
    return m;
}

void put_row(std::ostream& os, const Eigen::RowVectorXd& v) {
    wire::put_u32(os, static_cast<uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) wire::put_f64(os, v[i]);
}

Eigen::RowVectorXd get_row(std::istream& is) {
    const auto n = wire::get_u32(is, kWhat);
    Eigen::RowVectorXd v(n);
    for (uint32_t i = 0; i < n; ++i) v[i] = wire::get_f64(is, kWhat);
    return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    wire::put_u32(os, static_cast<uint32_t>(v.size()));
    for (double x : v) wire::put_f64(os, x);
}

std::vector<double> get_doubles(std::istream& is) {
    const auto n = wire::get_u32(is, kWhat);
    std::vector<double> v(n);
    for (auto& x : v) x = wire::get_f64(is, kWhat);
    return v;
}

void put_ints(std::ostream& os, const std::vector<int>& v) {
    wire::put_u32(os, static_cast<uint32_t>(v.size()));
    for (int x : v) put_i32(os, x);
}

std::vector<int> get_ints(std::istream& is) {
    const auto n = wire::get_u32(is, kWhat);
    std::vector<int> v(n);
    for (auto& x : v) x = get_i32(is);
    return v;
}

void write_kmeans(std::ostream& os, const KMeansModel& m) {
    put_i32(os, m.params.k);
    put_i32(os, m.params.max_iters);
    wire::put_f64(os, m.params.tol);
    wire::put_u64(os, m.seed);
    wire::put_u32(os, static_cast<uint32_t>(m.centroids.size()));
    wire::put_u32(os, m.centroids.empty()
                          ? 0
                          : static_cast<uint32_t>(m.centroids.front().size()));
    for (const auto& c : m.centroids)
        for (double x : c) wire::put_f64(os, x);
    put_ints(os, m.cluster_to_class);
    put_doubles(os, m.objective_curve);
}

KMeansModel read_kmeans(std::istream& is) {
    KMeansModel m;
    m.params.k = get_i32(is);
    m.params.max_iters = get_i32(is);
    m.params.tol = wire::get_f64(is, kWhat);
    m.seed = wire::get_u64(is, kWhat);
    const auto k = wire::get_u32(is, kWhat);
    const auto d = wire::get_u32(is, kWhat);
    m.centroids.assign(k, std::vector<double>(d));
    for (auto& c : m.centroids)
        for (auto& x : c) x = wire::get_f64(is, kWhat);
    m.cluster_to_class = get_ints(is);
    m.objective_curve = get_doubles(is);
    return m;
}

void write_forest(std::ostream& os, const ForestModel& m) {
    put_i32(os, m.params.n_estimators);
    put_i32(os, m.params.max_depth);
    put_i32(os, m.params.max_features);
    put_i32(os, m.params.min_samples_leaf);
    put_i32(os, m.params.min_samples_split);
    put_i32(os, m.n_features);
    put_i32(os, m.n_classes);
    wire::put_u64(os, m.seed);
    wire::put_u32(os, static_cast<uint32_t>(m.trees.size()));
    for (const auto& tree : m.trees) {
        wire::put_u32(os, static_cast<uint32_t>(tree.nodes.size()));
        for (const auto& n : tree.nodes) {
            put_i32(os, n.feature);
            wire::put_f64(os, n.threshold);
            put_i32(os, n.left);
            put_i32(os, n.right);
            put_i32(os, n.label);
        }
    }
}

ForestModel read_forest(std::istream& is) {
    ForestModel m;
    m.params.n_estimators = get_i32(is);
    m.params.max_depth = get_i32(is);
    m.params.max_features = get_i32(is);
    m.params.min_samples_leaf = get_i32(is);
    m.params.min_samples_split = get_i32(is);
    m.n_features = get_i32(is);
    m.n_classes = get_i32(is);
    m.seed = wire::get_u64(is, kWhat);
    const auto n_trees = wire::get_u32(is, kWhat);
    m.trees.resize(n_trees);
    for (auto& tree : m.trees) {
        const auto n_nodes = wire::get_u32(is, kWhat);
        tree.nodes.resize(n_nodes);
        for (auto& n : tree.nodes) {
            n.feature = get_i32(is);
            n.threshold = wire::get_f64(is, kWhat);
            n.left = get_i32(is);
            n.right = get_i32(is);
            n.label = get_i32(is);
        }
    }
    return m;
}

void write_mlp(std::ostream& os, const MlpModel& m) {
    put_i32(os, m.input_dim);
    put_i32(os, m.hidden);
    put_i32(os, m.n_classes);
    put_matrix(os, m.w1);
    put_row(os, m.b1);
    put_matrix(os, m.w2);
    put_row(os, m.b2);
}

MlpModel read_mlp(std::istream& is) {
    MlpModel m;
    m.input_dim = get_i32(is);
    m.hidden = get_i32(is);
    m.n_classes = get_i32(is);
    m.w1 = get_matrix(is);
    m.b1 = get_row(is);
    m.w2 = get_matrix(is);
    m.b2 = get_row(is);
    return m;
}

void write_cnn(std::ostream& os, const CnnModel& m) {
    put_i32(os, m.chip_size);
    put_i32(os, m.channels);
    put_i32(os, m.n_classes);
    put_ints(os, m.conv_channels);
    wire::put_f64(os, m.dropout2);
    wire::put_f64(os, m.dropout3);
    wire::put_u32(os, static_cast<uint32_t>(m.conv_w.size()));
    for (size_t l = 0; l < m.conv_w.size(); ++l) {
        put_matrix(os, m.conv_w[l]);
        put_row(os, m.conv_b[l]);
    }
    put_matrix(os, m.dense_w);
    put_row(os, m.dense_b);
}

CnnModel read_cnn(std::istream& is) {
    CnnModel m;
    m.chip_size = get_i32(is);
    m.channels = get_i32(is);
    m.n_classes = get_i32(is);
    m.conv_channels = get_ints(is);
    m.dropout2 = wire::get_f64(is, kWhat);
    m.dropout3 = wire::get_f64(is, kWhat);
    const auto layers = wire::get_u32(is, kWhat);
    for (uint32_t l = 0; l < layers; ++l) {
        m.conv_w.push_back(get_matrix(is));
        m.conv_b.push_back(get_row(is));
    }
    m.dense_w = get_matrix(is);
    m.dense_b = get_row(is);
    return m;
}

// Splits a normalized labeled set into train/val with stratified folds so
// every class is represented on both sides.
std::pair<ChipDataset, ChipDataset> carve_validation(const ChipDataset& chips,
                                                     double val_fraction,
                                                     uint64_t seed) {
    const int k = std::max(
        2, static_cast<int>(std::llround(1.0 / val_fraction)));
    const auto folds = stratified_fold_indices(labels_of(chips), k, seed);
    std::vector<bool> in_val(chips.size(), false);
    for (size_t i : folds.front()) in_val[i] = true;

    ChipDataset train, val;
    train.split_tag = "train";
    val.split_tag = "val";
    train.normalization = chips.normalization;
    val.normalization = chips.normalization;
    for (size_t i = 0; i < chips.size(); ++i)
        (in_val[i] ? val : train).chips.push_back(chips.chips[i]);
    return {std::move(train), std::move(val)};
}

int class_count(const std::vector<int>& labels) {
    int top = -1;
    for (int y : labels) top = std::max(top, y);
    return top + 1;
}

}  // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::kmeans: return "kmeans";
        case ModelKind::forest: return "forest";
        case ModelKind::mlp: return "mlp";
        case ModelKind::cnn: return "cnn";
    }
    throw ConfigError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "kmeans") return ModelKind::kmeans;
    if (name == "forest") return ModelKind::forest;
    if (name == "mlp") return ModelKind::mlp;
    if (name == "cnn") return ModelKind::cnn;
    throw ConfigError("unknown model kind: " + name);
}

ModelKind TrainedModel::kind() const {
    return static_cast<ModelKind>(model.index());
}

const KMeansModel& as_kmeans(const TrainedModel& model) {
    if (const auto* m = std::get_if<KMeansModel>(&model.model)) return *m;
    throw FormatError("expected a kmeans model, found " +
                      to_string(model.kind()));
}

const ForestModel& as_forest(const TrainedModel& model) {
    if (const auto* m = std::get_if<ForestModel>(&model.model)) return *m;
    throw FormatError("expected a forest model, found " +
                      to_string(model.kind()));
}

const MlpModel& as_mlp(const TrainedModel& model) {
    if (const auto* m = std::get_if<MlpModel>(&model.model)) return *m;
    throw FormatError("expected an mlp model, found " +
                      to_string(model.kind()));
}

const CnnModel& as_cnn(const TrainedModel& model) {
    if (const auto* m = std::get_if<CnnModel>(&model.model)) return *m;
    throw FormatError("expected a cnn model, found " +
                      to_string(model.kind()));
}

void save_model(const std::string& path, const TrainedModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kMagic, 4);
    wire::put_u16(os, kVersion);
    wire::put_u8(os, static_cast<uint8_t>(model.kind()));
    wire::put_u8(os, model.normalization ? 1 : 0);
    if (model.normalization) {
        put_doubles(os, model.normalization->mean);
        put_doubles(os, model.normalization->stddev);
    }
    std::visit(
        [&os](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KMeansModel>) write_kmeans(os, m);
            else if constexpr (std::is_same_v<T, ForestModel>) write_forest(os, m);
            else if constexpr (std::is_same_v<T, MlpModel>) write_mlp(os, m);
            else write_cnn(os, m);
        },
        model.model);
    if (!os) throw IoError("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw IoError(std::string(kWhat) + " truncated");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("not a model file: " + path);
    const auto version = wire::get_u16(is, kWhat);
    if (version != kVersion)
        throw FormatError("unsupported model file version " +
                          std::to_string(version));
    const auto kind = wire::get_u8(is, kWhat);
    if (kind > 3) throw FormatError("unknown model kind tag in " + path);

    TrainedModel out;
    if (wire::get_u8(is, kWhat) != 0) {
        NormalizationStats stats;
        stats.mean = get_doubles(is);
        stats.stddev = get_doubles(is);
        out.normalization = std::move(stats);
    }
    switch (static_cast<ModelKind>(kind)) {
        case ModelKind::kmeans: out.model = read_kmeans(is); break;
        case ModelKind::forest: out.model = read_forest(is); break;
        case ModelKind::mlp: out.model = read_mlp(is); break;
        case ModelKind::cnn: out.model = read_cnn(is); break;
    }
    return out;
}

TrainedModel train_model(const ModelSpec& spec, const ChipDataset& train_raw,
                         uint64_t seed, LearningCurve* curve) {
    if (train_raw.chips.empty()) throw EmptyInputError("no training chips");
    if (curve) *curve = {};
    const std::vector<int> labels = labels_of(train_raw);
    const int n_classes = class_count(labels);
    auto [normed, stats] = normalize(train_raw);

    TrainedModel out;
    out.normalization = stats;
    switch (spec.kind) {
        case ModelKind::kmeans: {
            const auto vectors = flatten_chips(normed);
            KMeansModel m =
                kmeans_fit(vectors, spec.kmeans, derive_seed(seed, "kmeans"));
            m.cluster_to_class = majority_cluster_mapping(
                kmeans_predict(m, vectors), labels, m.params.k, n_classes);
            out.model = std::move(m);
            break;
        }
        case ModelKind::forest: {
            out.model = forest_fit(flatten_chips(normed), labels, spec.forest,
                                   derive_seed(seed, "forest"));
            break;
        }
        case ModelKind::mlp: {
            auto [train, val] = carve_validation(normed, spec.train.val_fraction,
                                                 derive_seed(seed, "val"));
            const int dim = normed.chip_size() * normed.chip_size() *
                            normed.channels();
            MlpModel init =
                make_mlp(dim, spec.mlp_hidden, n_classes, derive_seed(seed, "mlp"));
            TrainConfig config = spec.train;
            config.seed = derive_seed(seed, "mlp");
            auto fitted = nn_fit(init, train, val, config);
            out.model = std::move(fitted.first);
            if (curve) *curve = std::move(fitted.second);
            break;
        }
        case ModelKind::cnn: {
            auto [train, val] = carve_validation(normed, spec.train.val_fraction,
                                                 derive_seed(seed, "val"));
            CnnModel init =
                make_cnn(normed.chip_size(), normed.channels(),
                         spec.cnn_channels, n_classes, derive_seed(seed, "cnn"));
            TrainConfig config = spec.train;
            config.seed = derive_seed(seed, "cnn");
            auto fitted = nn_fit(init, train, val, config);
            out.model = std::move(fitted.first);
            if (curve) *curve = std::move(fitted.second);
            break;
        }
    }
    return out;
}

std::vector<int> predict_labels(const TrainedModel& model,
                                const ChipDataset& raw) {
    if (raw.chips.empty()) return {};
    const ChipDataset chips = model.normalization
                                  ? apply_normalization(raw, *model.normalization)
                                  : raw;
    switch (model.kind()) {
        case ModelKind::kmeans: {
            const auto& m = std::get<KMeansModel>(model.model);
            std::vector<int> clusters =
                kmeans_predict(m, flatten_chips(chips));
            if (m.cluster_to_class.empty()) return clusters;
            for (int& c : clusters)
                c = m.cluster_to_class[static_cast<size_t>(c)];
            return clusters;
        }
        case ModelKind::forest:
            return forest_predict(std::get<ForestModel>(model.model),
                                  flatten_chips(chips))
                .labels;
        case ModelKind::mlp:
            return nn_predict(std::get<MlpModel>(model.model), chips).labels;
        case ModelKind::cnn:
            return nn_predict(std::get<CnnModel>(model.model), chips).labels;
    }
    throw ConfigError("unknown model kind");
}

std::vector<std::vector<double>> predict_probabilities(const TrainedModel& model,
                                                       const ChipDataset& raw) {
    if (raw.chips.empty()) return {};
    const ChipDataset chips = model.normalization
                                  ? apply_normalization(raw, *model.normalization)
                                  : raw;
    switch (model.kind()) {
        case ModelKind::kmeans: {
            // One-hot over mapped classes: cluster membership is hard.
            const auto& m = std::get<KMeansModel>(model.model);
            std::vector<int> ids = kmeans_predict(m, flatten_chips(chips));
            int width = m.params.k;
            if (!m.cluster_to_class.empty()) {
                width = 0;
                for (int c : m.cluster_to_class) width = std::max(width, c + 1);
                for (int& c : ids)
                    c = m.cluster_to_class[static_cast<size_t>(c)];
            }
            std::vector<std::vector<double>> out(
                ids.size(), std::vector<double>(static_cast<size_t>(width), 0.0));
            for (size_t i = 0; i < ids.size(); ++i)
                out[i][static_cast<size_t>(ids[i])] = 1.0;
            return out;
        }
        case ModelKind::forest:
            return forest_vote_shares(std::get<ForestModel>(model.model),
                                      flatten_chips(chips));
        case ModelKind::mlp:
            return nn_predict(std::get<MlpModel>(model.model), chips)
                .probabilities;
        case ModelKind::cnn:
            return nn_predict(std::get<CnnModel>(model.model), chips)
                .probabilities;
    }
    throw ConfigError("unknown model kind");
}

}  // namespace landkit
