#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "landkit/errors.hpp"
#include "landkit/models.hpp"
#include "landkit/rng.hpp"

namespace landkit {

namespace {

struct Sample {
    double value;
    int label;
};

double gini(const std::vector<size_t>& counts, size_t total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

int majority(const std::vector<size_t>& counts) {
    size_t best = 0;
    for (size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;
    return static_cast<int>(best);
}

int resolve_max_features(int configured, int d) {
    if (configured > 0) return std::min(configured, d);
    if (configured == 0)
        return std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
    return d;  // -1: all features
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& x,
                const std::vector<int>& y, int n_classes,
                const ForestParams& params, Rng& rng)
        : x_(x), y_(y), n_classes_(n_classes), params_(params), rng_(rng),
          m_features_(resolve_max_features(params.max_features,
                                           static_cast<int>(x[0].size()))),
          feature_pool_(x[0].size()) {
        std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    }

    DecisionTree build(std::vector<size_t> idx) {
        tree_.nodes.clear();
        grow(std::move(idx), 0);
        return std::move(tree_);
    }

private:
    int leaf(const std::vector<size_t>& counts) {
        TreeNode node;
        node.label = majority(counts);
        tree_.nodes.push_back(node);
        return static_cast<int>(tree_.nodes.size()) - 1;
    }

    int grow(std::vector<size_t> idx, int depth) {
        std::vector<size_t> counts(static_cast<size_t>(n_classes_), 0);
        for (size_t i : idx) ++counts[static_cast<size_t>(y_[i])];
        const bool pure =
            *std::max_element(counts.begin(), counts.end()) == idx.size();
        if (pure || idx.size() < static_cast<size_t>(params_.min_samples_split) ||
            (params_.max_depth >= 0 && depth >= params_.max_depth))
            return leaf(counts);

        // Draw the split's candidate features without replacement.
        for (int i = 0; i < m_features_; ++i) {
            const size_t j =
                static_cast<size_t>(i) +
                rng_.next_below(feature_pool_.size() - static_cast<size_t>(i));
            std::swap(feature_pool_[static_cast<size_t>(i)], feature_pool_[j]);
        }

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_impurity = std::numeric_limits<double>::infinity();
        std::vector<Sample> samples(idx.size());
        const auto min_leaf = static_cast<size_t>(params_.min_samples_leaf);

        for (int fi = 0; fi < m_features_; ++fi) {
            const int f = feature_pool_[static_cast<size_t>(fi)];
            for (size_t i = 0; i < idx.size(); ++i)
                samples[i] = {x_[idx[i]][static_cast<size_t>(f)], y_[idx[i]]};
            std::sort(samples.begin(), samples.end(),
                      [](const Sample& a, const Sample& b) {
                          return a.value < b.value;
                      });

            std::vector<size_t> left(static_cast<size_t>(n_classes_), 0);
            std::vector<size_t> right = counts;
            for (size_t i = 0; i + 1 < samples.size(); ++i) {
                ++left[static_cast<size_t>(samples[i].label)];
                --right[static_cast<size_t>(samples[i].label)];
                if (samples[i].value == samples[i + 1].value) continue;
                const size_t nl = i + 1, nr = samples.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double impurity =
                    (static_cast<double>(nl) * gini(left, nl) +
                     static_cast<double>(nr) * gini(right, nr)) /
                    static_cast<double>(samples.size());
                if (impurity < best_impurity) {
                    best_impurity = impurity;
                    best_feature = f;
                    best_threshold =
                        samples[i].value +
                        (samples[i + 1].value - samples[i].value) / 2.0;
                }
            }
        }
        if (best_feature < 0) return leaf(counts);  // no split beats a leaf

        std::vector<size_t> left_idx, right_idx;
        for (size_t i : idx) {
            if (x_[i][static_cast<size_t>(best_feature)] <= best_threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.label = majority(counts);
        tree_.nodes.push_back(node);
        const int self = static_cast<int>(tree_.nodes.size()) - 1;
        const int left_child = grow(std::move(left_idx), depth + 1);
        tree_.nodes[static_cast<size_t>(self)].left = left_child;
        const int right_child = grow(std::move(right_idx), depth + 1);
        tree_.nodes[static_cast<size_t>(self)].right = right_child;
        return self;
    }

    const std::vector<std::vector<double>>& x_;
    const std::vector<int>& y_;
    const int n_classes_;
    const ForestParams& params_;
    Rng& rng_;
    const int m_features_;
    std::vector<int> feature_pool_;
    DecisionTree tree_;
};

void validate_params(const ForestParams& p) {
    if (p.n_estimators < 1) throw ConfigError("n_estimators must be positive");
    if (p.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (p.min_samples_split < 2)
        throw ConfigError("min_samples_split must be >= 2");
    if (p.max_depth == 0 || p.max_depth < -1)
        throw ConfigError("max_depth must be -1 (unlimited) or positive");
    if (p.max_features < -1)
        throw ConfigError("max_features must be -1 (all), 0 (sqrt), or a count");
}

template <typename T>
std::vector<T> take(const std::vector<T>& items, const std::vector<size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(items[i]);
    return out;
}

}  // namespace

int DecisionTree::predict(const std::vector<double>& x) const {
    int at = 0;
    while (nodes[static_cast<size_t>(at)].feature >= 0) {
        const auto& node = nodes[static_cast<size_t>(at)];
        at = x[static_cast<size_t>(node.feature)] <= node.threshold ? node.left
                                                                    : node.right;
    }
    return nodes[static_cast<size_t>(at)].label;
}

ForestModel forest_fit(const std::vector<std::vector<double>>& vectors,
                       const std::vector<int>& labels,
                       const ForestParams& params, uint64_t seed) {
    validate_params(params);
    if (vectors.empty()) throw EmptyInputError("no training vectors");
    if (vectors.size() != labels.size())
        throw ShapeError("vector/label counts differ");
    const size_t d = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != d) throw ShapeError("training vectors must share one dimension");

    int n_classes = 0;
    for (int l : labels) {
        if (l < 0) throw ConfigError("negative class label");
        n_classes = std::max(n_classes, l + 1);
    }
    bool mixed = false;
    for (int l : labels) mixed = mixed || l != labels.front();
    if (!mixed)
        throw DegenerateLabelsError("training labels hold a single class");

    ForestModel model;
    model.params = params;
    model.n_features = static_cast<int>(d);
    model.n_classes = n_classes;
    model.seed = seed;
    model.trees.reserve(static_cast<size_t>(params.n_estimators));

    const size_t n = vectors.size();
    for (int t = 0; t < params.n_estimators; ++t) {
        Rng rng(derive_seed(seed, "tree", static_cast<uint64_t>(t)));
        std::vector<size_t> bootstrap(n);
        for (auto& i : bootstrap) i = rng.next_below(n);
        TreeBuilder builder(vectors, labels, n_classes, params, rng);
        model.trees.push_back(builder.build(std::move(bootstrap)));
    }
    return model;
}

ForestPrediction forest_predict(
    const ForestModel& model, const std::vector<std::vector<double>>& vectors) {
    if (model.trees.empty()) throw EmptyInputError("unfitted forest");
    for (const auto& v : vectors)
        if (v.size() != static_cast<size_t>(model.n_features))
            throw ShapeError("input dimension does not match the forest");

    ForestPrediction out;
    out.labels.reserve(vectors.size());
    out.votes.reserve(vectors.size());
    std::vector<size_t> tally(static_cast<size_t>(model.n_classes));
    for (const auto& v : vectors) {
        std::vector<int> votes;
        votes.reserve(model.trees.size());
        std::fill(tally.begin(), tally.end(), 0);
        for (const auto& tree : model.trees) {
            const int c = tree.predict(v);
            votes.push_back(c);
            ++tally[static_cast<size_t>(c)];
        }
        out.labels.push_back(majority(tally));
        out.votes.push_back(std::move(votes));
    }
    return out;
}

std::vector<std::vector<double>> forest_vote_shares(
    const ForestModel& model, const std::vector<std::vector<double>>& vectors) {
    auto pred = forest_predict(model, vectors);
    std::vector<std::vector<double>> shares(
        pred.votes.size(),
        std::vector<double>(static_cast<size_t>(model.n_classes), 0.0));
    for (size_t i = 0; i < pred.votes.size(); ++i) {
        for (int v : pred.votes[i])
            shares[i][static_cast<size_t>(v)] += 1.0;
        for (auto& s : shares[i]) s /= static_cast<double>(model.trees.size());
    }
    return shares;
}

ForestGridResult forest_grid_search(
    const std::vector<std::vector<double>>& vectors,
    const std::vector<int>& labels, const ForestGrid& grid, int folds,
    uint64_t seed) {
    if (grid.n_estimators.empty() || grid.max_depth.empty() ||
        grid.max_features.empty() || grid.min_samples_leaf.empty() ||
        grid.min_samples_split.empty())
        throw ConfigError("grid axes must be non-empty");

    const auto fold_idx =
        stratified_fold_indices(labels, folds, derive_seed(seed, "grid-folds"));

    ForestGridResult result;
    result.best_accuracy = -1.0;
    uint64_t combo = 0;
    for (int ne : grid.n_estimators)
        for (int md : grid.max_depth)
            for (int mf : grid.max_features)
                for (int ml : grid.min_samples_leaf)
                    for (int ms : grid.min_samples_split) {
                        ForestParams p{ne, md, mf, ml, ms};
                        std::vector<double> accs;
                        for (size_t f = 0; f < fold_idx.size(); ++f) {
                            std::vector<size_t> train_idx;
                            for (size_t g = 0; g < fold_idx.size(); ++g)
                                if (g != f)
                                    train_idx.insert(train_idx.end(),
                                                     fold_idx[g].begin(),
                                                     fold_idx[g].end());
                            auto fit = forest_fit(
                                take(vectors, train_idx), take(labels, train_idx),
                                p, derive_seed(seed, "grid", combo));
                            auto pred =
                                forest_predict(fit, take(vectors, fold_idx[f]));
                            auto truth = take(labels, fold_idx[f]);
                            size_t hits = 0;
                            for (size_t i = 0; i < truth.size(); ++i)
                                hits += pred.labels[i] == truth[i];
                            accs.push_back(static_cast<double>(hits) /
                                           static_cast<double>(truth.size()));
                        }
                        double mean = 0.0;
                        for (double a : accs) mean += a;
                        mean /= static_cast<double>(accs.size());
                        double var = 0.0;
                        for (double a : accs) var += (a - mean) * (a - mean);
                        var /= static_cast<double>(accs.size());

                        result.table.push_back({p, mean, std::sqrt(var)});
                        if (mean > result.best_accuracy) {
                            result.best_accuracy = mean;
                            result.best = p;
                        }
                        ++combo;
                    }
    return result;
}

}  // namespace landkit
