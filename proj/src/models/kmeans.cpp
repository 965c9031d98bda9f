#include <algorithm>
#include <cmath>
#include <limits>

#include "landkit/errors.hpp"
#include "landkit/models.hpp"
#include "landkit/rng.hpp"

namespace landkit {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void check_dims(const std::vector<std::vector<double>>& vectors, size_t d) {
    for (const auto& v : vectors)
        if (v.size() != d)
            throw ShapeError("vector dimension " + std::to_string(v.size()) +
                             " does not match " + std::to_string(d));
}

int nearest(const std::vector<std::vector<double>>& centroids,
            const std::vector<double>& x) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < centroids.size(); ++c) {
        const double d = sq_dist(centroids[c], x);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// k-means++: each next centroid drawn with probability proportional to the
// squared distance from the nearest one already chosen.
std::vector<std::vector<double>> plus_plus_init(
    const std::vector<std::vector<double>>& x, int k, Rng& rng) {
    const size_t n = x.size();
    std::vector<std::vector<double>> centroids;
    centroids.push_back(x[rng.next_below(n)]);

    std::vector<double> d2(n);
    while (centroids.size() < static_cast<size_t>(k)) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(c, x[i]));
            d2[i] = best;
            total += best;
        }
        size_t pick;
        if (total <= 0.0) {
            pick = rng.next_below(n);  // all points coincide with a centroid
        } else {
            double target = rng.next_double() * total;
            pick = n - 1;
            double acc = 0.0;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(x[pick]);
    }
    return centroids;
}

}  // namespace

KMeansModel kmeans_fit(const std::vector<std::vector<double>>& vectors,
                       const KMeansParams& params, uint64_t seed) {
    if (params.k < 1) throw ConfigError("k must be at least 1");
    if (vectors.empty()) throw EmptyInputError("no vectors to cluster");
    if (vectors.size() < static_cast<size_t>(params.k))
        throw InsufficientDataError("k-means needs at least k points");
    const size_t n = vectors.size();
    const size_t d = vectors.front().size();
    check_dims(vectors, d);

    Rng rng(seed);
    KMeansModel model;
    model.params = params;
    model.seed = seed;
    model.centroids = plus_plus_init(vectors, params.k, rng);

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < params.max_iters; ++iter) {
        // Assignment step and the objective under the current centroids.
        bool changed = false;
        double J = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const int c = nearest(model.centroids, vectors[i]);
            J += sq_dist(model.centroids[static_cast<size_t>(c)], vectors[i]);
            if (c != assign[i]) {
                assign[i] = c;
                changed = true;
            }
        }
        model.objective_curve.push_back(J);
        if (!changed && iter > 0) break;

        // Update step: means of the assigned points.
        std::vector<std::vector<double>> next(
            static_cast<size_t>(params.k), std::vector<double>(d, 0.0));
        std::vector<size_t> counts(static_cast<size_t>(params.k), 0);
        for (size_t i = 0; i < n; ++i) {
            auto& c = next[static_cast<size_t>(assign[i])];
            for (size_t j = 0; j < d; ++j) c[j] += vectors[i][j];
            ++counts[static_cast<size_t>(assign[i])];
        }
        for (int c = 0; c < params.k; ++c)
            if (counts[static_cast<size_t>(c)] > 0)
                for (size_t j = 0; j < d; ++j)
                    next[static_cast<size_t>(c)][j] /=
                        static_cast<double>(counts[static_cast<size_t>(c)]);

        // Empty clusters grab the point currently farthest from its centroid.
        for (int c = 0; c < params.k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0) continue;
            size_t far = 0;
            double far_d = -1.0;
            for (size_t i = 0; i < n; ++i) {
                if (counts[static_cast<size_t>(assign[i])] <= 1) continue;
                const double dist =
                    sq_dist(model.centroids[static_cast<size_t>(assign[i])],
                            vectors[i]);
                if (dist > far_d) {
                    far_d = dist;
                    far = i;
                }
            }
            next[static_cast<size_t>(c)] = vectors[far];
            --counts[static_cast<size_t>(assign[far])];
            assign[far] = c;
            counts[static_cast<size_t>(c)] = 1;
        }

        double movement = 0.0;
        for (int c = 0; c < params.k; ++c)
            movement = std::max(
                movement, sq_dist(model.centroids[static_cast<size_t>(c)],
                                  next[static_cast<size_t>(c)]));
        model.centroids = std::move(next);
        if (std::sqrt(movement) < params.tol) {
            // Record the objective at the final centroids too.
            double final_J = 0.0;
            for (size_t i = 0; i < n; ++i)
                final_J += sq_dist(
                    model.centroids[static_cast<size_t>(nearest(
                        model.centroids, vectors[i]))],
                    vectors[i]);
            model.objective_curve.push_back(final_J);
            break;
        }
    }
    return model;
}

std::vector<int> kmeans_predict(
    const KMeansModel& model, const std::vector<std::vector<double>>& vectors) {
    if (model.centroids.empty()) throw EmptyInputError("unfitted k-means model");
    const size_t d = model.centroids.front().size();
    check_dims(vectors, d);
    std::vector<int> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) out.push_back(nearest(model.centroids, v));
    return out;
}

std::vector<int> majority_cluster_mapping(const std::vector<int>& clusters,
                                          const std::vector<int>& labels,
                                          int k, int n_classes) {
    if (clusters.size() != labels.size())
        throw ShapeError("cluster/label lengths differ");
    std::vector<std::vector<size_t>> tally(
        static_cast<size_t>(k), std::vector<size_t>(static_cast<size_t>(n_classes), 0));
    for (size_t i = 0; i < clusters.size(); ++i) {
        if (clusters[i] < 0 || clusters[i] >= k || labels[i] < 0 ||
            labels[i] >= n_classes)
            throw ConfigError("cluster or label id out of range");
        ++tally[static_cast<size_t>(clusters[i])][static_cast<size_t>(labels[i])];
    }
    std::vector<int> mapping(static_cast<size_t>(k), 0);
    for (int c = 0; c < k; ++c) {
        size_t best = 0;
        for (int l = 1; l < n_classes; ++l)
            if (tally[static_cast<size_t>(c)][static_cast<size_t>(l)] >
                tally[static_cast<size_t>(c)][best])
                best = static_cast<size_t>(l);
        mapping[static_cast<size_t>(c)] = static_cast<int>(best);
    }
    return mapping;
}

}  // namespace landkit
