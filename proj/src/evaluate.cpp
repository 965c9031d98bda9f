#include "landkit/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numeric>

#include "csv_util.hpp"
#include "landkit/errors.hpp"
#include "landkit/rng.hpp"
#include "png_io.hpp"

namespace landkit {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double safe_ratio(double num, double den, bool& degenerate) {
    if (den == 0.0) {
        degenerate = true;
        return 0.0;
    }
    return num / den;
}

// Midranks (1-based) for scores sorted ascending: ties share the average of
// the ranks they span.
std::vector<double> midranks(const std::vector<double>& scores) {
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>((i + 1) + (j + 1));
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

// --- tiny raster plotting -------------------------------------------------

struct Canvas {
    int width;
    int height;
    std::vector<uint8_t> rgb;

    Canvas(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 255) {}

    void set(int x, int y, const pngio::Rgb& c) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const size_t at = (static_cast<size_t>(y) * width + x) * 3;
        rgb[at] = c[0];
        rgb[at + 1] = c[1];
        rgb[at + 2] = c[2];
    }

    void line(int x0, int y0, int x1, int y1, const pngio::Rgb& c) {
        const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }
};

struct PlotFrame {
    int left, right, top, bottom;  // plot-area pixel bounds, y down

    int x_of(size_t i, size_t n) const {
        if (n <= 1) return left;
        return left + static_cast<int>(std::lround(static_cast<double>(i) / (n - 1) *
                                                   (right - left)));
    }
    int y_of(double v, double lo, double hi) const {
        const double f = hi == lo ? 0.0 : (v - lo) / (hi - lo);
        return bottom - static_cast<int>(std::lround(f * (bottom - top)));
    }
};

void draw_series(Canvas& canvas, const PlotFrame& frame, const std::vector<double>& values,
                 double lo, double hi, const pngio::Rgb& color) {
    if (values.empty()) return;
    int px = frame.x_of(0, values.size());
    int py = frame.y_of(values[0], lo, hi);
    canvas.set(px, py, color);
    for (size_t i = 1; i < values.size(); ++i) {
        const int x = frame.x_of(i, values.size());
        const int y = frame.y_of(values[i], lo, hi);
        canvas.line(px, py, x, y, color);
        px = x;
        py = y;
    }
}

void check_square(const ConfusionMatrix& cm) {
    for (const auto& row : cm.counts)
        if (row.size() != cm.n_classes())
            throw ShapeError("confusion matrix is not square");
}

}  // namespace

size_t ConfusionMatrix::total() const {
    size_t n = 0;
    for (const auto& row : counts)
        for (size_t c : row) n += c;
    return n;
}

size_t ConfusionMatrix::diagonal() const {
    size_t n = 0;
    for (size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
    return n;
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted,
                          int n_classes) {
    if (n_classes <= 0) throw ConfigError("confusion matrix needs a positive class count");
    if (truth.size() != predicted.size())
        throw ShapeError("confusion needs matching label vectors, got " +
                         std::to_string(truth.size()) + " and " +
                         std::to_string(predicted.size()));
    ConfusionMatrix cm;
    cm.counts.assign(static_cast<size_t>(n_classes),
                     std::vector<size_t>(static_cast<size_t>(n_classes), 0));
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 ||
            predicted[i] >= n_classes)
            throw ConfigError("label outside [0, " + std::to_string(n_classes) + ") at sample " +
                              std::to_string(i));
        cm.counts[static_cast<size_t>(truth[i])][static_cast<size_t>(predicted[i])] += 1;
    }
    return cm;
}

MetricReport metrics(const ConfusionMatrix& cm) {
    const size_t n_classes = cm.n_classes();
    if (n_classes == 0) throw EmptyInputError("empty confusion matrix");
    check_square(cm);
    const double total = static_cast<double>(cm.total());
    if (total == 0.0) throw EmptyInputError("confusion matrix counts no samples");

    std::vector<double> row_sum(n_classes, 0.0), col_sum(n_classes, 0.0);
    for (size_t t = 0; t < n_classes; ++t) {
        for (size_t p = 0; p < n_classes; ++p) {
            row_sum[t] += static_cast<double>(cm.counts[t][p]);
            col_sum[p] += static_cast<double>(cm.counts[t][p]);
        }
    }

    MetricReport report;
    report.per_class.reserve(n_classes);
    for (size_t c = 0; c < n_classes; ++c) {
        const double tp = static_cast<double>(cm.counts[c][c]);
        const double fn = row_sum[c] - tp;
        const double fp = col_sum[c] - tp;
        const double tn = total - tp - fn - fp;

        ClassMetrics m;
        m.accuracy = (tp + tn) / (tp + tn + fp + fn);  // denominator is `total`
        m.precision = safe_ratio(tp, tp + fp, m.degenerate);
        m.recall = safe_ratio(tp, tp + fn, m.degenerate);
        m.f1 = safe_ratio(2.0 * tp, 2.0 * tp + fp + fn, m.degenerate);
        report.per_class.push_back(m);

        report.macro.accuracy += m.accuracy / static_cast<double>(n_classes);
        report.macro.precision += m.precision / static_cast<double>(n_classes);
        report.macro.recall += m.recall / static_cast<double>(n_classes);
        report.macro.f1 += m.f1 / static_cast<double>(n_classes);
        report.macro.degenerate = report.macro.degenerate || m.degenerate;
    }
    report.overall_accuracy = static_cast<double>(cm.diagonal()) / total;
    return report;
}

AucReport roc_auc(const std::vector<int>& truth,
                  const std::vector<std::vector<double>>& probabilities, int n_classes) {
    if (n_classes <= 0) throw ConfigError("roc auc needs a positive class count");
    if (truth.empty()) throw EmptyInputError("no samples for roc auc");
    if (probabilities.size() != truth.size())
        throw ShapeError("probability rows do not match the labels");
    for (const auto& row : probabilities)
        if (row.size() != static_cast<size_t>(n_classes))
            throw ShapeError("probability row width does not match the class count");
    for (int label : truth)
        if (label < 0 || label >= n_classes)
            throw ConfigError("label outside [0, " + std::to_string(n_classes) + ")");

    AucReport report;
    report.per_class.assign(static_cast<size_t>(n_classes), kNan);
    report.defined.assign(static_cast<size_t>(n_classes), 0);

    std::vector<double> scores(truth.size());
    for (int c = 0; c < n_classes; ++c) {
        size_t n_pos = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            scores[i] = probabilities[i][static_cast<size_t>(c)];
            n_pos += truth[i] == c;
        }
        const size_t n_neg = truth.size() - n_pos;
        if (n_pos == 0 || n_neg == 0) continue;  // no pairs to rank

        const std::vector<double> ranks = midranks(scores);
        double rank_sum = 0.0;
        for (size_t i = 0; i < truth.size(); ++i)
            if (truth[i] == c) rank_sum += ranks[i];

        const double n_pos_d = static_cast<double>(n_pos);
        report.per_class[static_cast<size_t>(c)] =
            (rank_sum - n_pos_d * (n_pos_d + 1.0) / 2.0) /
            (n_pos_d * static_cast<double>(n_neg));
        report.defined[static_cast<size_t>(c)] = 1;
    }

    double sum = 0.0;
    size_t n_defined = 0;
    for (size_t c = 0; c < report.per_class.size(); ++c) {
        if (!report.defined[c]) continue;
        sum += report.per_class[c];
        ++n_defined;
    }
    report.macro = n_defined == 0 ? kNan : sum / static_cast<double>(n_defined);
    return report;
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) throw EmptyInputError("mean of nothing");
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
    const double mean = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size()));
}

CvResult kfold_cv(const ChipDataset& dataset, const ModelSpec& spec, int k, uint64_t seed) {
    const std::vector<int> labels = labels_of(dataset);
    const auto folds = stratified_fold_indices(labels, k, derive_seed(seed, "cv-folds"));

    CvResult result;
    result.fold_accuracy.reserve(folds.size());
    double best = -1.0;
    for (size_t f = 0; f < folds.size(); ++f) {
        std::vector<uint8_t> in_test(dataset.size(), 0);
        for (size_t ix : folds[f]) in_test[ix] = 1;
        ChipDataset train, test;
        train.split_tag = "train";
        test.split_tag = "test";
        for (size_t i = 0; i < dataset.size(); ++i)
            (in_test[i] ? test : train).chips.push_back(dataset.chips[i]);

        TrainedModel model = train_model(spec, train, derive_seed(seed, "cv-fold", f));
        const std::vector<int> predicted = predict_labels(model, test);
        size_t hits = 0;
        for (size_t i = 0; i < predicted.size(); ++i)
            hits += predicted[i] == *test.chips[i].label;
        const double accuracy =
            static_cast<double>(hits) / static_cast<double>(predicted.size());

        if (accuracy > best) {  // strictly greater: ties keep the earlier fold
            best = accuracy;
            result.best_fold = f;
            result.best_model = std::move(model);
        }
        result.fold_accuracy.push_back(accuracy);
    }
    result.mean_accuracy = mean_of(result.fold_accuracy);
    result.std_accuracy = population_std(result.fold_accuracy);
    return result;
}

SweepResult sample_size_sweep(const Raster& raster, const std::vector<LabeledPoint>& points,
                              const ClassScheme& scheme, const ModelSpec& spec,
                              const SweepOptions& options, const std::string& artifact_dir,
                              uint64_t seed) {
    scheme.validate();
    const int n_classes = static_cast<int>(scheme.size());
    const std::vector<int> sizes = options.sizes.empty() ? sweep_sample_sizes() : options.sizes;
    std::filesystem::create_directories(artifact_dir);

    SweepResult out;
    out.rows.reserve(sizes.size());
    for (size_t s = 0; s < sizes.size(); ++s) {
        const int size = sizes[s];
        if (size <= 0 || size % n_classes != 0)
            throw ConfigError("sweep size " + std::to_string(size) + " does not split evenly over " +
                              std::to_string(n_classes) + " classes");
        const int per_class = size / n_classes;
        SplitOptions split_options;
        split_options.per_class_train = static_cast<int>(std::llround(per_class * 0.7));
        split_options.per_class_test = per_class - split_options.per_class_train;
        split_options.chip_size = options.chip_size;
        split_options.underfull = options.underfull;
        if (split_options.per_class_train < 1 || split_options.per_class_test < 1)
            throw ConfigError("sweep size " + std::to_string(size) +
                              " leaves an empty train or test side");

        LabeledSplit split = build_labeled_set(raster, points, scheme, split_options,
                                               derive_seed(seed, "sweep-split", s));
        for (const auto& warning : split.warnings)
            out.warnings.push_back("size " + std::to_string(size) + ": " + warning);

        const TrainedModel model =
            train_model(spec, split.train, derive_seed(seed, "sweep-train", s));
        const std::vector<int> predicted = predict_labels(model, split.test);
        const MetricReport report =
            metrics(confusion(labels_of(split.test), predicted, n_classes));

        SweepRow row;
        row.sample_size = size;
        row.accuracy = report.overall_accuracy;
        row.precision = report.macro.precision;
        row.recall = report.macro.recall;
        row.f1 = report.macro.f1;

        const ClassMap map = classify_map(raster, model, scheme, options.year,
                                          options.chip_size, options.batch_size);
        row.map_path = (std::filesystem::path(artifact_dir) /
                        ("map_" + std::to_string(size) + ".png"))
                           .string();
        render_map(map, row.map_path);
        out.rows.push_back(std::move(row));
    }
    return out;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm,
                         const ClassScheme& scheme) {
    check_square(cm);
    if (scheme.size() != cm.n_classes())
        throw ShapeError("scheme does not match the confusion matrix");
    auto out = csvu::open(path);
    out << "true\\pred";
    for (const auto& cls : scheme.classes) out << ',' << csvu::field(cls.name);
    out << '\n';
    for (size_t t = 0; t < cm.n_classes(); ++t) {
        out << csvu::field(scheme.classes[t].name);
        for (size_t c : cm.counts[t]) out << ',' << c;
        out << '\n';
    }
    csvu::finish(out, path);
}

void render_confusion_png(const std::string& path, const ConfusionMatrix& cm) {
    check_square(cm);
    const int n = static_cast<int>(cm.n_classes());
    if (n == 0) throw EmptyInputError("empty confusion matrix");

    size_t max_count = 0;
    for (const auto& row : cm.counts)
        for (size_t c : row) max_count = std::max(max_count, c);

    constexpr int cell = 24;
    const int side = n * (cell + 1) + 1;  // 1px grid lines
    Canvas canvas(side, side);
    constexpr pngio::Rgb grid{0, 0, 0};
    constexpr pngio::Rgb deep{8, 48, 107};  // white -> dark blue ramp

    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            if (x % (cell + 1) == 0 || y % (cell + 1) == 0) {
                canvas.set(x, y, grid);
                continue;
            }
            const int t = y / (cell + 1), p = x / (cell + 1);
            const double f = max_count == 0
                                 ? 0.0
                                 : static_cast<double>(cm.counts[t][p]) /
                                       static_cast<double>(max_count);
            pngio::Rgb c;
            for (int ch = 0; ch < 3; ++ch)
                c[ch] = static_cast<uint8_t>(std::lround(255.0 + f * (deep[ch] - 255.0)));
            canvas.set(x, y, c);
        }
    }
    pngio::write_rgb(path, side, side, canvas.rgb);
}

void write_curve_csv(const std::string& path, const LearningCurve& curve) {
    const size_t n = curve.train_loss.size();
    if (curve.train_accuracy.size() != n || curve.val_loss.size() != n ||
        curve.val_accuracy.size() != n)
        throw ShapeError("learning curve series have different lengths");
    auto out = csvu::open(path);
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (size_t i = 0; i < n; ++i) {
        out << (i + 1) << ',' << csvu::number(curve.train_loss[i]) << ','
            << csvu::number(curve.train_accuracy[i]) << ',' << csvu::number(curve.val_loss[i])
            << ',' << csvu::number(curve.val_accuracy[i]) << '\n';
    }
    csvu::finish(out, path);
}

void render_curve_png(const std::string& path, const LearningCurve& curve) {
    const size_t n = curve.train_loss.size();
    if (curve.train_accuracy.size() != n || curve.val_loss.size() != n ||
        curve.val_accuracy.size() != n)
        throw ShapeError("learning curve series have different lengths");
    if (n == 0) throw EmptyInputError("learning curve has no epochs");

    Canvas canvas(640, 400);
    const PlotFrame frame{48, 624, 16, 352};
    constexpr pngio::Rgb axis{0, 0, 0};
    canvas.line(frame.left, frame.top, frame.left, frame.bottom, axis);
    canvas.line(frame.left, frame.bottom, frame.right, frame.bottom, axis);

    if (curve.best_epoch >= 1) {  // vertical marker on the selected epoch
        const int x = frame.x_of(static_cast<size_t>(curve.best_epoch - 1), n);
        canvas.line(x, frame.top, x, frame.bottom, pngio::Rgb{200, 200, 200});
    }

    double max_loss = 0.0;
    for (double v : curve.train_loss) max_loss = std::max(max_loss, v);
    for (double v : curve.val_loss) max_loss = std::max(max_loss, v);
    if (max_loss == 0.0) max_loss = 1.0;

    draw_series(canvas, frame, curve.train_loss, 0.0, max_loss, pngio::Rgb{178, 24, 43});
    draw_series(canvas, frame, curve.val_loss, 0.0, max_loss, pngio::Rgb{239, 138, 98});
    draw_series(canvas, frame, curve.train_accuracy, 0.0, 1.0, pngio::Rgb{27, 120, 55});
    draw_series(canvas, frame, curve.val_accuracy, 0.0, 1.0, pngio::Rgb{33, 102, 172});

    pngio::write_rgb(path, canvas.width, canvas.height, canvas.rgb);
}

void write_cv_table_csv(const std::string& path, const std::vector<std::string>& model_names,
                        const std::vector<CvResult>& results) {
    if (model_names.size() != results.size())
        throw ShapeError("cv table needs one name per result");
    if (results.empty()) throw EmptyInputError("cv table has no models");
    const size_t k = results.front().fold_accuracy.size();
    for (const auto& r : results)
        if (r.fold_accuracy.size() != k)
            throw ShapeError("cv results have different fold counts");

    auto out = csvu::open(path);
    out << "fold";
    for (const auto& name : model_names) out << ',' << csvu::field(name);
    out << '\n';
    for (size_t f = 0; f < k; ++f) {
        out << (f + 1);
        for (const auto& r : results) out << ',' << csvu::score(r.fold_accuracy[f]);
        out << '\n';
    }
    out << "mean";
    for (const auto& r : results) out << ',' << csvu::score(r.mean_accuracy);
    out << '\n';
    out << "std";
    for (const auto& r : results) out << ',' << csvu::score(r.std_accuracy);
    out << '\n';
    csvu::finish(out, path);
}

void write_comparison_csv(const std::string& path, const std::vector<std::string>& model_names,
                          const std::vector<MetricReport>& reports) {
    if (model_names.size() != reports.size())
        throw ShapeError("comparison table needs one name per report");
    auto out = csvu::open(path);
    out << "model,accuracy,precision,recall,f1\n";
    for (size_t i = 0; i < reports.size(); ++i) {
        out << csvu::field(model_names[i]) << ',' << csvu::score(reports[i].overall_accuracy)
            << ',' << csvu::score(reports[i].macro.precision) << ','
            << csvu::score(reports[i].macro.recall) << ',' << csvu::score(reports[i].macro.f1)
            << '\n';
    }
    csvu::finish(out, path);
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
    auto out = csvu::open(path);
    out << "sample size,accuracy,precision,recall,f1,map\n";
    for (const auto& row : sweep.rows) {
        out << row.sample_size << ',' << csvu::score(row.accuracy) << ','
            << csvu::score(row.precision) << ',' << csvu::score(row.recall) << ','
            << csvu::score(row.f1) << ',' << csvu::field(row.map_path) << '\n';
    }
    csvu::finish(out, path);
}

}  // namespace landkit
