#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "landkit/errors.hpp"
#include "landkit/evaluate.hpp"
#include "landkit/rng.hpp"
#include "test_support.hpp"

using namespace landkit;
using testsup::TempDir;

namespace {

ConfusionMatrix cm_of(std::vector<std::vector<size_t>> counts) {
    ConfusionMatrix cm;
    cm.counts = std::move(counts);
    return cm;
}

ConfusionMatrix random_cm(int n_classes, Rng& rng) {
    ConfusionMatrix cm;
    cm.counts.assign(n_classes, std::vector<size_t>(n_classes, 0));
    for (auto& row : cm.counts)
        for (auto& cell : row) cell = rng.next_below(17);
    return cm;
}

// All-pairs concordance: the textbook AUC definition the rank form must match.
double pair_auc(const std::vector<int>& truth,
                const std::vector<std::vector<double>>& probs, int cls) {
    double concordant = 0.0, pairs = 0.0;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != cls) continue;
        for (size_t j = 0; j < truth.size(); ++j) {
            if (truth[j] == cls) continue;
            pairs += 1.0;
            if (probs[i][cls] > probs[j][cls])
                concordant += 1.0;
            else if (probs[i][cls] == probs[j][cls])
                concordant += 0.5;
        }
    }
    return concordant / pairs;
}

ChipDataset separable_chips(int per_class, int n_classes, uint64_t seed) {
    Rng rng(seed);
    ChipDataset dataset;
    dataset.split_tag = "train";
    for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Chip chip;
            chip.chip_size = 3;
            chip.channels = 2;
            chip.center = {i, c};
            chip.label = c;
            chip.window.resize(18);
            for (auto& v : chip.window) v = 3.0 * c + 0.2 * rng.next_double();
            dataset.chips.push_back(std::move(chip));
        }
    }
    return dataset;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

uint32_t be32(const std::string& bytes, size_t at) {
    return (uint32_t(uint8_t(bytes[at])) << 24) | (uint32_t(uint8_t(bytes[at + 1])) << 16) |
           (uint32_t(uint8_t(bytes[at + 2])) << 8) | uint32_t(uint8_t(bytes[at + 3]));
}

// Minimal RGB-PNG decode (filter NONE per the writer's contract).
struct RgbImage {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<uint8_t> rgb;

    std::array<uint8_t, 3> at(uint32_t x, uint32_t y) const {
        const size_t p = (static_cast<size_t>(y) * width + x) * 3;
        return {rgb[p], rgb[p + 1], rgb[p + 2]};
    }
};

RgbImage parse_rgb_png(const std::string& path) {
    const std::string raw = slurp(path);
    REQUIRE(raw.size() > 8);
    REQUIRE(uint8_t(raw[0]) == 137);
    REQUIRE(raw.substr(1, 3) == "PNG");

    RgbImage img;
    std::string idat;
    size_t at = 8;
    while (at + 12 <= raw.size()) {
        const uint32_t len = be32(raw, at);
        const std::string type = raw.substr(at + 4, 4);
        const size_t data = at + 8;
        REQUIRE(data + len + 4 <= raw.size());
        if (type == "IHDR") {
            img.width = be32(raw, data);
            img.height = be32(raw, data + 4);
            REQUIRE(uint8_t(raw[data + 8]) == 8);
            REQUIRE(uint8_t(raw[data + 9]) == 2);  // truecolor
        } else if (type == "IDAT") {
            idat += raw.substr(data, len);
        }
        at = data + len + 4;
        if (type == "IEND") break;
    }

    const size_t stride = static_cast<size_t>(img.width) * 3 + 1;
    std::vector<uint8_t> rows(stride * img.height);
    uLongf out_len = rows.size();
    REQUIRE(uncompress(rows.data(), &out_len,
                       reinterpret_cast<const Bytef*>(idat.data()), idat.size()) == Z_OK);
    REQUIRE(out_len == rows.size());
    for (uint32_t y = 0; y < img.height; ++y) {
        REQUIRE(rows[y * stride] == 0);
        img.rgb.insert(img.rgb.end(), rows.begin() + y * stride + 1,
                       rows.begin() + (y + 1) * stride);
    }
    return img;
}

bool looks_like_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) return false;
    char sig[8] = {};
    in.read(sig, 8);
    return in.gcount() == 8 && uint8_t(sig[0]) == 137 && sig[1] == 'P' && sig[2] == 'N' &&
           sig[3] == 'G';
}

}  // namespace

TEST_SUITE("evaluate") {

TEST_CASE("confusion counts label pairs") {
    const ConfusionMatrix cm = confusion({0, 0, 1}, {0, 1, 1}, 2);
    CHECK(cm.counts[0][0] == 1);
    CHECK(cm.counts[0][1] == 1);
    CHECK(cm.counts[1][1] == 1);
    CHECK(cm.counts[1][0] == 0);
    CHECK(cm.total() == 3);

    SUBCASE("perfect prediction is diagonal") {
        const ConfusionMatrix diag = confusion({0, 1, 2, 2}, {0, 1, 2, 2}, 3);
        CHECK(diag.diagonal() == 4);
        CHECK(diag.total() == 4);
    }

    SUBCASE("total equals the sample count on random inputs") {
        Rng rng(11);
        std::vector<int> truth(257), pred(257);
        for (size_t i = 0; i < truth.size(); ++i) {
            truth[i] = static_cast<int>(rng.next_below(5));
            pred[i] = static_cast<int>(rng.next_below(5));
        }
        CHECK(confusion(truth, pred, 5).total() == 257);
    }

    SUBCASE("contract violations") {
        CHECK_THROWS_AS(confusion({0, 1}, {0}, 2), ShapeError);
        CHECK_THROWS_AS(confusion({0, 3}, {0, 1}, 2), ConfigError);
        CHECK_THROWS_AS(confusion({0, -1}, {0, 1}, 2), ConfigError);
        CHECK_THROWS_AS(confusion({}, {}, 0), ConfigError);
    }
}

TEST_CASE("metrics of a diagonal matrix are all ones") {
    const MetricReport report = metrics(cm_of({{5, 0}, {0, 7}}));
    CHECK(report.overall_accuracy == 1.0);
    for (const auto& m : report.per_class) {
        CHECK(m.accuracy == 1.0);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
        CHECK(!m.degenerate);
    }
    CHECK(report.macro.f1 == 1.0);
}

TEST_CASE("metrics match hand-applied formulas on a binary matrix") {
    // [[9,1],[2,8]]: class 1 has TP=8, FP=1, FN=2, TN=9.
    const MetricReport report = metrics(cm_of({{9, 1}, {2, 8}}));
    CHECK(report.per_class[1].precision == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(report.per_class[1].recall == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(report.per_class[1].f1 == doctest::Approx(16.0 / 19.0).epsilon(1e-12));
    CHECK(report.per_class[1].accuracy == doctest::Approx(17.0 / 20.0).epsilon(1e-12));
    // Class 0 one-vs-rest: TP=9, FP=2, FN=1, TN=8.
    CHECK(report.per_class[0].precision == doctest::Approx(9.0 / 11.0).epsilon(1e-12));
    CHECK(report.per_class[0].recall == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(report.per_class[0].f1 == doctest::Approx(18.0 / 21.0).epsilon(1e-12));
    CHECK(report.overall_accuracy == doctest::Approx(17.0 / 20.0).epsilon(1e-12));
    CHECK(report.macro.precision ==
          doctest::Approx((9.0 / 11.0 + 8.0 / 9.0) / 2.0).epsilon(1e-12));
    CHECK(!report.macro.degenerate);
}

TEST_CASE("a class never seen nor predicted is flagged, not crashed") {
    const MetricReport report = metrics(cm_of({{5, 0, 0}, {0, 5, 0}, {0, 0, 0}}));
    CHECK(report.per_class[2].degenerate);
    CHECK(report.per_class[2].precision == 0.0);
    CHECK(report.per_class[2].recall == 0.0);
    CHECK(report.per_class[2].f1 == 0.0);
    CHECK(report.per_class[2].accuracy == 1.0);  // TN covers everything
    CHECK(report.macro.degenerate);
    CHECK(!report.per_class[0].degenerate);

    CHECK_THROWS_AS(metrics(cm_of({})), EmptyInputError);
    CHECK_THROWS_AS(metrics(cm_of({{0, 0}, {0, 0}})), EmptyInputError);
    CHECK_THROWS_AS(metrics(cm_of({{1, 0}, {0}})), ShapeError);
}

TEST_CASE("metrics agree with an independent oracle on random matrices") {
    Rng rng(29);
    for (int round = 0; round < 20; ++round) {
        ConfusionMatrix cm = random_cm(4, rng);
        cm.counts[rng.next_below(4)][rng.next_below(4)] += 1;  // ensure non-empty
        const MetricReport report = metrics(cm);

        const double total = static_cast<double>(cm.total());
        double macro_f1 = 0.0;
        for (size_t c = 0; c < 4; ++c) {
            double tp = static_cast<double>(cm.counts[c][c]);
            double row = 0.0, col = 0.0;
            for (size_t o = 0; o < 4; ++o) {
                row += static_cast<double>(cm.counts[c][o]);
                col += static_cast<double>(cm.counts[o][c]);
            }
            const double fp = col - tp, fn = row - tp, tn = total - tp - fp - fn;
            CHECK(report.per_class[c].accuracy ==
                  doctest::Approx((tp + tn) / (tp + tn + fp + fn)).epsilon(1e-12));
            if (tp + fp > 0)
                CHECK(report.per_class[c].precision ==
                      doctest::Approx(tp / (tp + fp)).epsilon(1e-12));
            if (tp + fn > 0)
                CHECK(report.per_class[c].recall ==
                      doctest::Approx(tp / (tp + fn)).epsilon(1e-12));
            if (2 * tp + fp + fn > 0)
                macro_f1 += (2 * tp) / (2 * tp + fp + fn) / 4.0;
        }
        CHECK(report.macro.f1 == doctest::Approx(macro_f1).epsilon(1e-12));
        CHECK(report.overall_accuracy ==
              static_cast<double>(cm.diagonal()) / static_cast<double>(cm.total()));
    }
}

TEST_CASE("macro metrics are invariant under class relabeling") {
    Rng rng(31);
    const ConfusionMatrix cm = random_cm(5, rng);
    const std::vector<size_t> perm = {3, 0, 4, 1, 2};
    ConfusionMatrix shuffled;
    shuffled.counts.assign(5, std::vector<size_t>(5, 0));
    for (size_t t = 0; t < 5; ++t)
        for (size_t p = 0; p < 5; ++p) shuffled.counts[perm[t]][perm[p]] = cm.counts[t][p];

    const MetricReport a = metrics(cm);
    const MetricReport b = metrics(shuffled);
    CHECK(a.macro.accuracy == doctest::Approx(b.macro.accuracy).epsilon(1e-12));
    CHECK(a.macro.precision == doctest::Approx(b.macro.precision).epsilon(1e-12));
    CHECK(a.macro.recall == doctest::Approx(b.macro.recall).epsilon(1e-12));
    CHECK(a.macro.f1 == doctest::Approx(b.macro.f1).epsilon(1e-12));
    CHECK(a.overall_accuracy == doctest::Approx(b.overall_accuracy).epsilon(1e-12));
    for (size_t c = 0; c < 5; ++c)
        CHECK(a.per_class[c].f1 == doctest::Approx(b.per_class[perm[c]].f1).epsilon(1e-12));
}

TEST_CASE("roc auc endpoints") {
    const std::vector<int> truth = {0, 0, 1, 1, 2};

    SUBCASE("one-hot probabilities separate perfectly") {
        std::vector<std::vector<double>> probs(truth.size(), std::vector<double>(3, 0.0));
        for (size_t i = 0; i < truth.size(); ++i) probs[i][truth[i]] = 1.0;
        const AucReport report = roc_auc(truth, probs, 3);
        for (int c = 0; c < 3; ++c) {
            CHECK(report.defined[c] == 1);
            CHECK(report.per_class[c] == 1.0);
        }
        CHECK(report.macro == 1.0);
    }

    SUBCASE("label-independent scores sit at one half exactly") {
        const std::vector<std::vector<double>> probs(truth.size(),
                                                     std::vector<double>(3, 1.0 / 3.0));
        const AucReport report = roc_auc(truth, probs, 3);
        for (int c = 0; c < 3; ++c) CHECK(report.per_class[c] == 0.5);
        CHECK(report.macro == 0.5);
    }

    SUBCASE("inverted scores reach zero") {
        std::vector<std::vector<double>> probs(truth.size(), std::vector<double>(3, 1.0));
        for (size_t i = 0; i < truth.size(); ++i) probs[i][truth[i]] = 0.0;
        const AucReport report = roc_auc(truth, probs, 3);
        for (int c = 0; c < 3; ++c) CHECK(report.per_class[c] == 0.0);
    }
}

TEST_CASE("roc auc equals the all-pairs concordance oracle") {
    Rng rng(37);
    const int n = 60, n_classes = 3;
    std::vector<int> truth(n);
    std::vector<std::vector<double>> probs(n, std::vector<double>(n_classes));
    for (int i = 0; i < n; ++i) {
        truth[i] = static_cast<int>(rng.next_below(n_classes));
        double sum = 0.0;
        for (auto& p : probs[i]) {
            // Coarse grid of scores so ties actually occur.
            p = static_cast<double>(rng.next_below(8)) / 8.0 + 0.0625;
            sum += p;
        }
        for (auto& p : probs[i]) p /= sum;
    }

    const AucReport report = roc_auc(truth, probs, n_classes);
    for (int c = 0; c < n_classes; ++c) {
        REQUIRE(report.defined[c] == 1);
        CHECK(report.per_class[c] == pair_auc(truth, probs, c));
    }
}

TEST_CASE("roc auc excludes classes with no pairs") {
    const std::vector<int> truth = {0, 0, 1, 1};
    std::vector<std::vector<double>> probs = {
        {0.9, 0.1, 0.0}, {0.8, 0.2, 0.0}, {0.3, 0.7, 0.0}, {0.4, 0.6, 0.0}};
    const AucReport report = roc_auc(truth, probs, 3);
    CHECK(report.defined[0] == 1);
    CHECK(report.defined[1] == 1);
    CHECK(report.defined[2] == 0);
    CHECK(std::isnan(report.per_class[2]));
    CHECK(report.macro == doctest::Approx(1.0).epsilon(1e-12));  // classes 0 and 1 separate

    SUBCASE("single-class truth leaves nothing defined") {
        const AucReport none = roc_auc({1, 1}, {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}}, 3);
        CHECK(none.defined == std::vector<uint8_t>{0, 0, 0});
        CHECK(std::isnan(none.macro));
    }

    SUBCASE("contract violations") {
        CHECK_THROWS_AS(roc_auc({0}, {}, 2), ShapeError);
        CHECK_THROWS_AS(roc_auc({0, 1}, {{0.5, 0.5}, {0.5}}, 2), ShapeError);
        CHECK_THROWS_AS(roc_auc({}, {}, 2), EmptyInputError);
        CHECK_THROWS_AS(roc_auc({0, 2}, {{1.0, 0.0}, {0.0, 1.0}}, 2), ConfigError);
    }
}

TEST_CASE("fold summary statistics recover a reference table's footer") {
    // A 10-fold accuracy table quoted with footer rows whose first two
    // dispersion entries are variances and the third a standard deviation;
    // recomputing from the folds pins down which is which.
    const std::vector<double> cnn = {0.9429, 0.9657, 0.9714, 0.9943, 0.9829,
                                     0.9657, 0.9714, 0.9771, 0.9771, 0.9486};
    const std::vector<double> rf = {0.9714, 0.9600, 0.9771, 0.9771, 0.9829,
                                    0.9771, 0.9543, 0.9657, 0.9714, 0.9486};
    const std::vector<double> ann = {0.9600, 0.9543, 0.9657, 0.9886, 0.9829,
                                     0.9714, 0.9600, 0.9771, 0.9771, 0.9771};

    CHECK(mean_of(cnn) == doctest::Approx(0.9697).epsilon(5e-5));
    CHECK(mean_of(rf) == doctest::Approx(0.9686).epsilon(5e-5));
    CHECK(mean_of(ann) == doctest::Approx(0.9714).epsilon(5e-5));

    auto variance = [](const std::vector<double>& v) {
        const double s = population_std(v);
        return s * s;
    };
    CHECK(variance(cnn) == doctest::Approx(0.0002090).epsilon(1e-3));
    CHECK(variance(rf) == doctest::Approx(0.0001123).epsilon(1e-3));
    CHECK(population_std(ann) == doctest::Approx(0.0105374).epsilon(1e-4));

    CHECK_THROWS_AS(mean_of({}), EmptyInputError);
}

TEST_CASE("kfold_cv partitions, scores, and keeps the best fold's model") {
    const ChipDataset dataset = separable_chips(20, 3, 41);
    ModelSpec spec;
    spec.kind = ModelKind::forest;
    spec.forest.n_estimators = 15;

    const CvResult result = kfold_cv(dataset, spec, 5, 77);
    REQUIRE(result.fold_accuracy.size() == 5);
    for (double acc : result.fold_accuracy) {
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
    CHECK(result.mean_accuracy == doctest::Approx(mean_of(result.fold_accuracy)));
    CHECK(result.std_accuracy == doctest::Approx(population_std(result.fold_accuracy)));
    CHECK(result.mean_accuracy >= 0.9);  // cleanly separable classes

    size_t expect_best = 0;
    for (size_t f = 1; f < result.fold_accuracy.size(); ++f)
        if (result.fold_accuracy[f] > result.fold_accuracy[expect_best]) expect_best = f;
    CHECK(result.best_fold == expect_best);

    const std::vector<int> predicted = predict_labels(result.best_model, dataset);
    size_t hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
        hits += predicted[i] == *dataset.chips[i].label;
    CHECK(static_cast<double>(hits) / static_cast<double>(predicted.size()) >= 0.9);

    SUBCASE("same seed reproduces the fold accuracies") {
        const CvResult again = kfold_cv(dataset, spec, 5, 77);
        CHECK(again.fold_accuracy == result.fold_accuracy);
        CHECK(again.best_fold == result.best_fold);
    }
}

TEST_CASE("kfold_cv constant predictor scores the majority share on every fold") {
    // 60/20/20 labels over 5 folds: each fold holds 12/4/4, so a model locked
    // to class 0 scores exactly 0.6 everywhere.
    ChipDataset dataset = separable_chips(20, 3, 43);
    ChipDataset majority = separable_chips(40, 1, 44);  // 40 more class-0 chips
    for (auto& chip : majority.chips) dataset.chips.push_back(chip);

    ModelSpec spec;
    spec.kind = ModelKind::kmeans;
    spec.kmeans.k = 1;  // one cluster -> majority class everywhere

    const CvResult result = kfold_cv(dataset, spec, 5, 99);
    for (double acc : result.fold_accuracy) CHECK(acc == 0.6);
    CHECK(result.mean_accuracy == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(result.std_accuracy == 0.0);
    CHECK(result.best_fold == 0);  // ties keep the earliest fold
}

TEST_CASE("kfold_cv error contracts") {
    ModelSpec spec;
    spec.kind = ModelKind::forest;
    CHECK_THROWS_AS(kfold_cv(separable_chips(2, 2, 45), spec, 10, 1), InsufficientDataError);

    ChipDataset unlabeled = separable_chips(6, 2, 46);
    unlabeled.chips[3].label.reset();
    CHECK_THROWS_AS(kfold_cv(unlabeled, spec, 3, 1), MissingClassError);
}

TEST_CASE("cv table csv carries fold rows plus mean and std footers") {
    TempDir tmp("eval_cv_csv");
    CvResult a, b;
    a.fold_accuracy = {0.9, 1.0, 0.8, 1.0, 0.95, 0.9, 1.0, 0.85, 0.9, 1.0};
    b.fold_accuracy = {0.5, 0.6, 0.55, 0.5, 0.65, 0.6, 0.5, 0.55, 0.6, 0.5};
    for (CvResult* r : {&a, &b}) {
        r->mean_accuracy = mean_of(r->fold_accuracy);
        r->std_accuracy = population_std(r->fold_accuracy);
    }

    const std::string path = tmp.file("folds.csv");
    write_cv_table_csv(path, {"cnn", "forest"}, {a, b});
    const auto lines = read_lines(path);
    REQUIRE(lines.size() == 13);  // header + 10 folds + mean + std
    CHECK(lines[0] == "fold,cnn,forest");
    CHECK(lines[1] == "1,0.9000,0.5000");
    CHECK(lines[11].substr(0, 5) == "mean,");
    CHECK(lines[12].substr(0, 4) == "std,");

    CHECK_THROWS_AS(write_cv_table_csv(tmp.file("x.csv"), {"one"}, {a, b}), ShapeError);
    CvResult short_result = a;
    short_result.fold_accuracy.pop_back();
    CHECK_THROWS_AS(write_cv_table_csv(tmp.file("y.csv"), {"a", "b"}, {a, short_result}),
                    ShapeError);
}

TEST_CASE("comparison csv lists one row per model") {
    TempDir tmp("eval_cmp_csv");
    MetricReport strong = metrics(cm_of({{10, 0}, {0, 10}}));
    MetricReport weak = metrics(cm_of({{5, 5}, {5, 5}}));
    const std::string path = tmp.file("models.csv");
    write_comparison_csv(path, {"cnn", "kmeans"}, {strong, weak});

    const auto lines = read_lines(path);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "model,accuracy,precision,recall,f1");
    CHECK(lines[1] == "cnn,1.0000,1.0000,1.0000,1.0000");
    CHECK(lines[2] == "kmeans,0.5000,0.5000,0.5000,0.5000");
}

TEST_CASE("confusion csv and heatmap") {
    TempDir tmp("eval_cm_art");
    const ConfusionMatrix cm = cm_of({{4, 0}, {0, 2}});
    ClassScheme scheme;
    scheme.classes = {{0, "water", {0, 0, 255}}, {1, "land", {0, 255, 0}}};

    const std::string csv_path = tmp.file("cm.csv");
    write_confusion_csv(csv_path, cm, scheme);
    const auto lines = read_lines(csv_path);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "true\\pred,water,land");
    CHECK(lines[1] == "water,4,0");
    CHECK(lines[2] == "land,0,2");
    CHECK_THROWS_AS(write_confusion_csv(tmp.file("bad.csv"), cm, ClassScheme::lulc7()),
                    ShapeError);

    const std::string png_path = tmp.file("cm.png");
    render_confusion_png(png_path, cm);
    const RgbImage img = parse_rgb_png(png_path);
    CHECK(img.width == 51);  // 2 cells of 24px + 3 grid lines
    CHECK(img.height == 51);
    CHECK(img.at(0, 0) == std::array<uint8_t, 3>{0, 0, 0});        // grid line
    CHECK(img.at(13, 13) == std::array<uint8_t, 3>{8, 48, 107});   // max count cell
    CHECK(img.at(38, 13) == std::array<uint8_t, 3>{255, 255, 255});  // zero cell
    CHECK(img.at(38, 38) == std::array<uint8_t, 3>{132, 152, 181});  // half intensity

    const std::string again = tmp.file("cm2.png");
    render_confusion_png(again, cm);
    CHECK(slurp(png_path) == slurp(again));
}

TEST_CASE("learning curve artifacts") {
    TempDir tmp("eval_curve");
    LearningCurve curve;
    curve.train_loss = {1.2, 0.7, 0.4};
    curve.val_loss = {1.1, 0.8, 0.6};
    curve.train_accuracy = {0.4, 0.7, 0.9};
    curve.val_accuracy = {0.5, 0.75, 0.85};
    curve.best_epoch = 3;
    curve.epochs_run = 3;

    const std::string csv_path = tmp.file("curve.csv");
    write_curve_csv(csv_path, curve);
    const auto lines = read_lines(csv_path);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "epoch,train_loss,train_accuracy,val_loss,val_accuracy");
    CHECK(lines[1] == "1,1.2,0.4,1.1,0.5");

    const std::string png_path = tmp.file("curve.png");
    render_curve_png(png_path, curve);
    const RgbImage img = parse_rgb_png(png_path);
    CHECK(img.width == 640);
    CHECK(img.height == 400);
    const std::string again = tmp.file("curve2.png");
    render_curve_png(again, curve);
    CHECK(slurp(png_path) == slurp(again));

    LearningCurve ragged = curve;
    ragged.val_accuracy.pop_back();
    CHECK_THROWS_AS(write_curve_csv(tmp.file("bad.csv"), ragged), ShapeError);
    CHECK_THROWS_AS(render_curve_png(tmp.file("bad.png"), ragged), ShapeError);
    CHECK_THROWS_AS(render_curve_png(tmp.file("empty.png"), LearningCurve{}),
                    EmptyInputError);
}

TEST_CASE("sample size sweep trains, scores, and renders per size") {
    TempDir tmp("eval_sweep");
    // Three vertical stripes with disjoint spectra: every split is separable.
    const int width = 18, height = 18;
    std::vector<double> b0(width * height), b1(width * height);
    std::vector<LabeledPoint> points;
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            const int cls = col / 6;
            b0[row * width + col] = cls == 0 ? 10.0 : (cls == 1 ? 0.0 : 10.0);
            b1[row * width + col] = cls == 0 ? 0.0 : (cls == 1 ? 10.0 : 10.0);
            points.push_back({col, row, cls, 2019, "fixture"});
        }
    }
    const Raster raster(width, height,
                        {{"red", std::nullopt, b0}, {"nir", std::nullopt, b1}},
                        std::vector<uint8_t>(width * height, 1), GeoRef{});
    const ClassScheme scheme = [] {
        ClassScheme s;
        s.classes = {{0, "urban", {170, 40, 40}},
                     {1, "grass", {145, 207, 96}},
                     {2, "water", {43, 131, 186}}};
        return s;
    }();

    ModelSpec spec;
    spec.kind = ModelKind::forest;
    spec.forest.n_estimators = 15;
    SweepOptions options;
    options.sizes = {30, 60};
    options.chip_size = 1;
    options.year = 2019;

    const SweepResult sweep =
        sample_size_sweep(raster, points, scheme, spec, options, tmp.file("run1"), 7);
    REQUIRE(sweep.rows.size() == 2);
    CHECK(sweep.rows[0].sample_size == 30);
    CHECK(sweep.rows[1].sample_size == 60);
    for (const auto& row : sweep.rows) {
        CHECK(row.accuracy == 1.0);
        CHECK(row.precision == 1.0);
        CHECK(row.recall == 1.0);
        CHECK(row.f1 == 1.0);
        CHECK(looks_like_png(row.map_path));
        CHECK(std::filesystem::exists(row.map_path + ".legend.csv"));
    }
    CHECK(sweep.warnings.empty());

    const std::string csv_path = tmp.file("sweep.csv");
    write_sweep_csv(csv_path, sweep);
    const auto lines = read_lines(csv_path);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "sample size,accuracy,precision,recall,f1,map");
    CHECK(lines[1].substr(0, 31) == "30,1.0000,1.0000,1.0000,1.0000,");

    SUBCASE("same seed, fresh directory: identical metrics and map bytes") {
        const SweepResult again =
            sample_size_sweep(raster, points, scheme, spec, options, tmp.file("run2"), 7);
        REQUIRE(again.rows.size() == sweep.rows.size());
        for (size_t i = 0; i < sweep.rows.size(); ++i) {
            CHECK(again.rows[i].accuracy == sweep.rows[i].accuracy);
            CHECK(slurp(again.rows[i].map_path) == slurp(sweep.rows[i].map_path));
        }
    }

    SUBCASE("underfull class is upsampled with a warning") {
        std::vector<LabeledPoint> sparse;
        int kept = 0;
        for (const auto& p : points) {
            if (p.class_id == 2 && ++kept > 15) continue;  // class 2 capped at 15
            sparse.push_back(p);
        }
        SweepOptions one;
        one.sizes = {60};  // wants 20 per class
        one.chip_size = 1;
        one.year = 2019;
        const SweepResult result =
            sample_size_sweep(raster, sparse, scheme, spec, one, tmp.file("run3"), 7);
        REQUIRE(result.rows.size() == 1);
        CHECK(!result.warnings.empty());
        CHECK(result.warnings.front().find("size 60") == 0);
    }

    SUBCASE("strict policy surfaces missing data") {
        std::vector<LabeledPoint> sparse(points.begin(), points.begin() + 18);
        SweepOptions strict = options;
        strict.underfull = UnderfullPolicy::error;
        CHECK_THROWS_AS(
            sample_size_sweep(raster, sparse, scheme, spec, strict, tmp.file("run4"), 7),
            InsufficientDataError);
    }

    SUBCASE("sizes must split evenly over the classes") {
        SweepOptions odd = options;
        odd.sizes = {31};
        CHECK_THROWS_AS(
            sample_size_sweep(raster, points, scheme, spec, odd, tmp.file("run5"), 7),
            ConfigError);
    }
}

}  // TEST_SUITE
