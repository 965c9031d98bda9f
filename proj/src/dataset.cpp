#include "landkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "landkit/errors.hpp"
#include "landkit/rng.hpp"
#include "wire.hpp"

namespace landkit {

namespace {

constexpr char kChipsetMagic[4] = {'L', 'K', 'C', '1'};
constexpr const char* kChipsetWhat = "chip set";

int clamp_int(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

LabeledPoint point_from_lonlat(double lon, double lat, int class_id, int year,
                               const Raster& raster, const std::string& source,
                               const std::string& where) {
    auto [col, row] = raster.geo().nearest_pixel(lon, lat);
    if (col < 0 || row < 0 || col >= raster.width() || row >= raster.height())
        throw BoundsError(where + ": point (" + std::to_string(lon) + ", " +
                          std::to_string(lat) + ") falls outside the raster");
    return LabeledPoint{col, row, class_id, year, source};
}

}  // namespace

ClassScheme ClassScheme::lulc7() {
    return ClassScheme{{
        {0, "Urban Areas", {170, 40, 40}},
        {1, "Grass/Agricultural Land", {145, 207, 96}},
        {2, "Forest", {27, 120, 55}},
        {3, "Bare Soil", {224, 190, 120}},
        {4, "Water Bodies", {43, 131, 186}},
        {5, "Coastal Areas", {171, 221, 227}},
        {6, "Wetland", {118, 106, 175}},
    }};
}

const ClassDef& ClassScheme::class_by_id(int id) const {
    for (const auto& c : classes)
        if (c.id == id) return c;
    throw ConfigError("no class with id " + std::to_string(id));
}

int ClassScheme::id_of(const std::string& name) const {
    for (const auto& c : classes)
        if (c.name == name) return c.id;
    return -1;
}

void ClassScheme::validate() const {
    if (classes.empty()) throw ConfigError("class scheme is empty");
    for (size_t i = 0; i < classes.size(); ++i)
        if (classes[i].id != static_cast<int>(i))
            throw ConfigError("class ids must run 0..n-1 in order");
    std::vector<std::string> names;
    for (const auto& c : classes) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
        throw ConfigError("class names must be unique");
}

Chip extract_chip(const Raster& raster, std::pair<int, int> center,
                  int chip_size) {
    if (chip_size < 1 || chip_size % 2 == 0)
        throw ConfigError("chip size must be odd and positive");
    const auto [ccol, crow] = center;
    if (ccol < 0 || crow < 0 || ccol >= raster.width() ||
        crow >= raster.height())
        throw BoundsError("chip center outside the raster");

    const int half = chip_size / 2;
    const int channels = raster.band_count();
    const bool center_valid = raster.valid_at(ccol, crow);
    const size_t center_idx =
        static_cast<size_t>(crow) * raster.width() + ccol;

    Chip chip;
    chip.chip_size = chip_size;
    chip.channels = channels;
    chip.center = center;
    chip.window.resize(static_cast<size_t>(chip_size) * chip_size * channels);

    size_t out = 0;
    for (int dy = -half; dy <= half; ++dy) {
        const int row = clamp_int(crow + dy, 0, raster.height() - 1);
        for (int dx = -half; dx <= half; ++dx) {
            const int col = clamp_int(ccol + dx, 0, raster.width() - 1);
            size_t src = static_cast<size_t>(row) * raster.width() + col;
            if (!raster.mask()[src]) {
                // Masked neighbor: fall back to the center pixel so the window
                // carries observed data everywhere (NaN if even that is masked).
                src = center_idx;
                if (!center_valid) {
                    for (int c = 0; c < channels; ++c)
                        chip.window[out++] =
                            std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
            }
            for (int c = 0; c < channels; ++c)
                chip.window[out++] = raster.band(c).values[src];
        }
    }
    return chip;
}

size_t for_each_chip(const Raster& raster, int chip_size,
                     const std::function<void(const Chip&)>& fn) {
    size_t count = 0;
    for (int row = 0; row < raster.height(); ++row)
        for (int col = 0; col < raster.width(); ++col) {
            fn(extract_chip(raster, {col, row}, chip_size));
            ++count;
        }
    return count;
}

LabeledSplit build_labeled_set(const Raster& raster,
                               const std::vector<LabeledPoint>& points,
                               const ClassScheme& scheme,
                               const SplitOptions& options, uint64_t seed) {
    scheme.validate();
    if (options.per_class_train < 1 || options.per_class_test < 1)
        throw ConfigError("per-class train/test counts must be positive");

    // Deduplicate by pixel; one pixel carrying two different classes is a
    // labeling bug the caller has to resolve.
    std::map<std::pair<int, int>, LabeledPoint> by_pixel;
    for (const auto& p : points) {
        if (p.col < 0 || p.row < 0 || p.col >= raster.width() ||
            p.row >= raster.height())
            throw BoundsError("labeled point (" + std::to_string(p.col) + ", " +
                              std::to_string(p.row) + ") outside the raster");
        if (p.class_id < 0 || p.class_id >= static_cast<int>(scheme.size()))
            throw ConfigError("labeled point has unknown class id " +
                              std::to_string(p.class_id));
        auto [it, inserted] = by_pixel.emplace(std::make_pair(p.col, p.row), p);
        if (!inserted && it->second.class_id != p.class_id)
            throw ConflictError(
                "pixel (" + std::to_string(p.col) + ", " +
                std::to_string(p.row) + ") labeled both '" +
                scheme.class_by_id(it->second.class_id).name + "' and '" +
                scheme.class_by_id(p.class_id).name + "'");
    }

    std::vector<std::vector<LabeledPoint>> per_class(scheme.size());
    for (const auto& [pixel, p] : by_pixel)
        per_class[static_cast<size_t>(p.class_id)].push_back(p);

    LabeledSplit out;
    out.train.split_tag = "train";
    out.test.split_tag = "test";
    const int need = options.per_class_train + options.per_class_test;
    const double train_share =
        static_cast<double>(options.per_class_train) / need;
    std::vector<int> underfull_classes;

    for (const auto& cls : scheme.classes) {
        auto& pool = per_class[static_cast<size_t>(cls.id)];
        if (pool.empty())
            throw MissingClassError("class '" + cls.name + "' has no points");

        Rng rng(derive_seed(seed, "split", static_cast<uint64_t>(cls.id)));
        rng.shuffle(pool);

        int n_train = options.per_class_train;
        int n_test = options.per_class_test;
        const int n = static_cast<int>(pool.size());
        if (n < need) {
            if (options.underfull == UnderfullPolicy::error)
                throw InsufficientDataError(
                    "class '" + cls.name + "' has " + std::to_string(n) +
                    " points, needs " + std::to_string(need));
            n_train = static_cast<int>(std::llround(n * train_share));
            if (n >= 2) n_train = clamp_int(n_train, 1, n - 1);
            n_test = n - n_train;
            out.warnings.push_back(
                "class '" + cls.name + "' has " + std::to_string(n) +
                " points for " + std::to_string(need) + " requested; split " +
                std::to_string(n_train) + "/" + std::to_string(n_test) +
                (options.underfull == UnderfullPolicy::upsample
                     ? ", up-sampled to target"
                     : ""));
            underfull_classes.push_back(cls.id);
        }

        for (int i = 0; i < n_train; ++i) {
            Chip chip = extract_chip(raster, {pool[i].col, pool[i].row},
                                     options.chip_size);
            chip.label = cls.id;
            out.train.chips.push_back(std::move(chip));
        }
        for (int i = n_train; i < n_train + n_test; ++i) {
            Chip chip = extract_chip(raster, {pool[i].col, pool[i].row},
                                     options.chip_size);
            chip.label = cls.id;
            out.test.chips.push_back(std::move(chip));
        }
    }

    if (options.underfull == UnderfullPolicy::upsample) {
        for (int cid : underfull_classes) {
            out.train = upsample_class(
                out.train, cid, static_cast<size_t>(options.per_class_train),
                derive_seed(seed, "upsample-train", static_cast<uint64_t>(cid)));
            out.test = upsample_class(
                out.test, cid, static_cast<size_t>(options.per_class_test),
                derive_seed(seed, "upsample-test", static_cast<uint64_t>(cid)));
        }
    }
    return out;
}

ChipDataset upsample_class(const ChipDataset& dataset, int class_id,
                           size_t target_count, uint64_t seed) {
    std::vector<size_t> members;
    for (size_t i = 0; i < dataset.chips.size(); ++i)
        if (dataset.chips[i].label && *dataset.chips[i].label == class_id)
            members.push_back(i);
    if (members.empty())
        throw MissingClassError("class " + std::to_string(class_id) +
                                " absent from dataset");
    ChipDataset out = dataset;
    if (members.size() >= target_count) return out;

    Rng rng(seed);
    for (size_t k = members.size(); k < target_count; ++k) {
        size_t pick = members[rng.next_below(members.size())];
        out.chips.push_back(dataset.chips[pick]);
    }
    return out;
}

std::pair<ChipDataset, NormalizationStats> normalize(
    const ChipDataset& dataset) {
    if (dataset.chips.empty())
        throw EmptyInputError("cannot normalize an empty chip set");
    const int channels = dataset.channels();
    const int chip_size = dataset.chip_size();
    for (const auto& c : dataset.chips)
        if (c.channels != channels || c.chip_size != chip_size)
            throw ShapeError("chips in one dataset must share a shape");

    const size_t positions = static_cast<size_t>(chip_size) * chip_size;
    const double count =
        static_cast<double>(dataset.chips.size()) * positions;

    NormalizationStats stats;
    stats.mean.assign(channels, 0.0);
    stats.stddev.assign(channels, 0.0);
    for (const auto& chip : dataset.chips)
        for (size_t p = 0; p < positions; ++p)
            for (int c = 0; c < channels; ++c)
                stats.mean[c] += chip.window[p * channels + c];
    for (auto& m : stats.mean) m /= count;
    for (const auto& chip : dataset.chips)
        for (size_t p = 0; p < positions; ++p)
            for (int c = 0; c < channels; ++c) {
                const double d = chip.window[p * channels + c] - stats.mean[c];
                stats.stddev[c] += d * d;
            }
    for (auto& s : stats.stddev) {
        s = std::sqrt(std::max(s / count, 0.0));
        if (s == 0.0) s = 1.0;
    }
    return {apply_normalization(dataset, stats), stats};
}

ChipDataset apply_normalization(const ChipDataset& dataset,
                                const NormalizationStats& stats) {
    if (dataset.chips.empty())
        throw EmptyInputError("cannot normalize an empty chip set");
    const int channels = dataset.channels();
    if (static_cast<int>(stats.mean.size()) != channels ||
        static_cast<int>(stats.stddev.size()) != channels)
        throw ShapeError("normalization stats do not match channel count");

    ChipDataset out = dataset;
    out.normalization = stats;
    for (auto& chip : out.chips) {
        const size_t positions =
            static_cast<size_t>(chip.chip_size) * chip.chip_size;
        for (size_t p = 0; p < positions; ++p)
            for (int c = 0; c < channels; ++c) {
                double& v = chip.window[p * channels + c];
                v = (v - stats.mean[c]) / stats.stddev[c];
            }
    }
    return out;
}

int minimum_sample_size(int n_inputs, int n_classes) {
    if (n_inputs < 1 || n_classes < 1)
        throw ConfigError("sample-size rule needs positive input/class counts");
    return 10 * n_inputs * n_classes;
}

int cochran_sample_size(size_t population, double z, double margin, double p) {
    if (population < 1) throw ConfigError("population must be positive");
    if (z <= 0.0 || margin <= 0.0 || margin >= 1.0 || p <= 0.0 || p >= 1.0)
        throw ConfigError("invalid Cochran parameters");
    const double n0 = z * z * p * (1.0 - p) / (margin * margin);
    const double n = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(population));
    return static_cast<int>(std::ceil(n - 1e-9));
}

std::vector<int> sweep_sample_sizes() { return {490, 700, 1050, 1400, 1750}; }

std::vector<std::vector<size_t>> stratified_fold_indices(
    const std::vector<int>& labels, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("need at least 2 folds");
    if (labels.size() < static_cast<size_t>(k))
        throw InsufficientDataError("fewer samples than folds");

    int n_classes = 0;
    for (int l : labels) {
        if (l < 0) throw ConfigError("negative class label");
        n_classes = std::max(n_classes, l + 1);
    }
    std::vector<std::vector<size_t>> by_class(
        static_cast<size_t>(n_classes));
    for (size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<size_t>(labels[i])].push_back(i);

    // Deal each class round-robin, carrying the fold cursor across classes so
    // total fold sizes also stay within 1 of each other.
    std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
    size_t cursor = 0;
    for (int c = 0; c < n_classes; ++c) {
        auto& members = by_class[static_cast<size_t>(c)];
        Rng rng(derive_seed(seed, "fold", static_cast<uint64_t>(c)));
        rng.shuffle(members);
        for (size_t idx : members)
            folds[cursor++ % static_cast<size_t>(k)].push_back(idx);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

std::vector<std::vector<double>> flatten_chips(const ChipDataset& dataset) {
    std::vector<std::vector<double>> rows;
    rows.reserve(dataset.chips.size());
    for (const auto& chip : dataset.chips) rows.push_back(chip.window);
    return rows;
}

std::vector<int> labels_of(const ChipDataset& dataset) {
    std::vector<int> labels;
    labels.reserve(dataset.chips.size());
    for (const auto& chip : dataset.chips) {
        if (!chip.label)
            throw MissingClassError("chip without a label in a labeled op");
        labels.push_back(*chip.label);
    }
    return labels;
}

std::vector<LabeledPoint> load_label_csv(const std::string& path,
                                         const ClassScheme& scheme,
                                         const Raster& raster) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(is, line)) throw FormatError("'" + path + "' is empty");
    auto header = split_csv_line(line);
    auto col_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw FormatError("'" + path + "' lacks required column '" + name +
                              "'");
        return static_cast<size_t>(it - header.begin());
    };
    const size_t i_lon = col_of("lon"), i_lat = col_of("lat");
    const size_t i_class = col_of("class_name"), i_year = col_of("year");

    std::vector<LabeledPoint> points;
    size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (fields.size() <= std::max({i_lon, i_lat, i_class, i_year}))
            throw FormatError(where + ": too few columns");
        double lon, lat;
        int year;
        try {
            lon = std::stod(fields[i_lon]);
            lat = std::stod(fields[i_lat]);
            year = std::stoi(fields[i_year]);
        } catch (const std::exception&) {
            throw FormatError(where + ": malformed numeric field");
        }
        const int class_id = scheme.id_of(fields[i_class]);
        if (class_id < 0)
            throw ConfigError(where + ": unknown class '" + fields[i_class] +
                              "'");
        points.push_back(
            point_from_lonlat(lon, lat, class_id, year, raster, where, where));
    }
    return points;
}

std::vector<LabeledPoint> load_label_geojson(const std::string& path,
                                             const ClassScheme& scheme,
                                             const Raster& raster) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + path + "' is not valid JSON: " + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array())
        throw FormatError("'" + path + "' is not a GeoJSON FeatureCollection");

    std::vector<LabeledPoint> points;
    size_t index = 0;
    for (const auto& feature : doc["features"]) {
        const std::string where =
            path + " feature " + std::to_string(index++);
        const auto& geom = feature.value("geometry", nlohmann::json());
        if (geom.value("type", "") != "Point" || !geom.contains("coordinates") ||
            !geom["coordinates"].is_array() || geom["coordinates"].size() < 2)
            throw FormatError(where + ": expected a Point geometry");
        const auto& props = feature.value("properties", nlohmann::json());
        std::string class_name;
        if (props.contains("class_name") && props["class_name"].is_string())
            class_name = props["class_name"].get<std::string>();
        else if (props.contains("class") && props["class"].is_string())
            class_name = props["class"].get<std::string>();
        else
            throw FormatError(where + ": missing class_name property");
        if (!props.contains("year") || !props["year"].is_number_integer())
            throw FormatError(where + ": missing integer year property");

        const int class_id = scheme.id_of(class_name);
        if (class_id < 0)
            throw ConfigError(where + ": unknown class '" + class_name + "'");
        points.push_back(point_from_lonlat(
            geom["coordinates"][0].get<double>(),
            geom["coordinates"][1].get<double>(), class_id,
            props["year"].get<int>(), raster, where, where));
    }
    return points;
}

void save_chipset(const std::string& path, const ChipDataset& dataset) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");

    os.write(kChipsetMagic, 4);
    wire::put_u32(os, static_cast<uint32_t>(dataset.chips.size()));
    wire::put_u16(os, static_cast<uint16_t>(dataset.chip_size()));
    wire::put_u16(os, static_cast<uint16_t>(dataset.channels()));
    wire::put_string(os, dataset.split_tag);
    wire::put_u8(os, dataset.normalization ? 1 : 0);
    if (dataset.normalization) {
        for (double m : dataset.normalization->mean) wire::put_f64(os, m);
        for (double s : dataset.normalization->stddev) wire::put_f64(os, s);
    }
    for (const auto& chip : dataset.chips) {
        wire::put_u32(os, static_cast<uint32_t>(chip.center.first));
        wire::put_u32(os, static_cast<uint32_t>(chip.center.second));
        wire::put_u8(os, chip.label ? 1 : 0);
        wire::put_u32(os,
                      static_cast<uint32_t>(chip.label ? *chip.label : 0));
        for (double v : chip.window) wire::put_f64(os, v);
    }
    if (!os) throw IoError("failed writing '" + path + "'");
}

ChipDataset load_chipset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");

    char magic[4];
    if (!is.read(magic, 4)) throw IoError("chip set truncated");
    if (std::memcmp(magic, kChipsetMagic, 4) != 0)
        throw FormatError("'" + path + "' is not a chip set (bad magic)");

    const uint32_t count = wire::get_u32(is, kChipsetWhat);
    const uint16_t chip_size = wire::get_u16(is, kChipsetWhat);
    const uint16_t channels = wire::get_u16(is, kChipsetWhat);

    ChipDataset out;
    out.split_tag = wire::get_string(is, kChipsetWhat);
    if (wire::get_u8(is, kChipsetWhat)) {
        NormalizationStats stats;
        stats.mean.resize(channels);
        stats.stddev.resize(channels);
        for (auto& m : stats.mean) m = wire::get_f64(is, kChipsetWhat);
        for (auto& s : stats.stddev) s = wire::get_f64(is, kChipsetWhat);
        out.normalization = std::move(stats);
    }
    const size_t window = static_cast<size_t>(chip_size) * chip_size * channels;
    out.chips.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        Chip chip;
        chip.chip_size = chip_size;
        chip.channels = channels;
        chip.center.first = static_cast<int>(wire::get_u32(is, kChipsetWhat));
        chip.center.second = static_cast<int>(wire::get_u32(is, kChipsetWhat));
        const bool has_label = wire::get_u8(is, kChipsetWhat) != 0;
        const uint32_t label = wire::get_u32(is, kChipsetWhat);
        if (has_label) chip.label = static_cast<int>(label);
        chip.window.resize(window);
        for (auto& v : chip.window) v = wire::get_f64(is, kChipsetWhat);
        out.chips.push_back(std::move(chip));
    }
    return out;
}

}  // namespace landkit
