#include "landkit/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "landkit/errors.hpp"
#include "landkit/indices.hpp"

namespace landkit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(const std::string& file, const std::string& field,
                       const std::string& what) {
    throw ConfigError(file + ": " + (field.empty() ? "config" : field) + ": " +
                      what);
}

// One JSON value plus where it sits, so every type error can name its field.
struct Cursor {
    const json* value;
    std::string file;
    std::string path;

    [[noreturn]] void fail(const std::string& what) const {
        landkit::fail(file, path, what);
    }

    std::string child_path(const std::string& key) const {
        return path.empty() ? key : path + "." + key;
    }

    Cursor child(const std::string& key) const {
        return {&value->at(key), file, child_path(key)};
    }

    Cursor item(size_t i) const {
        return {&(*value)[i], file, path + "[" + std::to_string(i) + "]"};
    }

    bool has(const std::string& key) const {
        return value->is_object() && value->contains(key);
    }

    // Rejects keys outside `allowed` so typos fail loudly instead of being
    // silently ignored.
    void expect_object(const std::set<std::string>& allowed) const {
        if (!value->is_object()) fail("expected an object");
        for (const auto& [key, unused] : value->items())
            if (!allowed.count(key))
                landkit::fail(file, child_path(key), "unknown field");
    }

    void expect_array() const {
        if (!value->is_array()) fail("expected an array");
    }
    size_t size() const { return value->size(); }

    std::string as_string() const {
        if (!value->is_string()) fail("expected a string");
        return value->get<std::string>();
    }

    int as_int() const {
        if (!value->is_number_integer()) fail("expected an integer");
        const auto v = value->get<int64_t>();
        if (v < INT32_MIN || v > INT32_MAX) fail("integer out of range");
        return static_cast<int>(v);
    }

    uint64_t as_u64() const {
        if (!value->is_number_integer()) fail("expected a non-negative integer");
        if (!value->is_number_unsigned() && value->get<int64_t>() < 0)
            fail("expected a non-negative integer");
        return value->get<uint64_t>();
    }

    double as_double() const {
        if (!value->is_number()) fail("expected a number");
        return value->get<double>();
    }
};

// get<T>(cursor, key, default) / require variants -----------------------------

std::string require_string(const Cursor& c, const std::string& key) {
    if (!c.has(key)) landkit::fail(c.file, c.child_path(key), "field is required");
    return c.child(key).as_string();
}

int opt_int(const Cursor& c, const std::string& key, int fallback) {
    return c.has(key) ? c.child(key).as_int() : fallback;
}

double opt_double(const Cursor& c, const std::string& key, double fallback) {
    return c.has(key) ? c.child(key).as_double() : fallback;
}

std::string opt_string(const Cursor& c, const std::string& key,
                       const std::string& fallback) {
    return c.has(key) ? c.child(key).as_string() : fallback;
}

std::vector<int> int_array(const Cursor& c) {
    c.expect_array();
    std::vector<int> out;
    for (size_t i = 0; i < c.size(); ++i) out.push_back(c.item(i).as_int());
    return out;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

ClassScheme parse_scheme(const Cursor& c) {
    c.expect_array();
    ClassScheme scheme;
    for (size_t i = 0; i < c.size(); ++i) {
        const Cursor entry = c.item(i);
        entry.expect_object({"id", "name", "color"});
        ClassDef def;
        def.id = entry.child("id").as_int();
        def.name = require_string(entry, "name");
        if (entry.has("color")) {
            const Cursor color = entry.child("color");
            color.expect_array();
            if (color.size() != 3) color.fail("expected [r, g, b]");
            for (size_t k = 0; k < 3; ++k) {
                const int v = color.item(k).as_int();
                if (v < 0 || v > 255) color.item(k).fail("expected 0..255");
                def.color[k] = static_cast<uint8_t>(v);
            }
        }
        scheme.classes.push_back(std::move(def));
    }
    try {
        scheme.validate();
    } catch (const ConfigError& e) {
        c.fail(e.what());
    }
    return scheme;
}

UnderfullPolicy parse_underfull(const Cursor& c) {
    const std::string name = c.as_string();
    if (name == "error") return UnderfullPolicy::error;
    if (name == "warn") return UnderfullPolicy::warn;
    if (name == "upsample") return UnderfullPolicy::upsample;
    c.fail("expected \"error\", \"warn\" or \"upsample\"");
}

ModelKind parse_kind(const Cursor& c) {
    try {
        return model_kind_from_string(c.as_string());
    } catch (const ConfigError& e) {
        c.fail(e.what());
    }
}

void parse_model(const Cursor& c, PipelineConfig& config) {
    c.expect_object({"kind", "chip_size", "per_class_train", "per_class_test",
                     "underfull", "folds", "kmeans", "forest", "mlp_hidden",
                     "cnn_channels", "train"});
    if (c.has("kind")) {
        const Cursor kind = c.child("kind");
        if (kind.as_string() == "all")
            config.train_all = true;
        else
            config.model.kind = parse_kind(kind);
    }
    config.chip_size = opt_int(c, "chip_size", config.chip_size);
    config.per_class_train = opt_int(c, "per_class_train", config.per_class_train);
    config.per_class_test = opt_int(c, "per_class_test", config.per_class_test);
    if (c.has("underfull"))
        config.underfull = parse_underfull(c.child("underfull"));
    config.cv_folds = opt_int(c, "folds", config.cv_folds);

    if (c.has("kmeans")) {
        const Cursor k = c.child("kmeans");
        k.expect_object({"k", "max_iters", "tol"});
        config.model.kmeans.k = opt_int(k, "k", config.model.kmeans.k);
        config.model.kmeans.max_iters =
            opt_int(k, "max_iters", config.model.kmeans.max_iters);
        config.model.kmeans.tol = opt_double(k, "tol", config.model.kmeans.tol);
    }
    if (c.has("forest")) {
        const Cursor f = c.child("forest");
        f.expect_object({"n_estimators", "max_depth", "max_features",
                         "min_samples_leaf", "min_samples_split"});
        ForestParams& p = config.model.forest;
        p.n_estimators = opt_int(f, "n_estimators", p.n_estimators);
        p.max_depth = opt_int(f, "max_depth", p.max_depth);
        p.max_features = opt_int(f, "max_features", p.max_features);
        p.min_samples_leaf = opt_int(f, "min_samples_leaf", p.min_samples_leaf);
        p.min_samples_split = opt_int(f, "min_samples_split", p.min_samples_split);
    }
    config.model.mlp_hidden = opt_int(c, "mlp_hidden", config.model.mlp_hidden);
    if (c.has("cnn_channels")) {
        config.model.cnn_channels = int_array(c.child("cnn_channels"));
        if (config.model.cnn_channels.empty())
            c.child("cnn_channels").fail("expected at least one layer width");
    }
    if (c.has("train")) {
        const Cursor t = c.child("train");
        t.expect_object({"learning_rate", "beta1", "beta2", "epsilon",
                         "max_epochs", "batch_size", "patience", "val_fraction"});
        TrainConfig& tc = config.model.train;
        tc.learning_rate = opt_double(t, "learning_rate", tc.learning_rate);
        tc.beta1 = opt_double(t, "beta1", tc.beta1);
        tc.beta2 = opt_double(t, "beta2", tc.beta2);
        tc.epsilon = opt_double(t, "epsilon", tc.epsilon);
        tc.max_epochs = opt_int(t, "max_epochs", tc.max_epochs);
        tc.batch_size = opt_int(t, "batch_size", tc.batch_size);
        tc.patience = opt_int(t, "patience", tc.patience);
        tc.val_fraction = opt_double(t, "val_fraction", tc.val_fraction);
        try {
            tc.validate();
        } catch (const ConfigError& e) {
            t.fail(e.what());
        }
    }
}

std::vector<CompositeRef> parse_composite_refs(const Cursor& c,
                                               const std::string& base_dir) {
    c.expect_array();
    std::vector<CompositeRef> out;
    for (size_t i = 0; i < c.size(); ++i) {
        const Cursor entry = c.item(i);
        entry.expect_object({"year", "path"});
        CompositeRef ref;
        if (!entry.has("year"))
            landkit::fail(entry.file, entry.child_path("year"), "field is required");
        ref.year = entry.child("year").as_int();
        ref.path = resolve(base_dir, require_string(entry, "path"));
        out.push_back(std::move(ref));
    }
    return out;
}

void parse_synth(const Cursor& c, SynthParams& p) {
    c.expect_object({"width", "height", "years", "first_year", "scenes_per_year",
                     "labels_per_class", "rare_class", "rare_count",
                     "cloud_fraction", "noise_sigma", "urban_radius",
                     "urban_growth"});
    p.width = opt_int(c, "width", p.width);
    p.height = opt_int(c, "height", p.height);
    p.years = opt_int(c, "years", p.years);
    p.first_year = opt_int(c, "first_year", p.first_year);
    p.scenes_per_year = opt_int(c, "scenes_per_year", p.scenes_per_year);
    p.labels_per_class = opt_int(c, "labels_per_class", p.labels_per_class);
    p.rare_class = opt_string(c, "rare_class", p.rare_class);
    p.rare_count = opt_int(c, "rare_count", p.rare_count);
    p.cloud_fraction = opt_double(c, "cloud_fraction", p.cloud_fraction);
    p.noise_sigma = opt_double(c, "noise_sigma", p.noise_sigma);
    p.urban_radius = opt_double(c, "urban_radius", p.urban_radius);
    p.urban_growth = opt_double(c, "urban_growth", p.urban_growth);
}

void require_input_file(const PipelineConfig& config, const std::string& field,
                        const std::string& path) {
    if (path.empty()) fail(config.path, field, "field is required");
    if (!fs::exists(path))
        fail(config.path, field, "file not found: " + path);
}

void check_positive(const PipelineConfig& config, const std::string& field,
                    int value) {
    if (value <= 0)
        fail(config.path, field, "expected a positive value, got " +
                                     std::to_string(value));
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& text,
                                     const std::string& name,
                                     const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(text, nullptr, /*allow_exceptions=*/true,
                          /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(name + ": not valid JSON: " + e.what());
    }

    const Cursor root{&doc, name, ""};
    root.expect_object({"version", "seed", "output_dir", "scheme", "bands",
                        "indices", "qa", "scenes", "composites", "labels",
                        "train_year", "model", "classify", "change", "sweep",
                        "synth", "threads"});

    PipelineConfig config;
    config.path = name;
    config.scheme = ClassScheme::lulc7();
    config.indices = {"ndvi", "mndwi", "ndbi"};

    if (!root.has("version"))
        fail(name, "version", "field is required");
    config.version = root.child("version").as_int();
    if (config.version != 1)
        root.child("version").fail("unsupported schema version " +
                                   std::to_string(config.version) +
                                   " (this build reads version 1)");

    // The seed is deliberately mandatory: a wall-clock default would make
    // every artifact unreproducible.
    if (!root.has("seed")) fail(name, "seed", "field is required");
    config.seed = root.child("seed").as_u64();

    config.output_dir =
        resolve(base_dir, require_string(root, "output_dir"));

    if (root.has("scheme")) config.scheme = parse_scheme(root.child("scheme"));

    if (root.has("bands")) {
        const Cursor bands = root.child("bands");
        if (!bands.value->is_object()) bands.fail("expected an object");
        for (const auto& [canonical, source] : bands.value->items()) {
            if (!source.is_string())
                landkit::fail(name, bands.child_path(canonical),
                              "expected a string band name");
            config.band_map.emplace_back(canonical, source.get<std::string>());
        }
    }

    if (root.has("indices")) {
        const Cursor idx = root.child("indices");
        idx.expect_array();
        config.indices.clear();
        for (size_t i = 0; i < idx.size(); ++i) {
            const std::string recipe = idx.item(i).as_string();
            try {
                recipe_for(recipe);
            } catch (const ConfigError& e) {
                idx.item(i).fail(e.what());
            }
            config.indices.push_back(recipe);
        }
    }

    if (root.has("qa")) {
        const Cursor qa = root.child("qa");
        qa.expect_object({"band", "bits"});
        config.qa_band = opt_string(qa, "band", "");
        if (qa.has("bits")) {
            config.qa_bits.bit_positions = int_array(qa.child("bits"));
            try {
                config.qa_bits.bit_mask();
            } catch (const ConfigError& e) {
                qa.child("bits").fail(e.what());
            }
        }
    }

    if (root.has("scenes")) {
        const Cursor scenes = root.child("scenes");
        scenes.expect_array();
        for (size_t i = 0; i < scenes.size(); ++i) {
            const Cursor entry = scenes.item(i);
            entry.expect_object({"year", "paths"});
            SceneGroup group;
            if (!entry.has("year"))
                landkit::fail(name, entry.child_path("year"), "field is required");
            group.year = entry.child("year").as_int();
            const Cursor paths = entry.child("paths");
            paths.expect_array();
            if (paths.size() == 0) paths.fail("expected at least one scene path");
            for (size_t k = 0; k < paths.size(); ++k)
                group.paths.push_back(resolve(base_dir, paths.item(k).as_string()));
            config.scenes.push_back(std::move(group));
        }
    }

    if (root.has("composites"))
        config.composites =
            parse_composite_refs(root.child("composites"), base_dir);

    if (root.has("labels")) {
        const Cursor labels = root.child("labels");
        labels.expect_object({"path", "format"});
        config.labels.path = resolve(base_dir, require_string(labels, "path"));
        config.labels.format = opt_string(labels, "format", "");
        if (!config.labels.format.empty() && config.labels.format != "csv" &&
            config.labels.format != "geojson")
            labels.child("format").fail("expected \"csv\" or \"geojson\"");
    }

    if (root.has("train_year"))
        config.train_year = root.child("train_year").as_int();

    if (root.has("model")) parse_model(root.child("model"), config);

    if (root.has("classify")) {
        const Cursor classify = root.child("classify");
        classify.expect_object({"years"});
        if (classify.has("years"))
            config.classify_years = int_array(classify.child("years"));
    }

    if (root.has("change")) {
        const Cursor change = root.child("change");
        change.expect_object({"urban_class", "maps"});
        config.urban_class = opt_int(change, "urban_class", 0);
        if (change.has("maps"))
            config.change_maps =
                parse_composite_refs(change.child("maps"), base_dir);
    }

    if (root.has("sweep")) {
        const Cursor sweep = root.child("sweep");
        sweep.expect_object({"sizes", "model"});
        if (sweep.has("sizes")) config.sweep_sizes = int_array(sweep.child("sizes"));
        if (sweep.has("model"))
            config.sweep_model = parse_kind(sweep.child("model"));
    }

    if (root.has("synth")) parse_synth(root.child("synth"), config.synth);

    config.threads = opt_int(root, "threads", 1);
    if (config.threads < 1)
        root.child("threads").fail("expected at least 1");

    return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buffer;
    buffer << is.rdbuf();
    if (is.bad()) throw IoError(path + ": read failed");
    return parse_pipeline_config(buffer.str(), path,
                                 fs::path(path).parent_path().string());
}

std::vector<CompositeRef> effective_change_maps(const PipelineConfig& config) {
    if (!config.change_maps.empty()) return config.change_maps;
    std::vector<int> years = config.classify_years;
    if (years.empty())
        for (const auto& ref : config.composites) years.push_back(ref.year);
    std::vector<CompositeRef> maps;
    for (int year : years)
        maps.push_back({year, config.output_dir + "/class_map_" +
                                  std::to_string(year) + ".tif"});
    return maps;
}

void validate_for(const PipelineConfig& config, Command command) {
    const std::string& file = config.path;

    const auto check_composites = [&] {
        if (config.composites.empty())
            fail(file, "composites", "at least one composite is required");
        for (size_t i = 0; i < config.composites.size(); ++i)
            require_input_file(config,
                               "composites[" + std::to_string(i) + "].path",
                               config.composites[i].path);
    };
    const auto check_labels = [&] {
        require_input_file(config, "labels.path", config.labels.path);
    };
    const auto check_training_knobs = [&] {
        check_positive(config, "model.chip_size", config.chip_size);
        if (config.chip_size % 2 == 0)
            fail(file, "model.chip_size", "chip size must be odd");
        check_positive(config, "model.per_class_train", config.per_class_train);
        check_positive(config, "model.per_class_test", config.per_class_test);
        if (config.train_year) {
            bool found = false;
            for (const auto& ref : config.composites)
                found = found || ref.year == *config.train_year;
            if (!found)
                fail(file, "train_year",
                     "no composite listed for year " +
                         std::to_string(*config.train_year));
        }
    };

    switch (command) {
        case Command::composite: {
            if (config.scenes.empty())
                fail(file, "scenes", "at least one year of scenes is required");
            for (size_t i = 0; i < config.scenes.size(); ++i)
                for (size_t k = 0; k < config.scenes[i].paths.size(); ++k)
                    require_input_file(config,
                                       "scenes[" + std::to_string(i) +
                                           "].paths[" + std::to_string(k) + "]",
                                       config.scenes[i].paths[k]);
            if (config.qa_band.empty())
                fail(file, "qa.band",
                     "the QA band name is required for compositing");
            break;
        }
        case Command::train: {
            check_composites();
            check_labels();
            check_training_knobs();
            if (config.cv_folds < 2)
                fail(file, "model.folds", "cross-validation needs k >= 2");
            break;
        }
        case Command::classify: {
            check_composites();
            for (int year : config.classify_years) {
                bool found = false;
                for (const auto& ref : config.composites)
                    found = found || ref.year == year;
                if (!found)
                    fail(file, "classify.years",
                         "no composite listed for year " + std::to_string(year));
            }
            break;
        }
        case Command::change: {
            const auto maps = effective_change_maps(config);
            if (maps.empty())
                fail(file, "change.maps", "no class maps configured");
            for (size_t i = 0; i < maps.size(); ++i)
                require_input_file(config,
                                   "change.maps[" + std::to_string(i) + "].path",
                                   maps[i].path);
            break;
        }
        case Command::sweep: {
            check_composites();
            check_labels();
            check_training_knobs();
            for (size_t i = 0; i < config.sweep_sizes.size(); ++i)
                check_positive(config, "sweep.sizes[" + std::to_string(i) + "]",
                               config.sweep_sizes[i]);
            break;
        }
        case Command::synth: {
            const SynthParams& p = config.synth;
            if (config.scheme.size() != 7)
                fail(file, "scheme",
                     "the synthetic layout plants exactly 7 classes, got " +
                         std::to_string(config.scheme.size()));
            if (p.width < 32 || p.height < 32)
                fail(file, "synth",
                     "the planted region layout needs at least 32x32 pixels");
            check_positive(config, "synth.years", p.years);
            check_positive(config, "synth.scenes_per_year", p.scenes_per_year);
            if (p.labels_per_class < 2)
                fail(file, "synth.labels_per_class", "expected at least 2");
            if (p.rare_count < 2)
                fail(file, "synth.rare_count", "expected at least 2");
            if (config.scheme.id_of(p.rare_class) < 0)
                fail(file, "synth.rare_class",
                     "\"" + p.rare_class + "\" is not in the class scheme");
            if (p.cloud_fraction < 0.0 || p.cloud_fraction > 0.9)
                fail(file, "synth.cloud_fraction", "expected 0..0.9");
            if (p.noise_sigma < 0.0)
                fail(file, "synth.noise_sigma", "expected >= 0");
            if (p.urban_radius <= 0.0)
                fail(file, "synth.urban_radius", "expected > 0");
            if (p.urban_growth < 0.0)
                fail(file, "synth.urban_growth", "expected >= 0");
            break;
        }
    }
}

}  // namespace landkit
