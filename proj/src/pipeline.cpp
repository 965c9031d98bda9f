#include "landkit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <utility>

#include "landkit/change.hpp"
#include "landkit/errors.hpp"
#include "landkit/geotiff.hpp"
#include "landkit/indices.hpp"
#include "landkit/preprocess.hpp"
#include "landkit/rng.hpp"
#include "csv_util.hpp"
#include "stage_log.hpp"

namespace landkit {

namespace {

namespace fs = std::filesystem;
using stagelog::Stage;

// Applies the config's canonical -> source renames. A mapping whose source
// band is absent passes when the canonical name already exists (composites
// written by this pipeline are pre-renamed); otherwise it is an error.
Raster rename_bands(const Raster& raster,
                    const std::vector<std::pair<std::string, std::string>>& map) {
    if (map.empty()) return raster;
    std::vector<Band> bands = raster.bands();
    for (const auto& [canonical, source] : map) {
        if (canonical == source) continue;
        const int from = raster.band_index(source);
        if (from < 0) {
            if (raster.has_band(canonical)) continue;
            throw BandNotFound("band \"" + source + "\" (mapped to \"" +
                               canonical + "\") not found in raster");
        }
        if (raster.has_band(canonical))
            throw NameCollision("band \"" + canonical +
                                "\" already exists; cannot rename \"" + source +
                                "\" onto it");
        bands[static_cast<size_t>(from)].name = canonical;
    }
    return Raster(raster.width(), raster.height(), std::move(bands),
                  raster.mask(), raster.geo());
}

Raster drop_band(const Raster& raster, const std::string& name) {
    std::vector<Band> bands;
    for (const auto& band : raster.bands())
        if (band.name != name) bands.push_back(band);
    return Raster(raster.width(), raster.height(), std::move(bands),
                  raster.mask(), raster.geo());
}

std::vector<IndexRecipe> recipes_from(const std::vector<std::string>& names) {
    std::vector<IndexRecipe> recipes;
    for (const auto& name : names) recipes.push_back(recipe_for(name));
    return recipes;
}

// Composite from disk, renamed to canonical band names, with the configured
// index bands appended: the raster every chip is cut from.
Raster load_feature_raster(const PipelineConfig& config,
                           const std::string& path) {
    Raster raster = rename_bands(read_geotiff(path), config.band_map);
    return append_feature_bands(raster, recipes_from(config.indices));
}

const CompositeRef& training_composite(const PipelineConfig& config) {
    if (config.train_year) {
        for (const auto& ref : config.composites)
            if (ref.year == *config.train_year) return ref;
        throw ConfigError(config.path + ": train_year: no composite for year " +
                          std::to_string(*config.train_year));
    }
    const auto newest =
        std::max_element(config.composites.begin(), config.composites.end(),
                         [](const CompositeRef& a, const CompositeRef& b) {
                             return a.year < b.year;
                         });
    if (newest == config.composites.end())
        throw ConfigError(config.path + ": composites: none configured");
    return *newest;
}

std::vector<LabeledPoint> load_points(const PipelineConfig& config,
                                      const Raster& raster, int year) {
    std::string format = config.labels.format;
    if (format.empty()) {
        const std::string ext = fs::path(config.labels.path).extension().string();
        format = (ext == ".geojson" || ext == ".json") ? "geojson" : "csv";
    }
    std::vector<LabeledPoint> points =
        format == "geojson"
            ? load_label_geojson(config.labels.path, config.scheme, raster)
            : load_label_csv(config.labels.path, config.scheme, raster);
    std::vector<LabeledPoint> filtered;
    for (const auto& point : points)
        if (point.year == year) filtered.push_back(point);
    if (filtered.empty())
        throw InsufficientDataError(config.labels.path +
                                    ": no labeled points for year " +
                                    std::to_string(year));
    return filtered;
}

void write_auc_csv(const std::string& path, const AucReport& auc,
                   const ClassScheme& scheme) {
    auto os = csvu::open(path);
    os << "class,auc,defined\n";
    size_t defined = 0;
    for (size_t c = 0; c < auc.per_class.size(); ++c) {
        os << csvu::field(scheme.classes[c].name) << ",";
        os << (auc.defined[c] ? csvu::score(auc.per_class[c]) : "nan");
        os << "," << int(auc.defined[c]) << "\n";
        defined += auc.defined[c];
    }
    os << "macro," << csvu::score(auc.macro) << "," << defined << "\n";
    csvu::finish(os, path);
}

std::string out_path(const PipelineConfig& config, const std::string& name) {
    return config.output_dir + "/" + name;
}

}  // namespace

CompositeOutput cmd_composite(const PipelineConfig& config) {
    validate_for(config, Command::composite);
    fs::create_directories(config.output_dir);

    CompositeOutput out;
    for (const auto& group : config.scenes) {
        Stage stage("composite");
        stage.note("year", group.year);
        stage.note("scenes", group.paths.size());

        TimeStack stack;
        for (size_t i = 0; i < group.paths.size(); ++i) {
            Raster scene =
                rename_bands(read_geotiff(group.paths[i]), config.band_map);
            const Band& qa = scene.band(config.qa_band);
            Raster masked = apply_qa_mask(scene, qa, config.qa_bits);
            stack.epochs.emplace_back(static_cast<int64_t>(i),
                                      drop_band(masked, config.qa_band));
        }
        const Raster composite = median_composite(stack);
        const double valid =
            static_cast<double>(composite.valid_count()) /
            static_cast<double>(composite.pixel_count());
        stage.note("valid_pct", 100.0 * valid);

        const std::string path =
            out_path(config, "composite_" + std::to_string(group.year) + ".tif");
        write_geotiff(composite, path);
        stage.note("wrote", path);

        out.years.push_back(group.year);
        out.paths.push_back(path);
        out.valid_fraction.push_back(valid);
    }
    return out;
}

TrainOutput cmd_train(const PipelineConfig& config,
                      const std::string& kind_override) {
    validate_for(config, Command::train);

    bool all = config.train_all;
    ModelKind single = config.model.kind;
    if (!kind_override.empty()) {
        all = kind_override == "all";
        if (!all) single = model_kind_from_string(kind_override);
    }
    const std::vector<ModelKind> kinds =
        all ? std::vector<ModelKind>{ModelKind::mlp, ModelKind::forest,
                                     ModelKind::cnn}
            : std::vector<ModelKind>{single};

    fs::create_directories(config.output_dir);
    TrainOutput out;

    const CompositeRef& source = training_composite(config);
    Raster features = [&] {
        Stage stage("features");
        stage.note("year", source.year);
        Raster r = load_feature_raster(config, source.path);
        stage.note("channels", r.band_count());
        return r;
    }();

    LabeledSplit split = [&] {
        Stage stage("dataset");
        const auto points = load_points(config, features, source.year);
        stage.note("points", points.size());
        SplitOptions options{config.per_class_train, config.per_class_test,
                             config.chip_size, config.underfull};
        LabeledSplit s = build_labeled_set(features, points, config.scheme,
                                           options, derive_seed(config.seed,
                                                                "dataset"));
        stage.note("train_chips", s.train.size());
        stage.note("test_chips", s.test.size());
        for (const auto& warning : s.warnings) {
            std::fprintf(stderr, "landkit: warning stage=dataset %s\n",
                         warning.c_str());
            out.warnings.push_back(warning);
        }
        return s;
    }();

    const int n_classes = static_cast<int>(config.scheme.size());
    std::vector<std::string> supervised_names;
    std::vector<CvResult> cv_results;
    std::vector<MetricReport> reports;

    for (const ModelKind kind : kinds) {
        const std::string name = to_string(kind);
        const std::string suffix = all ? "_" + name : "";
        ModelSpec spec = config.model;
        spec.kind = kind;

        if (kind == ModelKind::kmeans) {
            // Unsupervised path: fit, relabel clusters by training majority,
            // and render the cluster map; accuracy tables would be
            // misleading here so none are emitted.
            Stage stage("train");
            stage.note("model", name);
            TrainedModel model = train_model(
                spec, split.train, derive_seed(config.seed, "train-" + name));
            const std::string model_path =
                out_path(config, "model" + suffix + ".lkm1");
            save_model(model_path, model);
            out.artifacts.push_back(model_path);

            const ClassMap map =
                classify_map(features, model, config.scheme, source.year,
                             config.chip_size);
            const std::string tif = out_path(config, "cluster_map.tif");
            const std::string png = out_path(config, "cluster_map.png");
            write_geotiff(to_raster(map), tif);
            render_map(map, png);
            out.artifacts.insert(out.artifacts.end(), {tif, png});
            stage.note("wrote", model_path);

            out.model_names.push_back(name);
            out.model_paths.push_back(model_path);
            out.test_reports.emplace_back();
            continue;
        }

        CvResult cv = [&] {
            Stage stage("cv");
            stage.note("model", name);
            stage.note("folds", config.cv_folds);
            CvResult r = kfold_cv(split.train, spec, config.cv_folds,
                                  derive_seed(config.seed, "cv-" + name));
            stage.note("mean_accuracy", r.mean_accuracy);
            return r;
        }();

        Stage stage("train");
        stage.note("model", name);
        LearningCurve curve;
        TrainedModel model =
            train_model(spec, split.train,
                        derive_seed(config.seed, "train-" + name), &curve);
        const std::string model_path =
            out_path(config, "model" + suffix + ".lkm1");
        save_model(model_path, model);
        out.artifacts.push_back(model_path);

        const std::vector<int> truth = labels_of(split.test);
        const std::vector<int> predicted = predict_labels(model, split.test);
        const ConfusionMatrix cm = confusion(truth, predicted, n_classes);
        const MetricReport report = metrics(cm);
        const AucReport auc =
            roc_auc(truth, predict_probabilities(model, split.test), n_classes);
        stage.note("test_accuracy", report.overall_accuracy);

        const std::string confusion_csv =
            out_path(config, "confusion" + suffix + ".csv");
        const std::string confusion_png =
            out_path(config, "confusion" + suffix + ".png");
        const std::string roc_csv = out_path(config, "roc" + suffix + ".csv");
        write_confusion_csv(confusion_csv, cm, config.scheme);
        render_confusion_png(confusion_png, cm);
        write_auc_csv(roc_csv, auc, config.scheme);
        out.artifacts.insert(out.artifacts.end(),
                             {confusion_csv, confusion_png, roc_csv});

        if (curve.epochs_run > 0) {
            const std::string curve_csv =
                out_path(config, "curve" + suffix + ".csv");
            const std::string curve_png =
                out_path(config, "curve" + suffix + ".png");
            write_curve_csv(curve_csv, curve);
            render_curve_png(curve_png, curve);
            out.artifacts.insert(out.artifacts.end(), {curve_csv, curve_png});
        }

        out.model_names.push_back(name);
        out.model_paths.push_back(model_path);
        out.test_reports.push_back(report);
        supervised_names.push_back(name);
        cv_results.push_back(std::move(cv));
        reports.push_back(report);
    }

    if (!supervised_names.empty()) {
        const std::string cv_csv = out_path(config, "cv.csv");
        const std::string comparison_csv = out_path(config, "comparison.csv");
        write_cv_table_csv(cv_csv, supervised_names, cv_results);
        write_comparison_csv(comparison_csv, supervised_names, reports);
        out.artifacts.insert(out.artifacts.end(), {cv_csv, comparison_csv});
    }
    return out;
}

ClassifyOutput cmd_classify(const PipelineConfig& config,
                            const std::string& model_path) {
    validate_for(config, Command::classify);
    fs::create_directories(config.output_dir);

    const TrainedModel model = load_model(model_path);

    std::vector<CompositeRef> selected;
    if (config.classify_years.empty()) {
        selected = config.composites;
    } else {
        for (int year : config.classify_years)
            for (const auto& ref : config.composites)
                if (ref.year == year) selected.push_back(ref);
    }

    ClassifyOutput out;
    for (const auto& ref : selected) {
        Stage stage("classify");
        stage.note("year", ref.year);
        stage.note("model", to_string(model.kind()));
        const Raster features = load_feature_raster(config, ref.path);
        const ClassMap map = classify_map(features, model, config.scheme,
                                          ref.year, config.chip_size);
        size_t classified = 0;
        for (const uint8_t m : map.mask) classified += m;
        stage.note("classified", classified);

        const std::string stem = "class_map_" + std::to_string(ref.year);
        const std::string tif = out_path(config, stem + ".tif");
        const std::string png = out_path(config, stem + ".png");
        write_geotiff(to_raster(map), tif);
        render_map(map, png);
        out.years.push_back(ref.year);
        out.tif_paths.push_back(tif);
        out.png_paths.push_back(png);
    }
    return out;
}

ChangeOutput cmd_change(const PipelineConfig& config) {
    validate_for(config, Command::change);
    fs::create_directories(config.output_dir);

    std::vector<CompositeRef> refs = effective_change_maps(config);
    std::sort(refs.begin(), refs.end(),
              [](const CompositeRef& a, const CompositeRef& b) {
                  return a.year < b.year;
              });
    if (refs.size() < 2)
        throw InsufficientDataError(
            "change detection needs at least two class maps, got " +
            std::to_string(refs.size()));

    Stage stage("change");
    stage.note("years", refs.size());
    std::vector<ClassMap> maps;
    for (const auto& ref : refs)
        maps.push_back(classmap_from_raster(read_geotiff(ref.path),
                                            config.scheme, ref.year));

    const ExpansionGrid grid = urban_expansion(maps, config.urban_class);
    stage.note("flicker", grid.flicker_count);

    ChangeOutput out;
    out.flicker_count = grid.flicker_count;
    out.expansion_tif = out_path(config, "expansion.tif");
    out.expansion_png = out_path(config, "expansion.png");
    write_geotiff(to_raster(grid), out.expansion_tif);
    render_expansion(grid, out.expansion_png);

    out.proportions_csv = out_path(config, "proportions.csv");
    write_proportions_csv(out.proportions_csv, class_proportions(maps),
                          config.scheme);

    for (size_t t = 0; t + 1 < maps.size(); ++t) {
        const std::string path =
            out_path(config, "transitions_" + std::to_string(maps[t].year) +
                                 "_" + std::to_string(maps[t + 1].year) + ".csv");
        write_transitions_csv(path, transition_matrix(maps[t], maps[t + 1]),
                              config.scheme);
        out.transition_csvs.push_back(path);
    }
    return out;
}

SweepOutput cmd_sweep(const PipelineConfig& config) {
    validate_for(config, Command::sweep);
    fs::create_directories(config.output_dir);

    Stage stage("sweep");
    const CompositeRef& source = training_composite(config);
    stage.note("year", source.year);
    const Raster features = load_feature_raster(config, source.path);
    const auto points = load_points(config, features, source.year);
    stage.note("points", points.size());

    ModelSpec spec = config.model;
    spec.kind = config.sweep_model;
    stage.note("model", to_string(spec.kind));

    SweepOptions options;
    options.sizes = config.sweep_sizes;
    options.chip_size = config.chip_size;
    options.year = source.year;
    options.underfull = config.underfull;

    SweepOutput out;
    out.sweep = sample_size_sweep(features, points, config.scheme, spec,
                                  options, config.output_dir, config.seed);
    for (const auto& warning : out.sweep.warnings)
        std::fprintf(stderr, "landkit: warning stage=sweep %s\n",
                     warning.c_str());
    out.csv_path = out_path(config, "sweep.csv");
    write_sweep_csv(out.csv_path, out.sweep);
    stage.note("rows", out.sweep.rows.size());
    return out;
}

}  // namespace landkit
