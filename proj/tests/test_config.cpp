#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "landkit/config.hpp"
#include "landkit/errors.hpp"
#include "test_support.hpp"

using namespace landkit;
using testsup::TempDir;

namespace {

PipelineConfig parse(const std::string& body) {
    return parse_pipeline_config(body, "test.jsonc", "/base");
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

// what() must mention every given fragment, so error messages actually name
// the file and field.
template <typename Fn>
void check_config_error(Fn fn, const std::vector<std::string>& fragments) {
    try {
        fn();
        FAIL_CHECK("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        for (const auto& fragment : fragments) {
            INFO("message: ", what, "  wanted: ", fragment);
            CHECK(what.find(fragment) != std::string::npos);
        }
    }
}

}  // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("minimal config gets the documented defaults") {
    const auto c = parse(R"({ "version": 1, "seed": 9, "output_dir": "out" })");
    CHECK(c.seed == 9);
    CHECK(c.output_dir == "/base/out");
    CHECK(c.scheme.size() == 7);
    CHECK(c.scheme.classes[0].name == "Urban Areas");
    CHECK(c.indices == std::vector<std::string>{"ndvi", "mndwi", "ndbi"});
    CHECK(c.chip_size == 9);
    CHECK(c.per_class_train == 175);
    CHECK(c.per_class_test == 75);
    CHECK(c.underfull == UnderfullPolicy::upsample);
    CHECK(c.cv_folds == 10);
    CHECK(c.model.kind == ModelKind::cnn);
    CHECK_FALSE(c.train_all);
    CHECK(c.urban_class == 0);
    CHECK(c.sweep_model == ModelKind::cnn);
    CHECK(c.sweep_sizes.empty());
    CHECK(c.threads == 1);
    CHECK(c.qa_bits.bit_positions == std::vector<int>{1, 3, 4});
    CHECK(c.qa_band.empty());
}

TEST_CASE("line and block comments are accepted") {
    const auto c = parse(R"(
// yearly run
{
  "version": 1,   // schema
  /* reproducibility */
  "seed": 7,
  "output_dir": "out"
})");
    CHECK(c.seed == 7);
}

TEST_CASE("absolute paths pass through, relative ones resolve to the base") {
    const auto c = parse(R"({
  "version": 1, "seed": 1, "output_dir": "/tmp/abs",
  "labels": { "path": "pts/labels.csv" },
  "composites": [ { "year": 2020, "path": "/data/c.tif" } ]
})");
    CHECK(c.output_dir == "/tmp/abs");
    CHECK(c.labels.path == "/base/pts/labels.csv");
    CHECK(c.composites.at(0).path == "/data/c.tif");
}

TEST_CASE("missing or wrong required fields name the field") {
    check_config_error(
        [] { parse(R"({ "version": 1, "output_dir": "o" })"); },
        {"test.jsonc", "seed", "required"});
    check_config_error(
        [] { parse(R"({ "seed": 1, "output_dir": "o" })"); },
        {"version", "required"});
    check_config_error(
        [] { parse(R"({ "version": 3, "seed": 1, "output_dir": "o" })"); },
        {"version", "unsupported"});
    check_config_error([] { parse(R"({ "version": 1, "seed": 1 })"); },
                       {"output_dir", "required"});
    check_config_error(
        [] { parse(R"({ "version": 1, "seed": -4, "output_dir": "o" })"); },
        {"seed", "non-negative"});
    check_config_error(
        [] { parse(R"({ "version": 1, "seed": "x", "output_dir": "o" })"); },
        {"seed", "non-negative integer"});
}

TEST_CASE("unknown keys are rejected at every level") {
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "outptu_dir": "typo" })");
        },
        {"outptu_dir", "unknown field"});
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "model": { "kindd": "cnn" } })");
        },
        {"model.kindd", "unknown field"});
}

TEST_CASE("broken JSON is a ConfigError naming the file") {
    check_config_error([] { parse("{ \"version\": 1,, }"); },
                       {"test.jsonc", "not valid JSON"});
}

TEST_CASE("model block parses kinds, knobs and nested params") {
    const auto c = parse(R"({
  "version": 1, "seed": 1, "output_dir": "o",
  "model": {
    "kind": "forest", "chip_size": 5, "per_class_train": 30,
    "per_class_test": 10, "underfull": "warn", "folds": 4,
    "forest": { "n_estimators": 25, "max_depth": 6 },
    "mlp_hidden": 16, "cnn_channels": [8, 12],
    "train": { "max_epochs": 20, "patience": 3, "batch_size": 8 }
  }
})");
    CHECK(c.model.kind == ModelKind::forest);
    CHECK(c.chip_size == 5);
    CHECK(c.per_class_train == 30);
    CHECK(c.per_class_test == 10);
    CHECK(c.underfull == UnderfullPolicy::warn);
    CHECK(c.cv_folds == 4);
    CHECK(c.model.forest.n_estimators == 25);
    CHECK(c.model.forest.max_depth == 6);
    CHECK(c.model.forest.min_samples_leaf == 1);  // untouched default
    CHECK(c.model.mlp_hidden == 16);
    CHECK(c.model.cnn_channels == std::vector<int>{8, 12});
    CHECK(c.model.train.max_epochs == 20);
    CHECK(c.model.train.patience == 3);
    CHECK(c.model.train.batch_size == 8);

    const auto all = parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                                "model": { "kind": "all" } })");
    CHECK(all.train_all);

    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "model": { "kind": "svm" } })");
        },
        {"model.kind"});
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "model": { "underfull": "ignore" } })");
        },
        {"model.underfull", "upsample"});
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "model": { "train": { "max_epochs": 0 } } })");
        },
        {"model.train", "max_epochs"});
}

TEST_CASE("scheme, indices and qa blocks validate their contents") {
    const auto c = parse(R"({
  "version": 1, "seed": 1, "output_dir": "o",
  "scheme": [ { "id": 0, "name": "a", "color": [1, 2, 3] },
              { "id": 1, "name": "b" } ],
  "indices": ["ndwi"],
  "qa": { "band": "QA_PIXEL", "bits": [0, 5] }
})");
    CHECK(c.scheme.size() == 2);
    CHECK(c.scheme.classes[0].color == std::array<uint8_t, 3>{1, 2, 3});
    CHECK(c.indices == std::vector<std::string>{"ndwi"});
    CHECK(c.qa_band == "QA_PIXEL");
    CHECK(c.qa_bits.bit_positions == std::vector<int>{0, 5});

    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "scheme": [ { "id": 1, "name": "a" } ] })");
        },
        {"scheme"});
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "indices": ["ndvi", "evi2"] })");
        },
        {"indices[1]"});
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "qa": { "bits": [16] } })");
        },
        {"qa.bits", "[0, 15]"});
}

TEST_CASE("scenes and band map parse") {
    const auto c = parse(R"({
  "version": 1, "seed": 1, "output_dir": "o",
  "bands": { "nir": "SR_B5", "red": "SR_B4" },
  "scenes": [ { "year": 2019, "paths": ["a.tif", "b.tif"] } ]
})");
    REQUIRE(c.band_map.size() == 2);
    CHECK(c.band_map[0] == std::pair<std::string, std::string>{"nir", "SR_B5"});
    REQUIRE(c.scenes.size() == 1);
    CHECK(c.scenes[0].year == 2019);
    CHECK(c.scenes[0].paths ==
          std::vector<std::string>{"/base/a.tif", "/base/b.tif"});

    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "scenes": [ { "year": 2019, "paths": [] } ] })");
        },
        {"scenes[0].paths", "at least one"});
    check_config_error(
        [] {
            parse(R"({ "version": 1, "seed": 1, "output_dir": "o",
                       "scenes": [ { "paths": ["a.tif"] } ] })");
        },
        {"scenes[0].year", "required"});
}

TEST_CASE("load_pipeline_config reads files and resolves against their dir") {
    TempDir tmp("config_load");
    write_file(tmp.file("run.jsonc"), R"(// run
{ "version": 1, "seed": 3, "output_dir": "artifacts",
  "labels": { "path": "l.csv" } })");
    const auto c = load_pipeline_config(tmp.file("run.jsonc"));
    CHECK(c.path == tmp.file("run.jsonc"));
    CHECK(c.output_dir == tmp.file("artifacts"));
    CHECK(c.labels.path == tmp.file("l.csv"));

    CHECK_THROWS_AS((void)load_pipeline_config(tmp.file("absent.jsonc")),
                    ConfigError);
}

TEST_CASE("validate_for composite: scenes, files and the QA band name") {
    TempDir tmp("config_vcomp");
    write_file(tmp.file("s.tif"), "placeholder");

    PipelineConfig base = parse(R"({ "version": 1, "seed": 1, "output_dir": "o" })");
    base.path = "run.jsonc";

    check_config_error([&] { validate_for(base, Command::composite); },
                       {"scenes", "at least one year"});

    PipelineConfig with_scenes = base;
    with_scenes.scenes.push_back({2020, {tmp.file("s.tif")}});
    check_config_error([&] { validate_for(with_scenes, Command::composite); },
                       {"qa.band", "required"});

    with_scenes.qa_band = "qa";
    CHECK_NOTHROW(validate_for(with_scenes, Command::composite));

    with_scenes.scenes.push_back({2021, {tmp.file("missing.tif")}});
    check_config_error([&] { validate_for(with_scenes, Command::composite); },
                       {"scenes[1].paths[0]", "not found", "missing.tif"});
}

TEST_CASE("validate_for train/classify/sweep check inputs and knobs") {
    TempDir tmp("config_vtrain");
    write_file(tmp.file("c.tif"), "placeholder");
    write_file(tmp.file("l.csv"), "placeholder");

    PipelineConfig c = parse(R"({ "version": 1, "seed": 1, "output_dir": "o" })");
    c.path = "run.jsonc";
    check_config_error([&] { validate_for(c, Command::train); },
                       {"composites", "at least one"});

    c.composites.push_back({2020, tmp.file("c.tif")});
    check_config_error([&] { validate_for(c, Command::train); },
                       {"labels.path", "required"});

    c.labels.path = tmp.file("l.csv");
    CHECK_NOTHROW(validate_for(c, Command::train));
    CHECK_NOTHROW(validate_for(c, Command::sweep));

    SUBCASE("even chip size") {
        c.chip_size = 8;
        check_config_error([&] { validate_for(c, Command::train); },
                           {"model.chip_size", "odd"});
    }
    SUBCASE("single CV fold") {
        c.cv_folds = 1;
        check_config_error([&] { validate_for(c, Command::train); },
                           {"model.folds"});
    }
    SUBCASE("train year without a composite") {
        c.train_year = 1999;
        check_config_error([&] { validate_for(c, Command::train); },
                           {"train_year", "1999"});
    }
    SUBCASE("classify year without a composite") {
        c.classify_years = {2020, 2021};
        check_config_error([&] { validate_for(c, Command::classify); },
                           {"classify.years", "2021"});
    }
    SUBCASE("negative sweep size") {
        c.sweep_sizes = {490, -7};
        check_config_error([&] { validate_for(c, Command::sweep); },
                           {"sweep.sizes[1]"});
    }
}

TEST_CASE("validate_for synth guards the layout invariants") {
    PipelineConfig c = parse(R"({ "version": 1, "seed": 1, "output_dir": "o" })");
    c.path = "run.jsonc";
    CHECK_NOTHROW(validate_for(c, Command::synth));

    SUBCASE("grid too small") {
        c.synth.width = 16;
        check_config_error([&] { validate_for(c, Command::synth); },
                           {"synth", "32x32"});
    }
    SUBCASE("rare class must exist") {
        c.synth.rare_class = "Dunes";
        check_config_error([&] { validate_for(c, Command::synth); },
                           {"synth.rare_class", "Dunes"});
    }
    SUBCASE("layout is seven-class") {
        c.scheme.classes.pop_back();
        c.synth.rare_class = "Urban Areas";
        check_config_error([&] { validate_for(c, Command::synth); },
                           {"scheme", "7"});
    }
    SUBCASE("cloud fraction range") {
        c.synth.cloud_fraction = 0.95;
        check_config_error([&] { validate_for(c, Command::synth); },
                           {"synth.cloud_fraction"});
    }
}

TEST_CASE("effective_change_maps: explicit list wins, else classify outputs") {
    PipelineConfig c = parse(R"({ "version": 1, "seed": 1, "output_dir": "/o" })");
    c.composites = {{2014, "/d/c14.tif"}, {2016, "/d/c16.tif"}};

    auto maps = effective_change_maps(c);
    REQUIRE(maps.size() == 2);
    CHECK(maps[0].path == "/o/class_map_2014.tif");
    CHECK(maps[1].year == 2016);

    c.classify_years = {2016};
    maps = effective_change_maps(c);
    REQUIRE(maps.size() == 1);
    CHECK(maps[0].path == "/o/class_map_2016.tif");

    c.change_maps = {{2001, "/x/a.tif"}, {2002, "/x/b.tif"}};
    maps = effective_change_maps(c);
    REQUIRE(maps.size() == 2);
    CHECK(maps[0].path == "/x/a.tif");
}

TEST_SUITE_END();
