#include <cstdio>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "landkit/errors.hpp"
#include "landkit/indices.hpp"
#include "landkit/pipeline.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "landkit: land-cover classification and change detection for "
        "multiband satellite rasters"};
    app.set_version_flag("--version", "landkit 0.1.0");
    app.require_subcommand(1);

    std::string config_path;
    std::string model_path;
    std::string model_kind;
    std::string indices_csv;
    int threads = 0;

    app.add_option("--threads", threads,
                   "cap worker parallelism (default: config, else 1)")
        ->check(CLI::PositiveNumber);

    const auto with_config = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "pipeline config file")
            ->required();
        return cmd;
    };

    auto* composite = with_config(app.add_subcommand(
        "composite", "QA-mask scenes and write one median composite per year"));
    auto* train = with_config(app.add_subcommand(
        "train", "build the labeled chip set, cross-validate and fit models"));
    train->add_option("--model", model_kind,
                      "model kind (kmeans|forest|mlp|cnn|all); overrides config");
    train->add_option("--indices", indices_csv,
                      "comma-separated index recipes; overrides config");
    auto* classify = with_config(app.add_subcommand(
        "classify", "classify every composite into a per-year class map"));
    classify
        ->add_option("-m,--model", model_path, "trained model file (.lkm1)")
        ->required();
    classify->add_option("--indices", indices_csv,
                         "comma-separated index recipes; overrides config");
    auto* change = with_config(app.add_subcommand(
        "change",
        "urban expansion, class proportions and transitions from class maps"));
    auto* sweep = with_config(app.add_subcommand(
        "sweep", "train/test across the sample-size ladder and tabulate"));
    sweep->add_option("--indices", indices_csv,
                      "comma-separated index recipes; overrides config");
    auto* synth = with_config(app.add_subcommand(
        "synth", "generate the synthetic multi-year fixture estate"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a config error
    }

    try {
        landkit::PipelineConfig config =
            landkit::load_pipeline_config(config_path);
        if (threads > 0) config.threads = threads;
        if (!indices_csv.empty()) {
            config.indices = split_csv(indices_csv);
            for (const auto& name : config.indices)
                landkit::recipe_for(name);  // unknown names fail before work
        }
        std::fprintf(stderr, "landkit: config=%s seed=%llu threads=%d\n",
                     config.path.c_str(),
                     static_cast<unsigned long long>(config.seed),
                     config.threads);

        if (composite->parsed()) {
            landkit::cmd_composite(config);
        } else if (train->parsed()) {
            landkit::cmd_train(config, model_kind);
        } else if (classify->parsed()) {
            landkit::cmd_classify(config, model_path);
        } else if (change->parsed()) {
            landkit::cmd_change(config);
        } else if (sweep->parsed()) {
            landkit::cmd_sweep(config);
        } else if (synth->parsed()) {
            landkit::cmd_synth(config);
        }
        return 0;
    } catch (const landkit::ConfigError& e) {
        std::fprintf(stderr, "landkit: config error: %s\n", e.what());
        return 2;
    } catch (const landkit::Error& e) {
        std::fprintf(stderr, "landkit: data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "landkit: internal error: %s\n", e.what());
        return 4;
    }
}
