#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "landkit/config.hpp"
#include "landkit/errors.hpp"
#include "landkit/geotiff.hpp"
#include "landkit/indices.hpp"
#include "landkit/pipeline.hpp"
#include "landkit/raster.hpp"

namespace py = pybind11;
using namespace landkit;

namespace {

// Rasters cross the boundary as plain dicts: band names, a (bands, h, w)
// float64 cube, the shared validity mask, and the georeference. That keeps
// numpy in charge of the pixels without wrapping the C++ classes.
py::dict raster_to_dict(const Raster& raster) {
    const int b = raster.band_count();
    const int h = raster.height();
    const int w = raster.width();
    py::array_t<double> data({b, h, w});
    auto view = data.mutable_unchecked<3>();
    for (int i = 0; i < b; ++i) {
        const auto& values = raster.band(i).values;
        std::memcpy(view.mutable_data(i, 0, 0), values.data(),
                    values.size() * sizeof(double));
    }
    py::array_t<uint8_t> mask({h, w});
    std::memcpy(mask.mutable_data(), raster.mask().data(),
                raster.mask().size());

    py::list names;
    for (const auto& band : raster.bands()) names.append(band.name);

    py::dict out;
    out["names"] = names;
    out["data"] = data;
    out["mask"] = mask;
    out["crs"] = raster.geo().crs;
    out["origin"] = py::make_tuple(raster.geo().origin_lon,
                                   raster.geo().origin_lat);
    out["pixel"] = py::make_tuple(raster.geo().pixel_dlon,
                                  raster.geo().pixel_dlat);
    return out;
}

Raster raster_from_parts(const std::vector<std::string>& names,
                         py::array_t<double, py::array::c_style |
                                                 py::array::forcecast> data,
                         py::object mask, const std::string& crs,
                         std::pair<double, double> origin,
                         std::pair<double, double> pixel) {
    if (data.ndim() != 3)
        throw ShapeError("data must have shape (bands, height, width)");
    const int b = static_cast<int>(data.shape(0));
    const int h = static_cast<int>(data.shape(1));
    const int w = static_cast<int>(data.shape(2));
    if (static_cast<size_t>(b) != names.size())
        throw ShapeError("need one band name per data slice");

    const size_t n = static_cast<size_t>(h) * w;
    auto view = data.unchecked<3>();
    std::vector<Band> bands;
    for (int i = 0; i < b; ++i) {
        Band band;
        band.name = names[static_cast<size_t>(i)];
        band.values.assign(view.data(i, 0, 0), view.data(i, 0, 0) + n);
        bands.push_back(std::move(band));
    }

    std::vector<uint8_t> mask_values(n, 1);
    if (!mask.is_none()) {
        auto m = py::array_t<uint8_t, py::array::c_style |
                                          py::array::forcecast>::ensure(mask);
        if (!m || m.ndim() != 2 || m.shape(0) != h || m.shape(1) != w)
            throw ShapeError("mask must have shape (height, width)");
        std::memcpy(mask_values.data(), m.data(), n);
    }

    GeoRef geo;
    geo.crs = crs;
    geo.origin_lon = origin.first;
    geo.origin_lat = origin.second;
    geo.pixel_dlon = pixel.first;
    geo.pixel_dlat = pixel.second;
    return Raster(w, h, std::move(bands), std::move(mask_values), geo);
}

PipelineConfig load_config(const std::string& path) {
    return load_pipeline_config(path);
}

py::dict composite_dict(const CompositeOutput& out) {
    py::dict d;
    d["years"] = out.years;
    d["paths"] = out.paths;
    d["valid_fraction"] = out.valid_fraction;
    return d;
}

py::dict train_dict(const TrainOutput& out) {
    py::dict d;
    d["models"] = out.model_names;
    d["model_paths"] = out.model_paths;
    d["artifacts"] = out.artifacts;
    d["warnings"] = out.warnings;
    py::list accuracy;
    for (const auto& report : out.test_reports)
        accuracy.append(report.overall_accuracy);
    d["test_accuracy"] = accuracy;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Landsat land-cover toolkit: compositing, classification, "
              "change detection";
    m.attr("__version__") = "0.1.0";

    // Exception hierarchy: everything derives from landkit.Error so callers
    // can catch broadly; config and data problems stay distinguishable.
    const py::object error =
        py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError",
                                                  error.ptr());

    m.def(
        "read_raster",
        [](const std::string& path) { return raster_to_dict(read_geotiff(path)); },
        py::arg("path"), "Read a GeoTIFF into a dict of numpy arrays.");

    m.def(
        "write_raster",
        [](const std::string& path, const std::vector<std::string>& names,
           py::array_t<double, py::array::c_style | py::array::forcecast> data,
           py::object mask, const std::string& crs,
           std::pair<double, double> origin, std::pair<double, double> pixel) {
            write_geotiff(
                raster_from_parts(names, data, mask, crs, origin, pixel), path);
        },
        py::arg("path"), py::arg("names"), py::arg("data"),
        py::arg("mask") = py::none(), py::arg("crs") = "EPSG:4326",
        py::arg("origin") = std::pair<double, double>{0.0, 0.0},
        py::arg("pixel") = std::pair<double, double>{1.0, -1.0},
        "Write a (bands, height, width) float cube as a GeoTIFF.");

    m.def(
        "index_names",
        [] {
            std::vector<std::string> names;
            for (const char* name : {"ndvi", "ndwi", "mndwi", "ndbi"})
                names.push_back(name);
            return names;
        },
        "Names of the built-in normalized-difference indices.");

    m.def(
        "append_indices",
        [](py::dict raster, const std::vector<std::string>& indices) {
            std::vector<IndexRecipe> recipes;
            for (const auto& name : indices) recipes.push_back(recipe_for(name));
            const Raster in = raster_from_parts(
                raster["names"].cast<std::vector<std::string>>(),
                raster["data"].cast<py::array_t<double, py::array::c_style |
                                                             py::array::forcecast>>(),
                raster.contains("mask") ? raster["mask"] : py::none(),
                raster.contains("crs") ? raster["crs"].cast<std::string>()
                                       : "EPSG:4326",
                raster.contains("origin")
                    ? raster["origin"].cast<std::pair<double, double>>()
                    : std::pair<double, double>{0.0, 0.0},
                raster.contains("pixel")
                    ? raster["pixel"].cast<std::pair<double, double>>()
                    : std::pair<double, double>{1.0, -1.0});
            return raster_to_dict(append_feature_bands(in, recipes));
        },
        py::arg("raster"), py::arg("indices"),
        "Append normalized-difference index bands to a raster dict.");

    // Pipeline commands, config-file driven exactly like the CLI.
    m.def(
        "synth",
        [](const std::string& config) {
            const SynthOutput out = cmd_synth(load_config(config));
            py::dict d;
            d["scene_paths"] = out.scene_paths;
            d["feature_paths"] = out.feature_paths;
            d["truth_map_tifs"] = out.truth_map_tifs;
            d["expansion_truth_tif"] = out.expansion_truth_tif;
            d["labels_csv"] = out.labels_csv;
            d["config_path"] = out.config_path;
            return d;
        },
        py::arg("config"), "Generate the synthetic test estate.");

    m.def(
        "composite",
        [](const std::string& config) {
            return composite_dict(cmd_composite(load_config(config)));
        },
        py::arg("config"), "QA-mask and median-composite each year's scenes.");

    m.def(
        "train",
        [](const std::string& config, const std::string& model) {
            return train_dict(cmd_train(load_config(config), model));
        },
        py::arg("config"), py::arg("model") = "",
        "Train the configured model (or 'all'); returns artifact paths.");

    m.def(
        "classify",
        [](const std::string& config, const std::string& model_path) {
            const ClassifyOutput out =
                cmd_classify(load_config(config), model_path);
            py::dict d;
            d["years"] = out.years;
            d["tif_paths"] = out.tif_paths;
            d["png_paths"] = out.png_paths;
            return d;
        },
        py::arg("config"), py::arg("model"),
        "Classify the configured composites with a saved model.");

    m.def(
        "change",
        [](const std::string& config) {
            const ChangeOutput out = cmd_change(load_config(config));
            py::dict d;
            d["expansion_tif"] = out.expansion_tif;
            d["expansion_png"] = out.expansion_png;
            d["proportions_csv"] = out.proportions_csv;
            d["transition_csvs"] = out.transition_csvs;
            d["flicker_count"] = out.flicker_count;
            return d;
        },
        py::arg("config"), "Urban-expansion change detection over class maps.");

    m.def(
        "sweep",
        [](const std::string& config) {
            const SweepOutput out = cmd_sweep(load_config(config));
            py::list rows;
            for (const auto& row : out.sweep.rows) {
                py::dict r;
                r["sample_size"] = row.sample_size;
                r["accuracy"] = row.accuracy;
                r["precision"] = row.precision;
                r["recall"] = row.recall;
                r["f1"] = row.f1;
                r["map_path"] = row.map_path;
                rows.append(r);
            }
            py::dict d;
            d["csv_path"] = out.csv_path;
            d["rows"] = rows;
            d["warnings"] = out.sweep.warnings;
            return d;
        },
        py::arg("config"), "Sample-size ladder experiment.");
}
