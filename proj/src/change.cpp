#include "landkit/change.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "csv_util.hpp"
#include "landkit/errors.hpp"
#include "png_io.hpp"

namespace landkit {

namespace {

constexpr pngio::Rgb kMaskColor{128, 128, 128};
constexpr pngio::Rgb kNeverColor{255, 255, 255};
// Dark-to-light ramp endpoints for the first-urban-year rendering.
constexpr pngio::Rgb kRampDark{103, 0, 31};
constexpr pngio::Rgb kRampLight{253, 219, 199};

void check_same_shape(const ClassMap& a, const ClassMap& b) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("class maps have different shapes: " + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height));
}

std::string format_share(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.8f", value);
    return buf;
}

void write_legend(const std::string& png_path,
                  const std::vector<std::pair<std::string, pngio::Rgb>>& entries) {
    const std::string path = png_path + ".legend.csv";
    auto out = csvu::open(path);
    out << "index,label,red,green,blue\n";
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& [label, color] = entries[i];
        out << i << ',' << csvu::field(label) << ',' << int(color[0]) << ',' << int(color[1]) << ','
            << int(color[2]) << '\n';
    }
    csvu::finish(out, path);
}

}  // namespace

void ClassMap::validate() const {
    const size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
    if (width <= 0 || height <= 0 || classes.size() != n || mask.size() != n)
        throw ConfigError("class map grid does not match its dimensions");
    scheme.validate();
    const int n_classes = static_cast<int>(scheme.size());
    for (size_t i = 0; i < n; ++i) {
        if (mask[i] && (classes[i] < 0 || classes[i] >= n_classes))
            throw ConfigError("class map holds id " + std::to_string(classes[i]) +
                              " outside the " + std::to_string(n_classes) + "-class scheme");
    }
}

ClassMap classify_map(const Raster& raster, const TrainedModel& model, const ClassScheme& scheme,
                      int year, int chip_size, size_t batch_size) {
    scheme.validate();
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (model.normalization &&
        model.normalization->mean.size() != static_cast<size_t>(raster.band_count()))
        throw ShapeError("model expects " + std::to_string(model.normalization->mean.size()) +
                         " channels, raster has " + std::to_string(raster.band_count()));

    ClassMap map;
    map.year = year;
    map.width = raster.width();
    map.height = raster.height();
    map.classes.assign(raster.pixel_count(), -1);
    map.mask = raster.mask();
    map.scheme = scheme;
    map.geo = raster.geo();
    map.provenance = to_string(model.kind()) + " over " + std::to_string(raster.width()) + "x" +
                     std::to_string(raster.height()) + "x" + std::to_string(raster.band_count());

    ChipDataset batch;
    batch.chips.reserve(batch_size);
    std::vector<size_t> positions;
    positions.reserve(batch_size);

    auto flush = [&]() {
        if (batch.chips.empty()) return;
        const std::vector<int> labels = predict_labels(model, batch);
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= static_cast<int>(scheme.size()))
                throw ConfigError("model predicted class id " + std::to_string(labels[i]) +
                                  " outside the " + std::to_string(scheme.size()) +
                                  "-class scheme");
            map.classes[positions[i]] = labels[i];
        }
        batch.chips.clear();
        positions.clear();
    };

    for (int row = 0; row < raster.height(); ++row) {
        for (int col = 0; col < raster.width(); ++col) {
            const size_t at = static_cast<size_t>(row) * raster.width() + col;
            if (!map.mask[at]) continue;
            batch.chips.push_back(extract_chip(raster, {col, row}, chip_size));
            positions.push_back(at);
            if (batch.chips.size() == batch_size) flush();
        }
    }
    flush();
    return map;
}

ExpansionGrid urban_expansion(const std::vector<ClassMap>& maps, int urban_class_id) {
    if (maps.size() < 2)
        throw ConfigError("urban expansion needs at least two years, got " +
                          std::to_string(maps.size()));
    for (const auto& map : maps) map.validate();
    for (size_t t = 1; t < maps.size(); ++t) {
        check_same_shape(maps[0], maps[t]);
        if (maps[t].year <= maps[t - 1].year)
            throw ConfigError("class maps must be ordered by strictly ascending year");
    }
    if (urban_class_id < 0 || urban_class_id >= static_cast<int>(maps[0].scheme.size()))
        throw ConfigError("urban class id " + std::to_string(urban_class_id) +
                          " is not in the scheme");

    const ClassMap& last = maps.back();
    ExpansionGrid grid;
    grid.width = last.width;
    grid.height = last.height;
    grid.first_urban_year.assign(last.pixel_count(), ExpansionGrid::kNever);
    grid.mask = last.mask;
    grid.geo = last.geo;
    grid.years.reserve(maps.size());
    for (const auto& map : maps) grid.years.push_back(map.year);

    auto urban_at = [&](size_t t, size_t i) {
        return maps[t].mask[i] != 0 && maps[t].classes[i] == urban_class_id;
    };

    for (size_t i = 0; i < grid.first_urban_year.size(); ++i) {
        if (!grid.mask[i] || !urban_at(maps.size() - 1, i)) continue;
        size_t first = maps.size() - 1;
        for (size_t t = 0; t < maps.size(); ++t) {
            if (urban_at(t, i)) {
                first = t;
                break;
            }
        }
        grid.first_urban_year[i] = maps[first].year;
        // Left the class after first appearing and came back by the final
        // year; masked intermediate years are unknown, not departures.
        for (size_t t = first + 1; t < maps.size(); ++t) {
            if (maps[t].mask[i] && maps[t].classes[i] != urban_class_id) {
                ++grid.flicker_count;
                break;
            }
        }
    }
    return grid;
}

ProportionTable class_proportions(const std::vector<ClassMap>& maps) {
    if (maps.empty()) throw EmptyInputError("no class maps for proportions");
    ProportionTable table;
    table.years.reserve(maps.size());
    table.shares.reserve(maps.size());
    for (const auto& map : maps) {
        map.validate();
        std::vector<double> counts(map.scheme.size(), 0.0);
        size_t valid = 0;
        for (size_t i = 0; i < map.pixel_count(); ++i) {
            if (!map.mask[i]) continue;
            counts[static_cast<size_t>(map.classes[i])] += 1.0;
            ++valid;
        }
        if (valid > 0)
            for (double& c : counts) c /= static_cast<double>(valid);
        table.years.push_back(map.year);
        table.shares.push_back(std::move(counts));
    }
    return table;
}

std::vector<std::vector<size_t>> transition_matrix(const ClassMap& a, const ClassMap& b) {
    a.validate();
    b.validate();
    check_same_shape(a, b);
    if (a.scheme.size() != b.scheme.size())
        throw ConfigError("transition matrix needs maps sharing one class scheme");

    const size_t n_classes = a.scheme.size();
    std::vector<std::vector<size_t>> counts(n_classes, std::vector<size_t>(n_classes, 0));
    for (size_t i = 0; i < a.pixel_count(); ++i) {
        if (!a.mask[i] || !b.mask[i]) continue;
        counts[static_cast<size_t>(a.classes[i])][static_cast<size_t>(b.classes[i])] += 1;
    }
    return counts;
}

void render_map(const ClassMap& map, const std::string& png_path) {
    map.validate();
    if (map.scheme.size() + 1 > 256)
        throw ConfigError("class scheme too large for an indexed palette");

    std::vector<pngio::Rgb> palette;
    std::vector<std::pair<std::string, pngio::Rgb>> legend;
    palette.reserve(map.scheme.size() + 1);
    for (const auto& cls : map.scheme.classes) {
        palette.push_back(cls.color);
        legend.emplace_back(cls.name, cls.color);
    }
    const uint8_t mask_index = static_cast<uint8_t>(palette.size());
    palette.push_back(kMaskColor);
    legend.emplace_back("masked", kMaskColor);

    std::vector<uint8_t> indices(map.pixel_count());
    for (size_t i = 0; i < indices.size(); ++i)
        indices[i] = map.mask[i] ? static_cast<uint8_t>(map.classes[i]) : mask_index;

    pngio::write_indexed(png_path, map.width, map.height, indices, palette);
    write_legend(png_path, legend);
}

void render_expansion(const ExpansionGrid& grid, const std::string& png_path) {
    const size_t n = static_cast<size_t>(grid.width) * static_cast<size_t>(grid.height);
    if (grid.width <= 0 || grid.height <= 0 || grid.first_urban_year.size() != n ||
        grid.mask.size() != n)
        throw ConfigError("expansion grid does not match its dimensions");
    if (grid.years.empty()) throw ConfigError("expansion grid lists no years");
    if (grid.years.size() + 2 > 256)
        throw ConfigError("too many years for an indexed palette");

    const size_t n_years = grid.years.size();
    std::vector<pngio::Rgb> palette;
    std::vector<std::pair<std::string, pngio::Rgb>> legend;
    palette.reserve(n_years + 2);
    for (size_t t = 0; t < n_years; ++t) {
        const double f = n_years == 1 ? 0.0 : static_cast<double>(t) / (n_years - 1);
        pngio::Rgb c;
        for (int ch = 0; ch < 3; ++ch)
            c[ch] = static_cast<uint8_t>(
                std::lround(kRampDark[ch] + f * (kRampLight[ch] - kRampDark[ch])));
        palette.push_back(c);
        legend.emplace_back(std::to_string(grid.years[t]), c);
    }
    const uint8_t never_index = static_cast<uint8_t>(palette.size());
    palette.push_back(kNeverColor);
    legend.emplace_back("never", kNeverColor);
    const uint8_t mask_index = static_cast<uint8_t>(palette.size());
    palette.push_back(kMaskColor);
    legend.emplace_back("masked", kMaskColor);

    std::vector<uint8_t> indices(n);
    for (size_t i = 0; i < n; ++i) {
        if (!grid.mask[i]) {
            indices[i] = mask_index;
            continue;
        }
        const int32_t year = grid.first_urban_year[i];
        if (year == ExpansionGrid::kNever) {
            indices[i] = never_index;
            continue;
        }
        const auto it = std::find(grid.years.begin(), grid.years.end(), year);
        if (it == grid.years.end())
            throw ConfigError("first-urban year " + std::to_string(year) +
                              " is not one of the grid's years");
        indices[i] = static_cast<uint8_t>(it - grid.years.begin());
    }

    pngio::write_indexed(png_path, grid.width, grid.height, indices, palette);
    write_legend(png_path, legend);
}

Raster to_raster(const ClassMap& map) {
    map.validate();
    Band band{"class_id", std::nullopt, std::vector<double>(map.pixel_count())};
    for (size_t i = 0; i < map.pixel_count(); ++i)
        band.values[i] = map.mask[i] ? static_cast<double>(map.classes[i])
                                     : std::numeric_limits<double>::quiet_NaN();
    return Raster(map.width, map.height, {std::move(band)}, map.mask, map.geo);
}

Raster to_raster(const ExpansionGrid& grid) {
    const size_t n = static_cast<size_t>(grid.width) * static_cast<size_t>(grid.height);
    Band band{"first_urban_year", std::nullopt, std::vector<double>(n)};
    for (size_t i = 0; i < n; ++i)
        band.values[i] = grid.mask[i] ? static_cast<double>(grid.first_urban_year[i])
                                      : std::numeric_limits<double>::quiet_NaN();
    return Raster(grid.width, grid.height, {std::move(band)}, grid.mask, grid.geo);
}

ClassMap classmap_from_raster(const Raster& raster, const ClassScheme& scheme, int year) {
    scheme.validate();
    int band_ix = raster.band_index("class_id");
    if (band_ix < 0) {
        if (raster.band_count() != 1)
            throw ConfigError("raster has no 'class_id' band and is not single-band");
        band_ix = 0;
    }
    const Band& band = raster.band(band_ix);

    ClassMap map;
    map.year = year;
    map.width = raster.width();
    map.height = raster.height();
    map.classes.assign(raster.pixel_count(), -1);
    map.mask = raster.mask();
    map.scheme = scheme;
    map.geo = raster.geo();
    map.provenance = "band '" + band.name + "' import";

    for (size_t i = 0; i < map.classes.size(); ++i) {
        if (!map.mask[i]) continue;
        const double v = band.values[i];
        if (!std::isfinite(v) || std::abs(v - std::round(v)) > 1e-6)
            throw ConfigError("valid pixel holds a non-integral class id");
        map.classes[i] = static_cast<int32_t>(std::llround(v));
    }
    map.validate();
    return map;
}

void write_proportions_csv(const std::string& path, const ProportionTable& table,
                           const ClassScheme& scheme) {
    scheme.validate();
    if (table.years.size() != table.shares.size())
        throw ShapeError("proportion table years and rows disagree");
    auto out = csvu::open(path);
    out << "year";
    for (const auto& cls : scheme.classes) out << ',' << csvu::field(cls.name);
    out << '\n';
    for (size_t r = 0; r < table.years.size(); ++r) {
        if (table.shares[r].size() != scheme.size())
            throw ShapeError("proportion row width does not match the scheme");
        out << table.years[r];
        for (double share : table.shares[r]) out << ',' << format_share(share);
        out << '\n';
    }
    csvu::finish(out, path);
}

void write_transitions_csv(const std::string& path,
                           const std::vector<std::vector<size_t>>& counts,
                           const ClassScheme& scheme) {
    scheme.validate();
    if (counts.size() != scheme.size())
        throw ShapeError("transition matrix does not match the scheme");
    auto out = csvu::open(path);
    out << "from\\to";
    for (const auto& cls : scheme.classes) out << ',' << csvu::field(cls.name);
    out << '\n';
    for (size_t i = 0; i < counts.size(); ++i) {
        if (counts[i].size() != scheme.size())
            throw ShapeError("transition matrix row width does not match the scheme");
        out << csvu::field(scheme.classes[i].name);
        for (size_t c : counts[i]) out << ',' << c;
        out << '\n';
    }
    csvu::finish(out, path);
}

}  // namespace landkit
