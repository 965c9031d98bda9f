#include "landkit/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "landkit/errors.hpp"

namespace landkit {

uint16_t QaBitSpec::bit_mask() const {
    if (bit_positions.empty())
        throw ConfigError("QA bit spec must name at least one bit");
    uint16_t mask = 0;
    for (int b : bit_positions) {
        if (b < 0 || b > 15)
            throw ConfigError("QA bit index " + std::to_string(b) +
                              " outside [0, 15]");
        mask |= static_cast<uint16_t>(1u << b);
    }
    return mask;
}

void TimeStack::validate() const {
    if (epochs.empty()) throw EmptyInputError("time stack has no epochs");
    const Raster& first = epochs.front().second;
    int64_t prev_ts = epochs.front().first;
    for (size_t i = 1; i < epochs.size(); ++i) {
        if (epochs[i].first <= prev_ts)
            throw ShapeError("time stack timestamps must be strictly increasing");
        prev_ts = epochs[i].first;
        const Raster& r = epochs[i].second;
        if (r.width() != first.width() || r.height() != first.height() ||
            r.band_count() != first.band_count())
            throw ShapeError("time stack rasters must share one shape");
        for (int b = 0; b < first.band_count(); ++b)
            if (r.band(b).name != first.band(b).name)
                throw ShapeError("time stack rasters must share band names");
        if (!(r.geo() == first.geo()))
            throw ShapeError("time stack rasters must share one GeoRef");
    }
}

Raster apply_qa_mask(const Raster& raster, const Band& qa_band,
                     const QaBitSpec& spec) {
    if (qa_band.values.size() != raster.pixel_count())
        throw ShapeError("QA band shape does not match raster");
    const uint16_t bits = spec.bit_mask();

    std::vector<uint8_t> mask = raster.mask();
    for (size_t i = 0; i < mask.size(); ++i) {
        const double qv = qa_band.values[i];
        const auto flags = static_cast<uint16_t>(std::llround(qv));
        if ((flags & bits) != 0) mask[i] = 0;
    }
    return Raster(raster.width(), raster.height(), raster.bands(),
                  std::move(mask), raster.geo());
}

Raster median_composite(const TimeStack& stack) {
    stack.validate();
    const Raster& first = stack.epochs.front().second;
    const size_t n = first.pixel_count();
    const int n_bands = first.band_count();
    const size_t n_epochs = stack.epochs.size();

    std::vector<Band> out_bands;
    out_bands.reserve(n_bands);
    for (int b = 0; b < n_bands; ++b) {
        Band band;
        band.name = first.band(b).name;
        band.wavelength_um = first.band(b).wavelength_um;
        band.values.assign(n, std::numeric_limits<double>::quiet_NaN());
        out_bands.push_back(std::move(band));
    }
    std::vector<uint8_t> out_mask(n, 0);

    std::vector<double> samples;
    samples.reserve(n_epochs);
    for (size_t i = 0; i < n; ++i) {
        size_t valid_epochs = 0;
        for (const auto& [ts, scene] : stack.epochs)
            valid_epochs += scene.mask()[i] != 0;
        if (valid_epochs == 0) continue;
        out_mask[i] = 1;
        for (int b = 0; b < n_bands; ++b) {
            samples.clear();
            for (const auto& [ts, scene] : stack.epochs)
                if (scene.mask()[i] != 0)
                    samples.push_back(scene.band(b).values[i]);
            // Lower-of-two-middles: index (k-1)/2 covers odd and even counts.
            const size_t mid = (samples.size() - 1) / 2;
            std::nth_element(samples.begin(), samples.begin() + mid,
                             samples.end());
            out_bands[b].values[i] = samples[mid];
        }
    }
    return Raster(first.width(), first.height(), std::move(out_bands),
                  std::move(out_mask), first.geo());
}

std::vector<std::pair<int, Raster>> composite_series(
    const std::vector<std::pair<int, TimeStack>>& stacks) {
    std::vector<std::pair<int, Raster>> out;
    out.reserve(stacks.size());
    for (const auto& [year, stack] : stacks)
        out.emplace_back(year, median_composite(stack));
    return out;
}

}  // namespace landkit
