#pragma once

#include <cstdint>
#include <vector>

#include "landkit/raster.hpp"

namespace landkit {

// Which QA_PIXEL bits invalidate a pixel when set. Defaults follow the USGS
// Landsat Collection-2 layout: 1 = dilated cloud, 3 = cloud, 4 = cloud shadow.
struct QaBitSpec {
    std::vector<int> bit_positions = {1, 3, 4};

    uint16_t bit_mask() const;  // validates positions, throws ConfigError
};

// Ordered scenes of one shape sharing bands and GeoRef.
struct TimeStack {
    std::vector<std::pair<int64_t, Raster>> epochs;  // (timestamp, scene)

    void validate() const;  // throws on empty/misordered/mismatched stacks
};

// Clears the mask wherever any spec bit is set in the QA band; band values are
// untouched. Idempotent for a fixed spec.
Raster apply_qa_mask(const Raster& raster, const Band& qa_band,
                     const QaBitSpec& spec);

// Per pixel, per band: median over the epochs where the pixel is valid. Even
// counts take the lower of the two middle values so every composite value is an
// observed one. Pixels valid in zero epochs come out masked.
Raster median_composite(const TimeStack& stack);

// One composite per (year, stack) entry.
std::vector<std::pair<int, Raster>> composite_series(
    const std::vector<std::pair<int, TimeStack>>& stacks);

}  // namespace landkit
