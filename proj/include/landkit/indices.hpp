#pragma once

#include <string>
#include <vector>

#include "landkit/raster.hpp"

namespace landkit {

// Normalized-difference recipe: value = (A - B) / (A + B) over named bands.
struct IndexRecipe {
    std::string name;    // output band name, unique within the target raster
    std::string band_a;
    std::string band_b;
};

// Built-in recipes over the canonical OLI band names (nir, red, green, swir1).
IndexRecipe ndvi_recipe();
IndexRecipe ndwi_recipe();
IndexRecipe mndwi_recipe();
IndexRecipe ndbi_recipe();

// Recipe by (case-insensitive) index name; throws ConfigError for unknown ones.
IndexRecipe recipe_for(const std::string& name);

// The default feature stack appends NDVI, MNDWI, and NDBI. MNDWI is preferred
// over NDWI as the water index; NDWI remains available by name.
std::vector<IndexRecipe> default_recipes();

// One band of (A-B)/(A+B). Pixels that are masked in the input, or whose
// denominator is exactly zero, come out as NaN; append_feature_bands folds
// those NaNs into the raster mask. Throws BandNotFound for missing inputs.
Band compute_index(const Raster& raster, const IndexRecipe& recipe);

Band ndvi(const Raster& raster);   // (nir - red) / (nir + red)
Band ndwi(const Raster& raster);   // (green - nir) / (green + nir)
Band mndwi(const Raster& raster);  // (green - swir1) / (green + swir1)
Band ndbi(const Raster& raster);   // (swir1 - nir) / (swir1 + nir)

// Original bands plus one band per recipe; the mask additionally drops pixels
// where any recipe hit a zero denominator. Throws NameCollision if a recipe
// name repeats or shadows an existing band.
Raster append_feature_bands(const Raster& raster,
                            const std::vector<IndexRecipe>& recipes);

}  // namespace landkit
