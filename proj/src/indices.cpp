#include "landkit/indices.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "landkit/errors.hpp"

namespace landkit {

IndexRecipe ndvi_recipe() { return {"ndvi", "nir", "red"}; }
IndexRecipe ndwi_recipe() { return {"ndwi", "green", "nir"}; }
IndexRecipe mndwi_recipe() { return {"mndwi", "green", "swir1"}; }
IndexRecipe ndbi_recipe() { return {"ndbi", "swir1", "nir"}; }

IndexRecipe recipe_for(const std::string& name) {
    std::string key = name;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (key == "ndvi") return ndvi_recipe();
    if (key == "ndwi") return ndwi_recipe();
    if (key == "mndwi") return mndwi_recipe();
    if (key == "ndbi") return ndbi_recipe();
    throw ConfigError("unknown spectral index '" + name + "'");
}

std::vector<IndexRecipe> default_recipes() {
    return {ndvi_recipe(), mndwi_recipe(), ndbi_recipe()};
}

Band compute_index(const Raster& raster, const IndexRecipe& recipe) {
    const auto& a = raster.band(recipe.band_a).values;
    const auto& b = raster.band(recipe.band_b).values;
    const auto& mask = raster.mask();

    Band out;
    out.name = recipe.name;
    out.values.assign(a.size(), std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < a.size(); ++i) {
        if (!mask[i]) continue;
        const double denom = a[i] + b[i];
        if (denom != 0.0) out.values[i] = (a[i] - b[i]) / denom;
    }
    return out;
}

Band ndvi(const Raster& raster) { return compute_index(raster, ndvi_recipe()); }
Band ndwi(const Raster& raster) { return compute_index(raster, ndwi_recipe()); }
Band mndwi(const Raster& raster) { return compute_index(raster, mndwi_recipe()); }
Band ndbi(const Raster& raster) { return compute_index(raster, ndbi_recipe()); }

Raster append_feature_bands(const Raster& raster,
                            const std::vector<IndexRecipe>& recipes) {
    std::set<std::string> taken;
    for (const auto& b : raster.bands()) taken.insert(b.name);
    for (const auto& r : recipes)
        if (!taken.insert(r.name).second)
            throw NameCollision("feature band name '" + r.name +
                                "' already in use");

    std::vector<Band> bands = raster.bands();
    std::vector<uint8_t> mask = raster.mask();
    for (const auto& recipe : recipes) {
        Band index = compute_index(raster, recipe);
        // A valid pixel with a NaN index hit a zero denominator: no information.
        for (size_t i = 0; i < mask.size(); ++i)
            if (mask[i] && std::isnan(index.values[i])) mask[i] = 0;
        bands.push_back(std::move(index));
    }
    return Raster(raster.width(), raster.height(), std::move(bands),
                  std::move(mask), raster.geo());
}

}  // namespace landkit
