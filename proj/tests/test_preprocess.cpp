#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "landkit/errors.hpp"
#include "landkit/preprocess.hpp"
#include "landkit/rng.hpp"
#include "test_support.hpp"

using namespace landkit;
using testsup::random_raster;
using testsup::rasters_equal;

namespace {

Band make_qa(int width, int height, const std::vector<uint16_t>& flags) {
    Band qa{"QA_PIXEL", {}, {}};
    qa.values.resize(static_cast<size_t>(width) * height);
    for (size_t i = 0; i < qa.values.size(); ++i)
        qa.values[i] = static_cast<double>(flags[i]);
    return qa;
}

TimeStack random_stack(int width, int height, int bands, size_t epochs,
                       uint64_t seed, double mask_prob) {
    TimeStack stack;
    auto shape = random_raster(width, height, bands, seed, 1.0);
    for (size_t e = 0; e < epochs; ++e) {
        Rng rng(seed * 1000 + e);
        std::vector<Band> bs;
        for (int b = 0; b < bands; ++b) {
            Band band = shape.band(b);
            for (auto& v : band.values) v = rng.next_uniform(0.0, 1.0);
            bs.push_back(std::move(band));
        }
        std::vector<uint8_t> mask(shape.pixel_count());
        for (auto& m : mask) m = rng.next_double() < mask_prob ? 1 : 0;
        stack.epochs.emplace_back(
            static_cast<int64_t>(e),
            Raster(width, height, std::move(bs), std::move(mask), shape.geo()));
    }
    return stack;
}

}  // namespace

TEST_SUITE_BEGIN("preprocess");

TEST_CASE("qa mask with no flags set leaves the mask unchanged") {
    auto r = random_raster(8, 8, 2, 41, 0.9);
    auto qa = make_qa(8, 8, std::vector<uint16_t>(64, 0));
    auto masked = apply_qa_mask(r, qa, QaBitSpec{});
    CHECK(masked.mask() == r.mask());
    CHECK(masked.band(0).values == r.band(0).values);
}

TEST_CASE("qa bit 3 masks exactly the flagged pixel") {
    auto r = random_raster(4, 4, 1, 42);
    std::vector<uint16_t> flags(16, 0);
    flags[5] = 1u << 3;
    auto masked = apply_qa_mask(r, make_qa(4, 4, flags), QaBitSpec{{3}});
    CHECK(masked.valid_count() == 15);
    CHECK_FALSE(masked.valid_at(1, 1));
}

TEST_CASE("planted flag census matches an independent scalar count") {
    // 8x8 with 13 pixels carrying bit 4; spec {3, 4}.
    Rng rng(43);
    std::vector<uint16_t> flags(64, 0);
    int planted = 0;
    while (planted < 13) {
        size_t i = static_cast<size_t>(rng.next_below(64));
        if (flags[i] == 0) {
            flags[i] = 1u << 4;
            ++planted;
        }
    }
    auto r = random_raster(8, 8, 3, 44);
    QaBitSpec spec{{3, 4}};
    auto masked = apply_qa_mask(r, make_qa(8, 8, flags), spec);

    // Oracle: count set bits with a plain scalar loop over the flag grid.
    int expected_masked = 0;
    for (uint16_t f : flags)
        if ((f & ((1u << 3) | (1u << 4))) != 0) ++expected_masked;
    CHECK(expected_masked == 13);
    CHECK(masked.valid_count() == 64 - static_cast<size_t>(expected_masked));
}

TEST_CASE("qa masking is idempotent") {
    auto r = random_raster(9, 7, 2, 45, 0.8);
    Rng rng(46);
    std::vector<uint16_t> flags(63);
    for (auto& f : flags) f = static_cast<uint16_t>(rng.next_below(65536));
    QaBitSpec spec{{1, 3, 4}};
    auto qa = make_qa(9, 7, flags);
    auto once = apply_qa_mask(r, qa, spec);
    auto twice = apply_qa_mask(once, qa, spec);
    CHECK(once.mask() == twice.mask());
}

TEST_CASE("qa shape mismatch throws") {
    auto r = random_raster(4, 4, 1, 47);
    auto qa = make_qa(3, 3, std::vector<uint16_t>(9, 0));
    CHECK_THROWS_AS(apply_qa_mask(r, qa, QaBitSpec{}), ShapeError);
}

TEST_CASE("qa bit spec validation") {
    CHECK_THROWS_AS(QaBitSpec{{}}.bit_mask(), ConfigError);
    CHECK_THROWS_AS(QaBitSpec{{16}}.bit_mask(), ConfigError);
    CHECK_THROWS_AS(QaBitSpec{{-1}}.bit_mask(), ConfigError);
    CHECK(QaBitSpec{{1, 3, 4}}.bit_mask() == 0b11010);
}

TEST_CASE("single-epoch composite is the identity") {
    auto r = random_raster(6, 5, 3, 48, 0.7);
    TimeStack stack;
    stack.epochs.emplace_back(0, r);
    auto composite = median_composite(stack);
    CHECK(rasters_equal(r, composite, /*compare_masked_values=*/false));
}

TEST_CASE("odd-count median picks the middle observation") {
    std::vector<double> per_epoch = {3.0, 1.0, 2.0};
    TimeStack stack;
    GeoRef geo;
    for (size_t e = 0; e < per_epoch.size(); ++e) {
        Band b{"v", {}, {per_epoch[e]}};
        stack.epochs.emplace_back(static_cast<int64_t>(e),
                                  Raster(1, 1, {b}, {1}, geo));
    }
    CHECK(median_composite(stack).band(0).values[0] == 2.0);
}

TEST_CASE("even-count median takes the lower middle") {
    TimeStack stack;
    GeoRef geo;
    int e = 0;
    for (double v : {5.0, 1.0, 4.0, 2.0}) {
        Band b{"v", {}, {v}};
        stack.epochs.emplace_back(e++, Raster(1, 1, {b}, {1}, geo));
    }
    CHECK(median_composite(stack).band(0).values[0] == 2.0);
}

TEST_CASE("random stacks match the brute-force sort oracle") {
    for (uint64_t seed : {100, 200, 300}) {
        auto stack = random_stack(16, 16, 5, 5, seed, 0.7);
        auto composite = median_composite(stack);
        for (size_t i = 0; i < composite.pixel_count(); ++i) {
            std::vector<double> vals;
            for (const auto& [ts, scene] : stack.epochs)
                if (scene.mask()[i]) vals.push_back(scene.band(2).values[i]);
            if (vals.empty()) {
                CHECK(composite.mask()[i] == 0);
            } else {
                std::sort(vals.begin(), vals.end());
                CHECK(composite.mask()[i] == 1);
                CHECK(composite.band(2).values[i] == vals[(vals.size() - 1) / 2]);
            }
        }
    }
}

TEST_CASE("composite is permutation-invariant over epochs") {
    auto stack = random_stack(8, 8, 2, 4, 77, 0.6);
    auto base = median_composite(stack);
    TimeStack reversed;
    int64_t t = 0;
    for (auto it = stack.epochs.rbegin(); it != stack.epochs.rend(); ++it)
        reversed.epochs.emplace_back(t++, it->second);
    auto flipped = median_composite(reversed);
    CHECK(base.mask() == flipped.mask());
    CHECK(rasters_equal(base, flipped, /*compare_masked_values=*/false));
}

TEST_CASE("coverage is monotone in epoch count") {
    auto stack = random_stack(12, 12, 1, 6, 88, 0.4);
    size_t prev_valid = 0;
    for (size_t k = 1; k <= stack.epochs.size(); ++k) {
        TimeStack prefix;
        prefix.epochs.assign(stack.epochs.begin(), stack.epochs.begin() + k);
        size_t valid = median_composite(prefix).valid_count();
        CHECK(valid >= prev_valid);
        prev_valid = valid;
    }
}

TEST_CASE("empty stack throws") {
    CHECK_THROWS_AS(median_composite(TimeStack{}), EmptyInputError);
}

TEST_CASE("composite_series maps years to composites") {
    std::vector<std::pair<int, TimeStack>> stacks;
    for (int year = 2014; year < 2024; ++year)
        stacks.emplace_back(year,
                            random_stack(4, 4, 2, 3, 1000 + year, 0.9));
    auto series = composite_series(stacks);
    REQUIRE(series.size() == 10);
    for (size_t i = 0; i < series.size(); ++i)
        CHECK(series[i].first == 2014 + static_cast<int>(i));

    CHECK(composite_series({}).empty());
}

TEST_CASE("fully masked stack composites to a fully masked raster") {
    auto stack = random_stack(5, 5, 1, 3, 99, 0.0);
    auto composite = median_composite(stack);
    CHECK(composite.valid_count() == 0);
}

TEST_SUITE_END();
