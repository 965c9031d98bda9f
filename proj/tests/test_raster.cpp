#include <doctest.h>
#include <tiffio.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "landkit/errors.hpp"
#include "landkit/geotiff.hpp"
#include "landkit/portable.hpp"
#include "landkit/raster.hpp"
#include "test_support.hpp"

using namespace landkit;
using testsup::FixturePixel;
using testsup::random_raster;
using testsup::rasters_equal;
using testsup::TempDir;

TEST_SUITE_BEGIN("raster");

TEST_CASE("raster invariants are enforced at construction") {
    std::vector<Band> bands;
    bands.push_back({"a", {}, std::vector<double>(4, 0.0)});
    std::vector<uint8_t> mask(4, 1);

    CHECK_THROWS_AS(Raster(0, 2, bands, mask, GeoRef{}), ShapeError);
    CHECK_THROWS_AS(Raster(2, 2, {}, mask, GeoRef{}), ShapeError);
    CHECK_THROWS_AS(Raster(2, 2, bands, std::vector<uint8_t>(3, 1), GeoRef{}),
                    ShapeError);

    auto dup = bands;
    dup.push_back({"a", {}, std::vector<double>(4, 1.0)});
    CHECK_THROWS_AS(Raster(2, 2, dup, mask, GeoRef{}), NameCollision);

    GeoRef bad_geo;
    bad_geo.pixel_dlon = 0.0;
    CHECK_THROWS_AS(Raster(2, 2, bands, mask, bad_geo), ShapeError);

    Raster r(2, 2, bands, mask, GeoRef{});
    CHECK(r.width() == 2);
    CHECK(r.band("a").values.size() == 4);
    CHECK_THROWS_AS(r.band("nope"), BandNotFound);
}

TEST_CASE("clip of the full extent is the identity") {
    auto r = random_raster(7, 5, 3, 11);
    auto c = clip(r, {0, 0, 7, 5});
    CHECK(rasters_equal(r, c));
}

TEST_CASE("clip translates values and origin") {
    auto r = random_raster(10, 10, 2, 12);
    auto c = clip(r, {2, 2, 4, 4});
    CHECK(c.width() == 4);
    CHECK(c.height() == 4);
    CHECK(c.value_at(0, 0, 0) == r.value_at(0, 2, 2));
    CHECK(c.value_at(1, 3, 3) == r.value_at(1, 5, 5));
    CHECK(c.geo().origin_lon ==
          doctest::Approx(r.geo().origin_lon + 2 * r.geo().pixel_dlon));
    CHECK(c.geo().origin_lat ==
          doctest::Approx(r.geo().origin_lat + 2 * r.geo().pixel_dlat));
}

TEST_CASE("clip out of bounds throws") {
    auto r = random_raster(10, 10, 1, 13);
    CHECK_THROWS_AS(clip(r, {8, 0, 4, 4}), BoundsError);
    CHECK_THROWS_AS(clip(r, {0, 8, 4, 4}), BoundsError);
    CHECK_THROWS_AS(clip(r, {-1, 0, 4, 4}), BoundsError);
    CHECK_THROWS_AS(clip(r, {0, 0, 0, 4}), BoundsError);
}

TEST_CASE("nested clips compose") {
    auto r = random_raster(20, 16, 2, 14, 0.8);
    auto c1 = clip(clip(r, {3, 2, 10, 9}), {1, 4, 5, 5});
    auto c2 = clip(r, {4, 6, 5, 5});
    CHECK(rasters_equal(c1, c2));
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("portable");

TEST_CASE("portable round trip is byte exact") {
    TempDir tmp("portable");
    auto r = random_raster(9, 6, 4, 21, 0.7);
    const auto path = tmp.file("r.lkr");
    write_portable(r, path);
    auto back = read_portable(path);
    CHECK(rasters_equal(r, back));

    // Writing what was read reproduces the file byte for byte.
    const auto path2 = tmp.file("r2.lkr");
    write_portable(back, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("portable 2x2 known values") {
    TempDir tmp("portable2");
    Band band{"b", {}, {1.0, 2.0, 3.0, 4.0}};
    Raster r(2, 2, {band}, {1, 1, 1, 1}, GeoRef{});
    const auto path = tmp.file("r.lkr");
    write_portable(r, path);
    auto back = read_portable(path);
    CHECK(back.band(0).values == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("portable wrong magic is a FormatError") {
    TempDir tmp("portable3");
    const auto path = tmp.file("bogus.lkr");
    std::ofstream(path, std::ios::binary) << "NOPExxxxxxxxxxxxxxxx";
    CHECK_THROWS_AS(read_portable(path), FormatError);
}

TEST_CASE("portable mask is preserved exactly") {
    TempDir tmp("portable4");
    auto r = random_raster(5, 5, 2, 22, 0.5);
    const auto path = tmp.file("r.lkr");
    write_portable(r, path);
    CHECK(read_portable(path).mask() == r.mask());
}

TEST_CASE("portable truncated file is an IoError") {
    TempDir tmp("portable5");
    auto r = random_raster(6, 6, 2, 23);
    const auto path = tmp.file("r.lkr");
    write_portable(r, path);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(read_portable(path), IoError);
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("geotiff");

TEST_CASE("geotiff round trip preserves values, mask, georef") {
    TempDir tmp("gtiff");
    auto r = random_raster(33, 17, 5, 31, 0.85);
    const auto path = tmp.file("r.tif");
    write_geotiff(r, path);
    auto back = read_geotiff(path);
    // Masked pixels hold the nodata sentinel after the trip; valid ones are exact.
    CHECK(rasters_equal(r, back, /*compare_masked_values=*/false));
    CHECK(back.geo() == r.geo());
}

TEST_CASE("nodata pixels come back masked") {
    TempDir tmp("gtiff_nodata");
    // 3-band 4x4, nodata = 0, exactly one all-zero pixel at (2, 1).
    std::vector<double> values(4 * 4 * 3, 7.0);
    for (int s = 0; s < 3; ++s) values[(1 * 4 + 2) * 3 + s] = 0.0;
    const double nodata = 0.0;
    const auto path = tmp.file("fixture.tif");
    testsup::write_foreign_tiff(path, 4, 4, 3, FixturePixel::U8, values, false,
                                &nodata);
    auto r = read_geotiff(path);
    CHECK(r.valid_count() == 15);
    CHECK_FALSE(r.valid_at(2, 1));
    CHECK(r.valid_at(0, 0));
}

TEST_CASE("all foreign pixel types decode") {
    TempDir tmp("gtiff_types");
    std::vector<double> values = {0, 1, 2, 3, 100, 200, 31, 255};
    for (auto type : {FixturePixel::U8, FixturePixel::U16, FixturePixel::I16,
                      FixturePixel::F32, FixturePixel::F64}) {
        const auto path = tmp.file("t.tif");
        testsup::write_foreign_tiff(path, 4, 2, 1, type, values);
        auto r = read_geotiff(path);
        CHECK(r.width() == 4);
        CHECK(r.band(0).values == values);
        CHECK(r.band(0).name == "band_1");
    }
}

TEST_CASE("tiled layout decodes like strips") {
    TempDir tmp("gtiff_tiled");
    const int w = 37, h = 21;
    std::vector<double> values(static_cast<size_t>(w) * h * 2);
    for (size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i % 501);
    const auto ps = tmp.file("s.tif");
    const auto pt = tmp.file("t.tif");
    testsup::write_foreign_tiff(ps, w, h, 2, FixturePixel::F32, values, false);
    testsup::write_foreign_tiff(pt, w, h, 2, FixturePixel::F32, values, true);
    auto rs = read_geotiff(ps);
    auto rt = read_geotiff(pt);
    CHECK(rasters_equal(rs, rt));
}

TEST_CASE("all-false mask writes a file of pure nodata") {
    TempDir tmp("gtiff_allmask");
    auto base = random_raster(6, 4, 2, 32);
    Raster r(base.width(), base.height(), base.bands(),
             std::vector<uint8_t>(base.pixel_count(), 0), base.geo());
    const auto path = tmp.file("masked.tif");
    write_geotiff(r, path);
    auto back = read_geotiff(path);
    CHECK(back.valid_count() == 0);
    for (double v : back.band(0).values) CHECK(std::isnan(v));
}

TEST_CASE("missing geotransform is a FormatError") {
    TempDir tmp("gtiff_nogeo");
    const auto path = tmp.file("plain.tif");
    // Bare TIFF without geo tags, written through libtiff directly.
    TIFF* tif = TIFFOpen(path.c_str(), "w");
    REQUIRE(tif != nullptr);
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, 2u);
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, 2u);
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, uint16_t(1));
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, uint16_t(8));
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, 2u);
    uint8_t row[2] = {1, 2};
    TIFFWriteScanline(tif, row, 0, 0);
    TIFFWriteScanline(tif, row, 1, 0);
    TIFFClose(tif);
    CHECK_THROWS_AS(read_geotiff(path), FormatError);
}

TEST_CASE("unreadable and truncated files raise IoError") {
    TempDir tmp("gtiff_bad");
    CHECK_THROWS_AS(read_geotiff(tmp.file("missing.tif")), IoError);

    auto r = random_raster(16, 16, 1, 33);
    const auto path = tmp.file("trunc.tif");
    write_geotiff(r, path);
    std::filesystem::resize_file(path, 64);
    CHECK_THROWS_AS(read_geotiff(path), IoError);
}

TEST_CASE("non-TIFF bytes raise FormatError") {
    TempDir tmp("gtiff_nottiff");
    const auto path = tmp.file("junk.tif");
    std::ofstream(path) << "this is not a tiff";
    CHECK_THROWS_AS(read_geotiff(path), FormatError);
}

TEST_CASE("writing to an unwritable path raises IoError") {
    TempDir tmp("gtiff_ro");
    auto r = random_raster(4, 4, 1, 34);
    // Directory does not exist (root ignores directory write permissions, so a
    // read-only directory would not fail under CI).
    CHECK_THROWS_AS(write_geotiff(r, (tmp.path() / "no_dir" / "x.tif").string()),
                    IoError);
    CHECK_THROWS_AS(write_portable(r, (tmp.path() / "no_dir" / "x.lkr").string()),
                    IoError);
}

TEST_CASE("band names survive the round trip") {
    TempDir tmp("gtiff_names");
    Band b1{"SR_B4", {}, std::vector<double>(4, 1.0)};
    Band b2{"NDVI <&>", {}, std::vector<double>(4, 2.0)};
    Raster r(2, 2, {b1, b2}, std::vector<uint8_t>(4, 1), GeoRef{});
    const auto path = tmp.file("named.tif");
    write_geotiff(r, path);
    auto back = read_geotiff(path);
    CHECK(back.band(0).name == "SR_B4");
    CHECK(back.band(1).name == "NDVI <&>");
}

TEST_CASE("CRS strings survive: EPSG and free-form") {
    TempDir tmp("gtiff_crs");
    for (const std::string crs : {"EPSG:4326", "EPSG:32760", "local-grid-7"}) {
        auto base = random_raster(3, 3, 1, 35);
        GeoRef geo = base.geo();
        geo.crs = crs;
        Raster r(3, 3, base.bands(), base.mask(), geo);
        const auto path = tmp.file("crs.tif");
        write_geotiff(r, path);
        CHECK(read_geotiff(path).geo().crs == crs);
    }
}

TEST_SUITE_END();
