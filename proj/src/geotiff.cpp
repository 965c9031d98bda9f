#include "landkit/geotiff.hpp"

#include <tiffio.h>

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <vector>

#include "landkit/errors.hpp"

namespace landkit {

namespace {

// GeoTIFF and GDAL private tags; libtiff core does not know them.
constexpr ttag_t kTagModelPixelScale = 33550;
constexpr ttag_t kTagModelTiepoint = 33922;
constexpr ttag_t kTagModelTransformation = 34264;
constexpr ttag_t kTagGeoKeyDirectory = 34735;
constexpr ttag_t kTagGeoAsciiParams = 34737;
constexpr ttag_t kTagGdalMetadata = 42112;
constexpr ttag_t kTagGdalNodata = 42113;

constexpr uint16_t kKeyGtModelType = 1024;
constexpr uint16_t kKeyGtRasterType = 1025;
constexpr uint16_t kKeyGtCitation = 1026;
constexpr uint16_t kKeyGeographicType = 2048;
constexpr uint16_t kKeyProjectedCsType = 3072;

const TIFFFieldInfo kCustomFields[] = {
    {kTagModelPixelScale, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelPixelScaleTag")},
    {kTagModelTiepoint, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelTiepointTag")},
    {kTagModelTransformation, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("ModelTransformationTag")},
    {kTagGeoKeyDirectory, -1, -1, TIFF_SHORT, FIELD_CUSTOM, 1, 1,
     const_cast<char*>("GeoKeyDirectoryTag")},
    {kTagGeoAsciiParams, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
     const_cast<char*>("GeoAsciiParamsTag")},
    {kTagGdalMetadata, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
     const_cast<char*>("GDALMetadata")},
    {kTagGdalNodata, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
     const_cast<char*>("GDALNoDataValue")},
};

TIFFExtendProc g_parent_extender = nullptr;

void tag_extender(TIFF* tif) {
    TIFFMergeFieldInfo(tif, kCustomFields,
                       sizeof(kCustomFields) / sizeof(kCustomFields[0]));
    if (g_parent_extender) g_parent_extender(tif);
}

thread_local std::string g_last_tiff_error;

void error_handler(const char* module, const char* fmt, va_list args) {
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    g_last_tiff_error = module ? std::string(module) + ": " + buf : buf;
}

void warning_handler(const char*, const char*, va_list) {}

void init_libtiff_once() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        g_parent_extender = TIFFSetTagExtender(tag_extender);
        TIFFSetErrorHandler(error_handler);
        TIFFSetWarningHandler(warning_handler);
    });
}

struct TiffCloser {
    void operator()(TIFF* t) const {
        if (t) TIFFClose(t);
    }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

enum class PixelType { U8, U16, I16, F32, F64 };

PixelType resolve_pixel_type(uint16_t bits, uint16_t sample_format) {
    if (sample_format == SAMPLEFORMAT_UINT || sample_format == 0) {
        if (bits == 8) return PixelType::U8;
        if (bits == 16) return PixelType::U16;
    } else if (sample_format == SAMPLEFORMAT_INT) {
        if (bits == 16) return PixelType::I16;
    } else if (sample_format == SAMPLEFORMAT_IEEEFP) {
        if (bits == 32) return PixelType::F32;
        if (bits == 64) return PixelType::F64;
    }
    std::ostringstream msg;
    msg << "unsupported pixel type: " << bits << "-bit sample format "
        << sample_format;
    throw FormatError(msg.str());
}

double decode_sample(const uint8_t* p, PixelType t) {
    switch (t) {
        case PixelType::U8:
            return static_cast<double>(*p);
        case PixelType::U16: {
            uint16_t v;
            std::memcpy(&v, p, 2);
            return static_cast<double>(v);
        }
        case PixelType::I16: {
            int16_t v;
            std::memcpy(&v, p, 2);
            return static_cast<double>(v);
        }
        case PixelType::F32: {
            float v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v);
        }
        case PixelType::F64: {
            double v;
            std::memcpy(&v, p, 8);
            return v;
        }
    }
    return 0.0;
}

size_t bytes_per_sample(PixelType t) {
    switch (t) {
        case PixelType::U8: return 1;
        case PixelType::U16:
        case PixelType::I16: return 2;
        case PixelType::F32: return 4;
        case PixelType::F64: return 8;
    }
    return 0;
}

// True when the first bytes carry a TIFF magic; used to pick between "broken
// TIFF" (IoError) and "not a TIFF at all" (FormatError).
bool has_tiff_magic(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    char b[4] = {0, 0, 0, 0};
    is.read(b, 4);
    if (!is) return false;
    const bool little = b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0;
    const bool big = b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42;
    const bool big_tiff = (b[0] == 'I' && b[1] == 'I' && b[2] == 43) ||
                          (b[0] == 'M' && b[1] == 'M' && b[3] == 43);
    return little || big || big_tiff;
}

struct Geotransform {
    double corner_lon = 0.0;  // model position of the top-left pixel corner
    double corner_lat = 0.0;
    double dlon = 1.0;
    double dlat = -1.0;
};

Geotransform read_geotransform(TIFF* tif, const std::string& path) {
    uint16_t count = 0;
    double* scale = nullptr;
    double* tiepoints = nullptr;
    Geotransform gt;
    if (TIFFGetField(tif, kTagModelPixelScale, &count, &scale) && count >= 2) {
        gt.dlon = scale[0];
        gt.dlat = -scale[1];
        uint16_t tp_count = 0;
        if (!TIFFGetField(tif, kTagModelTiepoint, &tp_count, &tiepoints) ||
            tp_count < 6)
            throw FormatError("'" + path + "': pixel scale without a tiepoint");
        // Tiepoint maps raster (i, j) to model (x, y); shift back to (0, 0).
        gt.corner_lon = tiepoints[3] - tiepoints[0] * gt.dlon;
        gt.corner_lat = tiepoints[4] - tiepoints[1] * gt.dlat;
        return gt;
    }
    double* xform = nullptr;
    if (TIFFGetField(tif, kTagModelTransformation, &count, &xform) &&
        count >= 16) {
        if (xform[1] != 0.0 || xform[4] != 0.0)
            throw FormatError("'" + path + "': rotated geotransforms are not supported");
        gt.dlon = xform[0];
        gt.dlat = xform[5];
        gt.corner_lon = xform[3];
        gt.corner_lat = xform[7];
        return gt;
    }
    throw FormatError("'" + path + "' has no geotransform");
}

std::string read_crs(TIFF* tif) {
    uint16_t count = 0;
    uint16_t* keys = nullptr;
    char* ascii = nullptr;
    std::string ascii_params;
    if (TIFFGetField(tif, kTagGeoAsciiParams, &ascii) && ascii)
        ascii_params = ascii;

    if (TIFFGetField(tif, kTagGeoKeyDirectory, &count, &keys) && count >= 4) {
        const uint16_t n_keys = keys[3];
        std::string citation;
        int epsg = 0;
        for (uint16_t k = 1; k <= n_keys && (k * 4 + 3) < count; ++k) {
            const uint16_t id = keys[k * 4];
            const uint16_t location = keys[k * 4 + 1];
            const uint16_t cnt = keys[k * 4 + 2];
            const uint16_t value = keys[k * 4 + 3];
            if ((id == kKeyProjectedCsType || id == kKeyGeographicType) &&
                location == 0) {
                if (epsg == 0 || id == kKeyProjectedCsType) epsg = value;
            } else if (id == kKeyGtCitation && location == kTagGeoAsciiParams) {
                size_t end = std::min<size_t>(value + cnt, ascii_params.size());
                citation = ascii_params.substr(value, end - value);
                while (!citation.empty() &&
                       (citation.back() == '|' || citation.back() == '\0'))
                    citation.pop_back();
            }
        }
        if (epsg > 0) return "EPSG:" + std::to_string(epsg);
        if (!citation.empty()) return citation;
    }
    return "EPSG:4326";
}

std::string xml_unescape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size();) {
        if (s[i] == '&') {
            if (s.compare(i, 5, "&amp;") == 0) { out += '&'; i += 5; continue; }
            if (s.compare(i, 4, "&lt;") == 0) { out += '<'; i += 4; continue; }
            if (s.compare(i, 4, "&gt;") == 0) { out += '>'; i += 4; continue; }
            if (s.compare(i, 6, "&quot;") == 0) { out += '"'; i += 6; continue; }
        }
        out += s[i++];
    }
    return out;
}

// GDAL stores band descriptions inside an XML blob. A full XML parser would be
// overkill for the one element shape GDAL emits, so scan for the items directly.
std::vector<std::string> read_band_names(TIFF* tif, int n_bands) {
    std::vector<std::string> names(n_bands);
    char* meta = nullptr;
    std::string xml;
    if (TIFFGetField(tif, kTagGdalMetadata, &meta) && meta) xml = meta;
    for (int b = 0; b < n_bands; ++b) {
        std::string name;
        std::string probe = "sample=\"" + std::to_string(b) + "\"";
        size_t pos = 0;
        while ((pos = xml.find("<Item ", pos)) != std::string::npos) {
            size_t close = xml.find('>', pos);
            size_t end = xml.find("</Item>", pos);
            if (close == std::string::npos || end == std::string::npos) break;
            std::string attrs = xml.substr(pos, close - pos);
            if (attrs.find(probe) != std::string::npos &&
                attrs.find("role=\"description\"") != std::string::npos) {
                name = xml_unescape(xml.substr(close + 1, end - close - 1));
                break;
            }
            pos = end + 1;
        }
        names[b] = name.empty() ? "band_" + std::to_string(b + 1) : name;
    }
    return names;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

Raster read_geotiff(const std::string& path) {
    init_libtiff_once();
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw IoError("cannot open '" + path + "'");
    }
    const bool looks_tiff = has_tiff_magic(path);
    g_last_tiff_error.clear();
    TiffPtr tif(TIFFOpen(path.c_str(), "r"));
    if (!tif) {
        if (!looks_tiff)
            throw FormatError("'" + path + "' is not a TIFF file");
        throw IoError("cannot read '" + path + "': " + g_last_tiff_error);
    }

    uint32_t width = 0, height = 0;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
    if (width == 0 || height == 0)
        throw FormatError("'" + path + "' has no image dimensions");

    uint16_t samples = 1, bits = 0, sample_format = SAMPLEFORMAT_UINT;
    uint16_t planar = PLANARCONFIG_CONTIG;
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &samples);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &sample_format);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
    if (samples == 0) throw FormatError("'" + path + "' has zero samples per pixel");
    const PixelType ptype = resolve_pixel_type(bits, sample_format);
    const size_t sample_bytes = bytes_per_sample(ptype);

    const Geotransform gt = read_geotransform(tif.get(), path);

    const size_t n = static_cast<size_t>(width) * height;
    std::vector<Band> bands(samples);
    auto names = read_band_names(tif.get(), samples);
    for (int b = 0; b < samples; ++b) {
        bands[b].name = names[b];
        bands[b].values.assign(n, 0.0);
    }

    const int planes = planar == PLANARCONFIG_SEPARATE ? samples : 1;
    const int interleaved = planar == PLANARCONFIG_SEPARATE ? 1 : samples;

    auto store_row = [&](const uint8_t* src, uint32_t row, uint32_t col0,
                         uint32_t ncols, int plane) {
        for (uint32_t c = 0; c < ncols; ++c) {
            for (int s = 0; s < interleaved; ++s) {
                const int band = planes > 1 ? plane : s;
                bands[band].values[static_cast<size_t>(row) * width + col0 + c] =
                    decode_sample(src + (static_cast<size_t>(c) * interleaved + s) *
                                            sample_bytes,
                                  ptype);
            }
        }
    };

    if (TIFFIsTiled(tif.get())) {
        uint32_t tile_w = 0, tile_h = 0;
        TIFFGetField(tif.get(), TIFFTAG_TILEWIDTH, &tile_w);
        TIFFGetField(tif.get(), TIFFTAG_TILELENGTH, &tile_h);
        if (tile_w == 0 || tile_h == 0)
            throw FormatError("'" + path + "' has invalid tile dimensions");
        std::vector<uint8_t> buf(TIFFTileSize(tif.get()));
        for (int plane = 0; plane < planes; ++plane) {
            for (uint32_t ty = 0; ty < height; ty += tile_h) {
                for (uint32_t tx = 0; tx < width; tx += tile_w) {
                    ttile_t tile = TIFFComputeTile(tif.get(), tx, ty, 0,
                                                   static_cast<uint16_t>(plane));
                    g_last_tiff_error.clear();
                    if (TIFFReadEncodedTile(tif.get(), tile, buf.data(),
                                            buf.size()) < 0)
                        throw IoError("failed reading tile from '" + path +
                                      "': " + g_last_tiff_error);
                    const uint32_t rows = std::min(tile_h, height - ty);
                    const uint32_t cols = std::min(tile_w, width - tx);
                    for (uint32_t r = 0; r < rows; ++r)
                        store_row(buf.data() + static_cast<size_t>(r) * tile_w *
                                                   interleaved * sample_bytes,
                                  ty + r, tx, cols, plane);
                }
            }
        }
    } else {
        uint32_t rows_per_strip = 0;
        TIFFGetFieldDefaulted(tif.get(), TIFFTAG_ROWSPERSTRIP, &rows_per_strip);
        if (rows_per_strip == 0 || rows_per_strip > height)
            rows_per_strip = height;
        std::vector<uint8_t> buf(TIFFStripSize(tif.get()));
        for (int plane = 0; plane < planes; ++plane) {
            for (uint32_t row0 = 0; row0 < height; row0 += rows_per_strip) {
                tstrip_t strip = TIFFComputeStrip(tif.get(), row0,
                                                  static_cast<uint16_t>(plane));
                g_last_tiff_error.clear();
                tmsize_t got = TIFFReadEncodedStrip(tif.get(), strip, buf.data(),
                                                    buf.size());
                if (got < 0)
                    throw IoError("failed reading strip from '" + path +
                                  "': " + g_last_tiff_error);
                const uint32_t rows = std::min(rows_per_strip, height - row0);
                const size_t row_bytes =
                    static_cast<size_t>(width) * interleaved * sample_bytes;
                if (static_cast<size_t>(got) < row_bytes * rows)
                    throw IoError("'" + path + "' strip is truncated");
                for (uint32_t r = 0; r < rows; ++r)
                    store_row(buf.data() + static_cast<size_t>(r) * row_bytes,
                              row0 + r, 0, width, plane);
            }
        }
    }

    // Mask from the nodata declaration: a pixel is invalid when any band
    // carries the sentinel (matches GDAL's combined-mask semantics).
    std::vector<uint8_t> mask(n, 1);
    char* nodata_str = nullptr;
    if (TIFFGetField(tif.get(), kTagGdalNodata, &nodata_str) && nodata_str) {
        double nodata = 0.0;
        try {
            nodata = std::stod(nodata_str);
        } catch (const std::exception&) {
            throw FormatError("'" + path + "' has unparsable nodata value '" +
                              std::string(nodata_str) + "'");
        }
        const bool nodata_nan = std::isnan(nodata);
        for (size_t i = 0; i < n; ++i) {
            for (const auto& band : bands) {
                const double v = band.values[i];
                if (nodata_nan ? std::isnan(v) : v == nodata) {
                    mask[i] = 0;
                    break;
                }
            }
        }
    }

    GeoRef geo;
    geo.crs = read_crs(tif.get());
    geo.pixel_dlon = gt.dlon;
    geo.pixel_dlat = gt.dlat;
    geo.origin_lon = gt.corner_lon + 0.5 * gt.dlon;
    geo.origin_lat = gt.corner_lat + 0.5 * gt.dlat;

    return Raster(static_cast<int>(width), static_cast<int>(height),
                  std::move(bands), std::move(mask), std::move(geo));
}

void write_geotiff(const Raster& raster, const std::string& path) {
    init_libtiff_once();
    g_last_tiff_error.clear();
    TiffPtr tif(TIFFOpen(path.c_str(), "w"));
    if (!tif)
        throw IoError("cannot open '" + path + "' for writing: " +
                      g_last_tiff_error);

    const uint32_t width = static_cast<uint32_t>(raster.width());
    const uint32_t height = static_cast<uint32_t>(raster.height());
    const uint16_t samples = static_cast<uint16_t>(raster.band_count());

    TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, width);
    TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, height);
    TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, samples);
    TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, static_cast<uint16_t>(64));
    TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_IEEEFP);
    TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_ADOBE_DEFLATE);
    TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP,
                 TIFFDefaultStripSize(tif.get(), 0));
    if (samples > 1) {
        std::vector<uint16_t> extra(samples - 1, EXTRASAMPLE_UNSPECIFIED);
        TIFFSetField(tif.get(), TIFFTAG_EXTRASAMPLES,
                     static_cast<uint16_t>(extra.size()), extra.data());
    }

    const GeoRef& geo = raster.geo();
    const double scale[3] = {geo.pixel_dlon, -geo.pixel_dlat, 0.0};
    const double tiepoint[6] = {0.0,
                                0.0,
                                0.0,
                                geo.origin_lon - 0.5 * geo.pixel_dlon,
                                geo.origin_lat - 0.5 * geo.pixel_dlat,
                                0.0};
    TIFFSetField(tif.get(), kTagModelPixelScale, static_cast<uint16_t>(3), scale);
    TIFFSetField(tif.get(), kTagModelTiepoint, static_cast<uint16_t>(6), tiepoint);

    // GeoKey directory: raster type, citation, and the EPSG code when the CRS
    // string is of the "EPSG:n" form.
    int epsg = 0;
    if (geo.crs.rfind("EPSG:", 0) == 0) {
        try {
            epsg = std::stoi(geo.crs.substr(5));
        } catch (const std::exception&) {
            epsg = 0;
        }
    }
    const bool geographic = epsg >= 4000 && epsg < 5000;
    std::string ascii_params = geo.crs + "|";
    std::vector<uint16_t> keys = {1, 1, 0, 0};
    auto add_key = [&keys](uint16_t id, uint16_t loc, uint16_t cnt, uint16_t val) {
        keys.push_back(id);
        keys.push_back(loc);
        keys.push_back(cnt);
        keys.push_back(val);
    };
    add_key(kKeyGtModelType, 0, 1, epsg ? (geographic ? 2 : 1) : 0);
    add_key(kKeyGtRasterType, 0, 1, 1);  // RasterPixelIsArea
    add_key(kKeyGtCitation, static_cast<uint16_t>(kTagGeoAsciiParams),
            static_cast<uint16_t>(geo.crs.size() + 1), 0);
    if (epsg) {
        if (geographic)
            add_key(kKeyGeographicType, 0, 1, static_cast<uint16_t>(epsg));
        else
            add_key(kKeyProjectedCsType, 0, 1, static_cast<uint16_t>(epsg));
    }
    keys[3] = static_cast<uint16_t>(keys.size() / 4 - 1);
    TIFFSetField(tif.get(), kTagGeoKeyDirectory,
                 static_cast<uint16_t>(keys.size()), keys.data());
    TIFFSetField(tif.get(), kTagGeoAsciiParams, ascii_params.c_str());

    TIFFSetField(tif.get(), kTagGdalNodata, "nan");

    std::string meta = "<GDALMetadata>\n";
    for (int b = 0; b < raster.band_count(); ++b) {
        meta += "  <Item name=\"DESCRIPTION\" sample=\"" + std::to_string(b) +
                "\" role=\"description\">" + xml_escape(raster.band(b).name) +
                "</Item>\n";
    }
    meta += "</GDALMetadata>";
    TIFFSetField(tif.get(), kTagGdalMetadata, meta.c_str());

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> row_buf(static_cast<size_t>(width) * samples);
    for (uint32_t row = 0; row < height; ++row) {
        for (uint32_t col = 0; col < width; ++col) {
            const size_t i = static_cast<size_t>(row) * width + col;
            const bool valid = raster.mask()[i] != 0;
            for (uint16_t s = 0; s < samples; ++s)
                row_buf[static_cast<size_t>(col) * samples + s] =
                    valid ? raster.band(s).values[i] : nan;
        }
        g_last_tiff_error.clear();
        if (TIFFWriteScanline(tif.get(), row_buf.data(), row, 0) < 0)
            throw IoError("failed writing '" + path + "': " + g_last_tiff_error);
    }
}

}  // namespace landkit
