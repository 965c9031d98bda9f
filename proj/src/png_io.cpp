#include "png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "landkit/errors.hpp"

namespace landkit::pngio {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) {
            png_destroy_write_struct(&png, &info);
            throw IoError("failed to initialise png writer");
        }
    }
    PngWriter(const PngWriter&) = delete;
    PngWriter& operator=(const PngWriter&) = delete;
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

void check_shape(int width, int height, size_t values, size_t per_pixel, const std::string& path) {
    if (width <= 0 || height <= 0)
        throw ShapeError("png image must have positive dimensions: " + path);
    if (values != static_cast<size_t>(width) * static_cast<size_t>(height) * per_pixel)
        throw ShapeError("pixel buffer does not match image dimensions: " + path);
}

void write_image(const std::string& path, int width, int height, int color_type,
                 const std::vector<Rgb>* palette, const uint8_t* pixels, size_t stride) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot open for writing: " + path);

    PngWriter w;
    if (setjmp(png_jmpbuf(w.png)))
        throw IoError("png encoding failed: " + path);

    png_init_io(w.png, file.get());
    // Pinned encoder settings: fixed zlib level, no adaptive filtering. Output
    // bytes then depend only on the pixel data.
    png_set_compression_level(w.png, 6);
    png_set_filter(w.png, 0, PNG_FILTER_NONE);

    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);

    std::vector<png_color> plte;
    if (palette) {
        plte.reserve(palette->size());
        for (const auto& c : *palette) plte.push_back(png_color{c[0], c[1], c[2]});
        png_set_PLTE(w.png, w.info, plte.data(), static_cast<int>(plte.size()));
    }
    png_write_info(w.png, w.info);

    for (int y = 0; y < height; ++y) {
        png_write_row(w.png, const_cast<png_bytep>(pixels + static_cast<size_t>(y) * stride));
    }
    png_write_end(w.png, w.info);
}

}  // namespace

void write_indexed(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& indices, const std::vector<Rgb>& palette) {
    check_shape(width, height, indices.size(), 1, path);
    if (palette.empty() || palette.size() > 256)
        throw ConfigError("indexed png needs between 1 and 256 palette entries");
    for (uint8_t ix : indices) {
        if (ix >= palette.size())
            throw ConfigError("pixel index " + std::to_string(ix) + " outside the palette");
    }
    write_image(path, width, height, PNG_COLOR_TYPE_PALETTE, &palette, indices.data(),
                static_cast<size_t>(width));
}

void write_rgb(const std::string& path, int width, int height, const std::vector<uint8_t>& rgb) {
    check_shape(width, height, rgb.size(), 3, path);
    write_image(path, width, height, PNG_COLOR_TYPE_RGB, nullptr, rgb.data(),
                static_cast<size_t>(width) * 3);
}

}  // namespace landkit::pngio
