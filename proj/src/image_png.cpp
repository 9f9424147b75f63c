#include "plotbot/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace plotbot {

nn::Tensor image_to_tensor(const Image& img) {
    nn::Tensor t(1, 1, img.h, img.w);
    std::copy(img.px.begin(), img.px.end(), t.data.begin());
    return t;
}

Image tensor_to_image(const nn::Tensor& t, int sample) {
    if (sample < 0 || sample >= t.n || t.c != 1)
        throw ShapeError("tensor_to_image: need a 1-channel tensor, got " +
                         t.dims_str());
    Image img(t.w, t.h);
    const size_t off = static_cast<size_t>(sample) * t.h * t.w;
    std::copy(t.data.begin() + off, t.data.begin() + off + img.px.size(),
              img.px.begin());
    return img;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// Reads any 8/16-bit PNG as 8-bit grayscale rows.
std::vector<std::vector<uint8_t>> read_png_gray8(const std::string& path,
                                                 int& w, int& h) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("png: cannot open " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw DataError("png: init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png: failed to read " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);  // Rec.601 defaults
    png_read_update_info(png, info);

    std::vector<std::vector<uint8_t>> rows(h);
    std::vector<png_bytep> row_ptrs(h);
    const size_t rowbytes = png_get_rowbytes(png, info);
    for (int y = 0; y < h; ++y) {
        rows[y].resize(rowbytes);
        row_ptrs[y] = rows[y].data();
    }
    png_read_image(png, row_ptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return rows;
}

void write_png_gray8(const std::string& path,
                     const std::vector<std::vector<uint8_t>>& rows, int w,
                     int h) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("png: cannot open for write " + path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw DataError("png: init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png: failed to write " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w),
                 static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> row_ptrs(h);
    for (int y = 0; y < h; ++y)
        row_ptrs[y] = const_cast<png_bytep>(rows[y].data());
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png_gray(const std::string& path) {
    int w, h;
    auto rows = read_png_gray8(path, w, h);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = static_cast<float>(rows[y][x]) / 255.0f;
    return img;
}

void write_png_gray(const std::string& path, const Image& img) {
    std::vector<std::vector<uint8_t>> rows(img.h);
    for (int y = 0; y < img.h; ++y) {
        rows[y].resize(img.w);
        for (int x = 0; x < img.w; ++x) {
            const float v = std::min(1.0f, std::max(0.0f, img.at(x, y)));
            rows[y][x] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    }
    write_png_gray8(path, rows, img.w, img.h);
}

LabelMap read_png_labels(const std::string& path) {
    int w, h;
    auto rows = read_png_gray8(path, w, h);
    LabelMap labels(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const uint8_t id = rows[y][x];
            if (id >= LabelMap::kNumClasses)
                throw DataError("labels: class id " + std::to_string(id) +
                                " out of range at (" + std::to_string(x) + "," +
                                std::to_string(y) + ") in " + path);
            labels.at(x, y) = id;
        }
    return labels;
}

void write_png_labels(const std::string& path, const LabelMap& labels) {
    std::vector<std::vector<uint8_t>> rows(labels.h);
    for (int y = 0; y < labels.h; ++y) {
        rows[y].resize(labels.w);
        for (int x = 0; x < labels.w; ++x) rows[y][x] = labels.at(x, y);
    }
    write_png_gray8(path, rows, labels.w, labels.h);
}

}  // namespace plotbot
