#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rfr/tensor.hpp"

namespace rfr::io {

/// Writes an 8-bit PNG (gray / RGB / RGBA by channel count). Values are
/// scaled from [0,1] with round-half-up after clamping.
inline void write_png(const std::string& path, const TensorF& img) {
    if (img.channels != 1 && img.channels != 3 && img.channels != 4)
        throw std::invalid_argument("write_png: channels must be 1, 3 or 4");
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("write_png: cannot open " + path);
    png_structp pngp = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop infop = pngp ? png_create_info_struct(pngp) : nullptr;
    if (!pngp || !infop) {
        std::fclose(fp);
        png_destroy_write_struct(&pngp, &infop);
        throw IoError("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(pngp))) {
        png_destroy_write_struct(&pngp, &infop);
        std::fclose(fp);
        throw IoError("write_png: libpng error writing " + path);
    }
    png_init_io(pngp, fp);
    int color = img.channels == 1   ? PNG_COLOR_TYPE_GRAY
                : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                    : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(pngp, infop, png_uint_32(img.width), png_uint_32(img.height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(pngp, infop);
    std::vector<png_byte> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float v = std::min(1.0f, std::max(0.0f, img.at(c, y, x)));
                row[static_cast<size_t>(x) * img.channels + c] =
                    png_byte(std::floor(v * 255.0f + 0.5f));
            }
        png_write_row(pngp, row.data());
    }
    png_write_end(pngp, nullptr);
    png_destroy_write_struct(&pngp, &infop);
    std::fclose(fp);
}

/// Reads an 8-bit PNG into a [0,1] float tensor (1, 3 or 4 channels;
/// palettes expanded, 16-bit depth stripped to 8).
inline TensorF read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("read_png: cannot open " + path);
    png_structp pngp = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop infop = pngp ? png_create_info_struct(pngp) : nullptr;
    if (!pngp || !infop) {
        std::fclose(fp);
        png_destroy_read_struct(&pngp, &infop, nullptr);
        throw IoError("read_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(pngp))) {
        png_destroy_read_struct(&pngp, &infop, nullptr);
        std::fclose(fp);
        throw IoError("read_png: libpng error reading " + path);
    }
    png_init_io(pngp, fp);
    png_read_info(pngp, infop);
    png_set_expand(pngp);
    png_set_strip_16(pngp);
    if (png_get_color_type(pngp, infop) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(pngp);
    png_read_update_info(pngp, infop);
    const int W = int(png_get_image_width(pngp, infop));
    const int H = int(png_get_image_height(pngp, infop));
    const int C = int(png_get_channels(pngp, infop));
    if (C != 1 && C != 3 && C != 4) {
        png_destroy_read_struct(&pngp, &infop, nullptr);
        std::fclose(fp);
        throw IoError("read_png: unsupported channel count in " + path);
    }
    std::vector<png_byte> row(static_cast<size_t>(W) * C);
    TensorF img(C, H, W);
    for (int y = 0; y < H; ++y) {
        png_read_row(pngp, row.data(), nullptr);
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < C; ++c)
                img.at(c, y, x) = float(row[static_cast<size_t>(x) * C + c]) / 255.0f;
    }
    png_read_end(pngp, nullptr);
    png_destroy_read_struct(&pngp, &infop, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace rfr::io
