// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace svr {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

Image8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ImageError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    Image8 img(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)),
               int(png_get_channels(png, info)));
    std::vector<png_bytep> rows(size_t(img.height));
    const size_t stride = size_t(img.width) * size_t(img.channels);
    for (int r = 0; r < img.height; ++r) rows[size_t(r)] = img.data.data() + size_t(r) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const Image8& img) {
    if (img.width <= 0 || img.height <= 0) throw ImageError("write_png: empty image");
    int color_type;
    switch (img.channels) {
        case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
        case 3: color_type = PNG_COLOR_TYPE_RGB; break;
        case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
        default: throw ImageError("write_png: unsupported channel count");
    }

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ImageError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("failed to encode " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(size_t(img.height));
    const size_t stride = size_t(img.width) * size_t(img.channels);
    for (int r = 0; r < img.height; ++r)
        rows[size_t(r)] = const_cast<png_bytep>(img.data.data() + size_t(r) * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {

void check_resize(int w, int h, int new_w, int new_h) {
    if (w <= 0 || h <= 0) throw ImageError("resize of an empty image");
    if (new_w <= 0 || new_h <= 0) throw ImageError("resize to an empty image");
}

} // namespace

Image8 resize_area(const Image8& img, int new_w, int new_h) {
    check_resize(img.width, img.height, new_w, new_h);
    if (new_w == img.width && new_h == img.height) return img;
    Image8 out(new_w, new_h, img.channels);
    const double sx = double(img.width) / double(new_w);
    const double sy = double(img.height) / double(new_h);
    for (int r = 0; r < new_h; ++r)
        for (int c = 0; c < new_w; ++c) {
            const double y0 = r * sy, y1 = (r + 1) * sy;
            const double x0 = c * sx, x1 = (c + 1) * sx;
            for (int ch = 0; ch < img.channels; ++ch) {
                double acc = 0.0, area = 0.0;
                for (int sr = int(std::floor(y0)); sr < int(std::ceil(y1)); ++sr) {
                    const double hy = std::min(y1, double(sr + 1)) - std::max(y0, double(sr));
                    for (int sc = int(std::floor(x0)); sc < int(std::ceil(x1)); ++sc) {
                        const double hx =
                            std::min(x1, double(sc + 1)) - std::max(x0, double(sc));
                        const int rr = std::min(sr, img.height - 1);
                        const int cc = std::min(sc, img.width - 1);
                        acc += hy * hx * double(img.at(rr, cc, ch));
                        area += hy * hx;
                    }
                }
                out.at(r, c, ch) = uint8_t(std::lrint(acc / area));
            }
        }
    return out;
}

Imagef resize_bilinear(const Imagef& img, int new_w, int new_h) {
    check_resize(img.width, img.height, new_w, new_h);
    if (new_w == img.width && new_h == img.height) return img;
    Imagef out(new_w, new_h, img.channels);
    const double sx = double(img.width) / double(new_w);
    const double sy = double(img.height) / double(new_h);
    for (int r = 0; r < new_h; ++r)
        for (int c = 0; c < new_w; ++c) {
            const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(img.height - 1));
            const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(img.width - 1));
            const int r0 = int(fy), c0 = int(fx);
            const int r1 = std::min(r0 + 1, img.height - 1);
            const int c1 = std::min(c0 + 1, img.width - 1);
            const double wy = fy - r0, wx = fx - c0;
            // a + t*(b-a) lerps reproduce a constant input exactly, which the
            // (1-t)*a + t*b form does not once rounding enters.
            for (int ch = 0; ch < img.channels; ++ch) {
                const double a = img.at(r0, c0, ch);
                const double b = img.at(r0, c1, ch);
                const double c2 = img.at(r1, c0, ch);
                const double d = img.at(r1, c1, ch);
                const double top = a + wx * (b - a);
                const double bot = c2 + wx * (d - c2);
                out.at(r, c, ch) = float(top + wy * (bot - top));
            }
        }
    return out;
}

Image8 resize_nearest(const Image8& img, int new_w, int new_h) {
    check_resize(img.width, img.height, new_w, new_h);
    if (new_w == img.width && new_h == img.height) return img;
    Image8 out(new_w, new_h, img.channels);
    for (int r = 0; r < new_h; ++r)
        for (int c = 0; c < new_w; ++c) {
            const int sr = std::min(int((r + 0.5) * img.height / new_h), img.height - 1);
            const int sc = std::min(int((c + 0.5) * img.width / new_w), img.width - 1);
            for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = img.at(sr, sc, ch);
        }
    return out;
}

} // namespace svr
