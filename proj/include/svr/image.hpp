// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

struct ImageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 8-bit image as stored on disk, channel-interleaved row-major.
struct Image8 {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> data;

    Image8() = default;
    Image8(int w, int h, int c, uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(size_t(w) * size_t(h) * size_t(c), fill) {}

    uint8_t& at(int row, int col, int ch) {
        return data[(size_t(row) * size_t(width) + size_t(col)) * size_t(channels) + size_t(ch)];
    }
    uint8_t at(int row, int col, int ch) const {
        return data[(size_t(row) * size_t(width) + size_t(col)) * size_t(channels) + size_t(ch)];
    }
};

// Working image, float per channel, same layout. Whether the values are
// linear or sRGB-encoded depends on the producing call and is documented
// at each conversion site.
struct Imagef {
    int width = 0, height = 0, channels = 0;
    std::vector<float> data;

    Imagef() = default;
    Imagef(int w, int h, int c, float fill = 0.f)
        : width(w), height(h), channels(c),
          data(size_t(w) * size_t(h) * size_t(c), fill) {}

    float& at(int row, int col, int ch) {
        return data[(size_t(row) * size_t(width) + size_t(col)) * size_t(channels) + size_t(ch)];
    }
    float at(int row, int col, int ch) const {
        return data[(size_t(row) * size_t(width) + size_t(col)) * size_t(channels) + size_t(ch)];
    }
};

// sRGB transfer curve, evaluated in double so that the 8-bit round trip
// (decode then re-encode) is exact for all 256 codes.
inline double srgb_to_linear(double s) {
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double l) {
    if (l <= 0.0) return 0.0;
    if (l >= 1.0) return 1.0;
    return l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

inline uint8_t quantize8(double v01) {
    const double q = std::nearbyint(std::min(std::max(v01, 0.0), 1.0) * 255.0);
    return uint8_t(q);
}

// 8-bit sRGB codes -> linear [0,1] floats.
inline Imagef decode_srgb(const Image8& img) {
    Imagef out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = float(srgb_to_linear(img.data[i] / 255.0));
    return out;
}

// Linear [0,1] floats -> 8-bit sRGB codes (values clamped).
inline Image8 encode_srgb(const Imagef& img) {
    Image8 out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = quantize8(linear_to_srgb(double(img.data[i])));
    return out;
}

// 8-bit codes -> [0,1] floats with no transfer curve. The evaluation
// protocol computes metrics in this stored-domain normalization.
inline Imagef normalize8(const Image8& img) {
    Imagef out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = float(img.data[i] / 255.0);
    return out;
}

// PNG I/O (8-bit only; palette and 16-bit inputs are converted on read).
Image8 read_png(const std::string& path);
void write_png(const std::string& path, const Image8& img);

// Area-weighted box resample on the stored 8-bit codes; the right filter for
// downscaling. Each destination pixel averages the exact source rectangle it
// covers, with fractional edge weights.
Image8 resize_area(const Image8& img, int new_w, int new_h);

// Bilinear resample with half-pixel centers, edges clamped.
Imagef resize_bilinear(const Imagef& img, int new_w, int new_h);

// Nearest-neighbour resample; keeps value sets intact (masks stay 0/255).
Image8 resize_nearest(const Image8& img, int new_w, int new_h);

} // namespace svr
