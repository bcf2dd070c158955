// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/image.hpp"
#include "svr/scene.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

struct PriorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-pixel descriptor map, channel-interleaved row-major like Imagef.
struct FeatureMap {
    int width = 0, height = 0, channels = 0;
    std::vector<float> values;

    FeatureMap() = default;
    FeatureMap(int w, int h, int c)
        : width(w), height(h), channels(c), values(size_t(w) * size_t(h) * size_t(c), 0.f) {}

    float& at(int row, int col, int ch) {
        return values[(size_t(row) * size_t(width) + size_t(col)) * size_t(channels) +
                      size_t(ch)];
    }
    float at(int row, int col, int ch) const {
        return values[(size_t(row) * size_t(width) + size_t(col)) * size_t(channels) +
                      size_t(ch)];
    }
};

// On-disk feature format: 12-byte header (u32 width, u32 height, u32 channels),
// then width*height*channels float32 values, row-major channel-interleaved,
// all little-endian.
FeatureMap read_feature_map(const std::string& path);
void write_feature_map(const std::string& path, const FeatureMap& map);

// Hand-built 12-channel local descriptor, a deterministic stand-in for
// learned feature maps. For a 3-channel input in any colour representation:
//   channels 0-2   the pixel's own rgb values
//   channels 3-5   x gradient per rgb channel, central difference
//                  (right - left) / 2, so a unit step contributes +-0.5
//   channels 6-8   y gradient per rgb channel, (below - above) / 2
//   channels 9-11  3x3 box mean per rgb channel
// All stencils clamp coordinates to the image rectangle (replicate padding),
// which keeps the map the same spatial size as the image and makes the
// descriptor translation-equivariant away from the borders.
FeatureMap local_descriptor(const Imagef& img);

enum class DepthPriorKind { File, SyntheticGtPlusNoise };
enum class FeaturePriorKind { File, LocalDescriptor };

// File kinds read `<directory>/<view name>.depth` / `<view name>.feat`;
// the synthetic depth kind perturbs the view's stored ground-truth depth
// with per-view seeded gaussian noise of `noise_sigma` scene units, as a
// stand-in for the error profile of a monocular depth network.
struct DepthPriorConfig {
    DepthPriorKind kind = DepthPriorKind::SyntheticGtPlusNoise;
    double noise_sigma = 0.0;
    uint64_t seed = 0;
    std::string directory;
};

struct FeaturePriorConfig {
    FeaturePriorKind kind = FeaturePriorKind::LocalDescriptor;
    std::string directory;
};

// Depth prior raster for one input view. Pure given config: the noise
// substream is derived from the config seed and the view name, valid pixels
// (stored depth > 0) get metric-depth noise clamped to stay positive, and
// no-depth pixels stay zero. The returned raster has scale 1 (values are
// metric) and the spatial size of the view image.
DepthMap depth_prior_for_view(const DepthPriorConfig& cfg, const InputView& view);

// Feature prior map for one input view; the descriptor kind runs
// local_descriptor on the stored image scaled to [0,1].
FeatureMap feature_prior_for_view(const FeaturePriorConfig& cfg, const InputView& view);

} // namespace svr
