// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/priors.hpp"

#include "svr/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "feature raster I/O assumes a little-endian host");

namespace svr {

namespace fs = std::filesystem;

FeatureMap read_feature_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PriorError("cannot open feature map " + path);
    uint32_t w = 0, h = 0, c = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&c), 4);
    if (!in) throw PriorError("truncated feature header in " + path);
    if (w == 0 || h == 0 || c == 0 || w > (1u << 20) || h > (1u << 20) || c > 4096)
        throw PriorError("implausible feature dimensions in " + path);
    FeatureMap map{int(w), int(h), int(c)};
    in.read(reinterpret_cast<char*>(map.values.data()),
            std::streamsize(map.values.size() * sizeof(float)));
    if (!in) throw PriorError("truncated feature payload in " + path);
    for (float v : map.values)
        if (!std::isfinite(v)) throw PriorError("non-finite feature value in " + path);
    return map;
}

void write_feature_map(const std::string& path, const FeatureMap& map) {
    if (map.width <= 0 || map.height <= 0 || map.channels <= 0 ||
        map.values.size() != size_t(map.width) * size_t(map.height) * size_t(map.channels))
        throw PriorError("feature map dimensions do not match payload");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PriorError("cannot open " + path + " for writing");
    const uint32_t w = uint32_t(map.width), h = uint32_t(map.height),
                   c = uint32_t(map.channels);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&c), 4);
    out.write(reinterpret_cast<const char*>(map.values.data()),
              std::streamsize(map.values.size() * sizeof(float)));
    if (!out) throw PriorError("short write to " + path);
}

FeatureMap local_descriptor(const Imagef& img) {
    if (img.channels != 3) throw PriorError("local_descriptor expects a 3-channel image");
    if (img.width <= 0 || img.height <= 0) throw PriorError("local_descriptor: empty image");
    const auto clamped = [&](int row, int col, int ch) {
        row = std::clamp(row, 0, img.height - 1);
        col = std::clamp(col, 0, img.width - 1);
        return img.at(row, col, ch);
    };
    FeatureMap map(img.width, img.height, 12);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                map.at(r, c, ch) = img.at(r, c, ch);
                map.at(r, c, 3 + ch) = 0.5f * (clamped(r, c + 1, ch) - clamped(r, c - 1, ch));
                map.at(r, c, 6 + ch) = 0.5f * (clamped(r + 1, c, ch) - clamped(r - 1, c, ch));
                float sum = 0.f;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) sum += clamped(r + dr, c + dc, ch);
                map.at(r, c, 9 + ch) = sum / 9.f;
            }
    return map;
}

namespace {

// Every mask-set pixel must carry usable depth, whichever kind produced it.
void check_depth_covers_mask(const DepthMap& d, const InputView& view) {
    if (d.width != view.image.width || d.height != view.image.height)
        throw PriorError("depth prior size does not match view '" + view.name + "'");
    if (!view.mask) return;
    for (int r = 0; r < d.height; ++r)
        for (int c = 0; c < d.width; ++c)
            if (view.mask->at(r, c, 0) != 0 && !(d.metric_at(r, c) > 0.f))
                throw PriorError("depth prior for view '" + view.name +
                                 "' is missing depth inside the mask");
}

} // namespace

DepthMap depth_prior_for_view(const DepthPriorConfig& cfg, const InputView& view) {
    if (cfg.kind == DepthPriorKind::File) {
        const auto path = fs::path(cfg.directory) / (view.name + ".depth");
        auto d = read_depth_raster(path.string());
        check_depth_covers_mask(d, view);
        return d;
    }
    if (!view.depth)
        throw PriorError("view '" + view.name + "' has no stored depth to perturb");
    const DepthMap& gt = *view.depth;
    DepthMap out;
    out.width = gt.width;
    out.height = gt.height;
    out.scale = 1.f;
    out.values.resize(gt.values.size());
    Rng rng(cfg.seed, {0xdeb70a15ULL, fnv1a64(view.name)});
    for (int r = 0; r < gt.height; ++r)
        for (int c = 0; c < gt.width; ++c) {
            const float m = gt.metric_at(r, c);
            float v = 0.f;
            if (m > 0.f) {
                v = m;
                if (cfg.noise_sigma > 0.0)
                    v = std::max(float(m + cfg.noise_sigma * rng.normal()), 1e-6f);
            }
            out.values[size_t(r) * size_t(out.width) + size_t(c)] = v;
        }
    check_depth_covers_mask(out, view);
    return out;
}

FeatureMap feature_prior_for_view(const FeaturePriorConfig& cfg, const InputView& view) {
    if (cfg.kind == FeaturePriorKind::File) {
        const auto path = fs::path(cfg.directory) / (view.name + ".feat");
        auto map = read_feature_map(path.string());
        if (map.width != view.image.width || map.height != view.image.height)
            throw PriorError("feature prior size does not match view '" + view.name + "'");
        return map;
    }
    return local_descriptor(normalize8(view.image));
}

} // namespace svr
