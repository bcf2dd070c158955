// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/camera.hpp"
#include "svr/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace svr {

struct SceneError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Depth raster with a physical scale: metric depth = values[i] * scale.
// A raw value of 0 marks "no depth at this pixel".
struct DepthMap {
    int width = 0, height = 0;
    float scale = 1.f;
    std::vector<float> values;

    float metric_at(int row, int col) const {
        return values[size_t(row) * size_t(width) + size_t(col)] * scale;
    }
};

// On-disk depth format: 12-byte header (u32 width, u32 height, f32 scale),
// then width*height float32 values, row-major, all little-endian.
DepthMap read_depth_raster(const std::string& path);
void write_depth_raster(const std::string& path, const DepthMap& depth);

enum class Background { White, Black, None };

std::string to_string(Background b);
Background background_from_string(const std::string& s);

struct InputView {
    std::string name; // stem used for image/mask/depth filenames
    Camera camera;
    Image8 image; // stored sRGB codes
    std::optional<Image8> mask; // single channel, strictly 0/255
    std::optional<DepthMap> depth;
};

// Target views carry at minimum a pose; synthetic scenes also keep the
// ground-truth image and mask so held-out evaluation can run locally.
struct TargetView {
    std::string name;
    Camera camera;
    std::optional<Image8> image;
    std::optional<Image8> mask;
};

struct Scene {
    std::vector<InputView> input_views;
    std::vector<TargetView> target_views;
    Background background = Background::None;
    std::string split = "train";
};

void validate_scene(const Scene& scene);

// Directory layout:
//   scene.json                manifest (cameras, file references, background, split)
//   images/<name>.png         8-bit sRGB
//   masks/<name>.png          8-bit gray, values 0 or 255 only
//   depth/<name>.raw          depth raster (format above)
// Views are ordered lexicographically by name; load_scene re-sorts to make
// the ordering independent of manifest order.
Scene load_scene(const std::string& dir);
void save_scene(const std::string& dir, const Scene& scene);

} // namespace svr
