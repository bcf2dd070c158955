// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "depth raster I/O assumes a little-endian host");

namespace svr {

namespace fs = std::filesystem;
using nlohmann::json;

DepthMap read_depth_raster(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SceneError("cannot open depth raster " + path);
    uint32_t w = 0, h = 0;
    float scale = 0.f;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&scale), 4);
    if (!in) throw SceneError("truncated depth header in " + path);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
        throw SceneError("implausible depth dimensions in " + path);
    if (!(scale > 0.f)) throw SceneError("depth scale must be positive in " + path);
    DepthMap d;
    d.width = int(w);
    d.height = int(h);
    d.scale = scale;
    d.values.resize(size_t(w) * size_t(h));
    in.read(reinterpret_cast<char*>(d.values.data()),
            std::streamsize(d.values.size() * sizeof(float)));
    if (!in) throw SceneError("truncated depth payload in " + path);
    for (float v : d.values)
        if (!(v >= 0.f) || !std::isfinite(v))
            throw SceneError("negative or non-finite depth value in " + path);
    return d;
}

void write_depth_raster(const std::string& path, const DepthMap& depth) {
    if (depth.width <= 0 || depth.height <= 0 ||
        depth.values.size() != size_t(depth.width) * size_t(depth.height))
        throw SceneError("depth raster dimensions do not match payload");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SceneError("cannot open " + path + " for writing");
    const uint32_t w = uint32_t(depth.width), h = uint32_t(depth.height);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&depth.scale), 4);
    out.write(reinterpret_cast<const char*>(depth.values.data()),
              std::streamsize(depth.values.size() * sizeof(float)));
    if (!out) throw SceneError("short write to " + path);
}

std::string to_string(Background b) {
    switch (b) {
        case Background::White: return "white";
        case Background::Black: return "black";
        default: return "none";
    }
}

Background background_from_string(const std::string& s) {
    if (s == "white") return Background::White;
    if (s == "black") return Background::Black;
    if (s == "none") return Background::None;
    throw SceneError("unknown background '" + s + "'");
}

namespace {

json camera_to_json(const Camera& c) {
    json j;
    j["fx"] = c.fx;
    j["fy"] = c.fy;
    j["cx"] = c.cx;
    j["cy"] = c.cy;
    j["width"] = c.width;
    j["height"] = c.height;
    j["near"] = c.near;
    j["far"] = c.far;
    std::vector<double> m(16);
    for (int r = 0; r < 4; ++r)
        for (int col = 0; col < 4; ++col) m[size_t(r) * 4 + size_t(col)] = c.world_from_camera(r, col);
    j["world_from_camera"] = m;
    return j;
}

Camera camera_from_json(const json& j) {
    Camera c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.near = j.at("near").get<double>();
    c.far = j.at("far").get<double>();
    const auto m = j.at("world_from_camera").get<std::vector<double>>();
    if (m.size() != 16) throw SceneError("world_from_camera must hold 16 values");
    for (int r = 0; r < 4; ++r)
        for (int col = 0; col < 4; ++col) c.world_from_camera(r, col) = m[size_t(r) * 4 + size_t(col)];
    validate_camera(c);
    return c;
}

void check_mask(const Image8& mask, const std::string& context) {
    if (mask.channels != 1) throw SceneError(context + ": mask must be single-channel");
    for (uint8_t v : mask.data)
        if (v != 0 && v != 255)
            throw SceneError(context + ": mask contains value " + std::to_string(int(v)) +
                             ", expected only 0 or 255");
}

} // namespace

void validate_scene(const Scene& scene) {
    for (const auto& v : scene.input_views) {
        validate_camera(v.camera);
        if (v.image.width != v.camera.width || v.image.height != v.camera.height)
            throw SceneError(v.name + ": image size disagrees with camera");
        if (v.mask) {
            check_mask(*v.mask, v.name);
            if (v.mask->width != v.image.width || v.mask->height != v.image.height)
                throw SceneError(v.name + ": mask size disagrees with image");
        }
        if (v.depth) {
            if (v.depth->width != v.image.width || v.depth->height != v.image.height)
                throw SceneError(v.name + ": depth size disagrees with image");
        }
    }
    for (const auto& t : scene.target_views) {
        validate_camera(t.camera);
        if (t.mask) check_mask(*t.mask, t.name);
    }
}

Scene load_scene(const std::string& dir) {
    const fs::path root(dir);
    const fs::path manifest = root / "scene.json";
    std::ifstream in(manifest);
    if (!in) throw SceneError("missing manifest " + manifest.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SceneError("malformed manifest " + manifest.string() + ": " + e.what());
    }

    Scene scene;
    scene.background = background_from_string(j.value("background", "none"));
    scene.split = j.value("split", "train");

    for (const auto& jv : j.at("input_views")) {
        InputView v;
        v.name = jv.at("name").get<std::string>();
        v.camera = camera_from_json(jv.at("camera"));
        v.image = read_png((root / jv.at("image").get<std::string>()).string());
        if (jv.contains("mask"))
            v.mask = read_png((root / jv.at("mask").get<std::string>()).string());
        if (jv.contains("depth"))
            v.depth = read_depth_raster((root / jv.at("depth").get<std::string>()).string());
        scene.input_views.push_back(std::move(v));
    }
    for (const auto& jt : j.value("target_views", json::array())) {
        TargetView t;
        t.name = jt.at("name").get<std::string>();
        t.camera = camera_from_json(jt.at("camera"));
        if (jt.contains("image"))
            t.image = read_png((root / jt.at("image").get<std::string>()).string());
        if (jt.contains("mask"))
            t.mask = read_png((root / jt.at("mask").get<std::string>()).string());
        scene.target_views.push_back(std::move(t));
    }

    std::sort(scene.input_views.begin(), scene.input_views.end(),
              [](const InputView& a, const InputView& b) { return a.name < b.name; });
    std::sort(scene.target_views.begin(), scene.target_views.end(),
              [](const TargetView& a, const TargetView& b) { return a.name < b.name; });
    validate_scene(scene);
    return scene;
}

void save_scene(const std::string& dir, const Scene& scene) {
    validate_scene(scene);
    const fs::path root(dir);
    fs::create_directories(root / "images");
    bool any_mask = false, any_depth = false;
    for (const auto& v : scene.input_views) {
        any_mask |= v.mask.has_value();
        any_depth |= v.depth.has_value();
    }
    for (const auto& t : scene.target_views) any_mask |= t.mask.has_value();
    if (any_mask) fs::create_directories(root / "masks");
    if (any_depth) fs::create_directories(root / "depth");

    json j;
    j["format"] = "sparseview-scene-v1";
    j["background"] = to_string(scene.background);
    j["split"] = scene.split;
    j["input_views"] = json::array();
    for (const auto& v : scene.input_views) {
        json jv;
        jv["name"] = v.name;
        jv["camera"] = camera_to_json(v.camera);
        jv["image"] = "images/" + v.name + ".png";
        write_png((root / "images" / (v.name + ".png")).string(), v.image);
        if (v.mask) {
            jv["mask"] = "masks/" + v.name + ".png";
            write_png((root / "masks" / (v.name + ".png")).string(), *v.mask);
        }
        if (v.depth) {
            jv["depth"] = "depth/" + v.name + ".raw";
            write_depth_raster((root / "depth" / (v.name + ".raw")).string(), *v.depth);
        }
        j["input_views"].push_back(jv);
    }
    j["target_views"] = json::array();
    for (const auto& t : scene.target_views) {
        json jt;
        jt["name"] = t.name;
        jt["camera"] = camera_to_json(t.camera);
        if (t.image) {
            jt["image"] = "images/" + t.name + ".png";
            write_png((root / "images" / (t.name + ".png")).string(), *t.image);
        }
        if (t.mask) {
            jt["mask"] = "masks/" + t.name + ".png";
            write_png((root / "masks" / (t.name + ".png")).string(), *t.mask);
        }
        j["target_views"].push_back(jt);
    }

    std::ofstream out(root / "scene.json", std::ios::trunc);
    if (!out) throw SceneError("cannot write manifest in " + dir);
    out << j.dump(2) << "\n";
}

} // namespace svr
