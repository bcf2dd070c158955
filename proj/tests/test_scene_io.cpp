// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/camera.hpp"
#include "svr/image.hpp"
#include "svr/scene.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace svr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Camera test_camera(int w = 8, int h = 6) {
    Camera c;
    c.fx = c.fy = 10.0;
    c.cx = w / 2.0;
    c.cy = h / 2.0;
    c.width = w;
    c.height = h;
    c.near = 0.5;
    c.far = 5.0;
    c.world_from_camera = look_at(Vec3(3, 0, 0), Vec3::Zero());
    return c;
}

Image8 gradient_image(int w, int h, int channels) {
    Image8 img(w, h, channels);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < channels; ++ch)
                img.at(r, c, ch) = uint8_t((r * 31 + c * 7 + ch * 83) % 256);
    return img;
}

} // namespace

TEST(SrgbTransfer, RoundTripAll256Codes) {
    for (int v = 0; v < 256; ++v) {
        const double lin = srgb_to_linear(v / 255.0);
        EXPECT_EQ(quantize8(linear_to_srgb(lin)), uint8_t(v)) << "code " << v;
    }
}

TEST(SrgbTransfer, KnownAnchors) {
    EXPECT_DOUBLE_EQ(srgb_to_linear(0.0), 0.0);
    EXPECT_DOUBLE_EQ(srgb_to_linear(1.0), 1.0);
    EXPECT_NEAR(srgb_to_linear(0.5), 0.21404114048223255, 1e-12);
    EXPECT_NEAR(linear_to_srgb(0.5), 0.7353569830524495, 1e-12);
}

TEST(PngIo, RoundTripRgbAndGray) {
    const auto dir = fresh_dir("svr_png_test");
    for (int channels : {1, 3}) {
        const Image8 img = gradient_image(17, 9, channels);
        const auto path = (dir / ("img" + std::to_string(channels) + ".png")).string();
        write_png(path, img);
        const Image8 back = read_png(path);
        EXPECT_EQ(back.width, img.width);
        EXPECT_EQ(back.height, img.height);
        EXPECT_EQ(back.channels, img.channels);
        EXPECT_EQ(back.data, img.data);
    }
    fs::remove_all(dir);
}

TEST(PngIo, MissingFileThrows) {
    EXPECT_THROW(read_png("/nonexistent/path/img.png"), ImageError);
}

TEST(DepthRaster, RoundTrip) {
    const auto dir = fresh_dir("svr_depth_test");
    DepthMap d;
    d.width = 4;
    d.height = 3;
    d.scale = 0.5f;
    d.values = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const auto path = (dir / "d.raw").string();
    write_depth_raster(path, d);

    // 12-byte header + 12 floats
    EXPECT_EQ(fs::file_size(path), 12u + 12u * 4u);

    const DepthMap back = read_depth_raster(path);
    EXPECT_EQ(back.width, 4);
    EXPECT_EQ(back.height, 3);
    EXPECT_FLOAT_EQ(back.scale, 0.5f);
    EXPECT_EQ(back.values, d.values);
    EXPECT_FLOAT_EQ(back.metric_at(0, 2), 1.0f); // raw 2 * scale 0.5
    fs::remove_all(dir);
}

TEST(DepthRaster, TruncatedPayloadThrows) {
    const auto dir = fresh_dir("svr_depth_trunc");
    DepthMap d;
    d.width = 2;
    d.height = 2;
    d.values = {1, 2, 3, 4};
    const auto path = (dir / "d.raw").string();
    write_depth_raster(path, d);
    fs::resize_file(path, 12 + 3 * 4);
    EXPECT_THROW(read_depth_raster(path), SceneError);
    fs::remove_all(dir);
}

TEST(SceneIo, SaveLoadRoundTripBitExact) {
    Scene scene;
    scene.background = Background::White;
    scene.split = "train";
    for (int k = 0; k < 3; ++k) {
        InputView v;
        v.name = "view_00" + std::to_string(k);
        v.camera = test_camera();
        v.image = gradient_image(8, 6, 3);
        Image8 mask(8, 6, 1);
        for (size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = (i % 3 == 0) ? 255 : 0;
        v.mask = mask;
        DepthMap d;
        d.width = 8;
        d.height = 6;
        d.values.assign(48, 1.25f);
        v.depth = d;
        scene.input_views.push_back(std::move(v));
    }
    TargetView t;
    t.name = "view_100";
    t.camera = test_camera();
    t.image = gradient_image(8, 6, 3);
    scene.target_views.push_back(std::move(t));

    const auto dir = fresh_dir("svr_scene_rt");
    save_scene(dir.string(), scene);
    const Scene back = load_scene(dir.string());

    ASSERT_EQ(back.input_views.size(), 3u);
    ASSERT_EQ(back.target_views.size(), 1u);
    EXPECT_EQ(back.background, Background::White);
    for (size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(back.input_views[k].name, scene.input_views[k].name);
        EXPECT_EQ(back.input_views[k].image.data, scene.input_views[k].image.data);
        EXPECT_EQ(back.input_views[k].mask->data, scene.input_views[k].mask->data);
        EXPECT_EQ(back.input_views[k].depth->values, scene.input_views[k].depth->values);
        EXPECT_TRUE(back.input_views[k].camera.world_from_camera.isApprox(
            scene.input_views[k].camera.world_from_camera, 1e-12));
    }
    EXPECT_EQ(back.target_views[0].image->data, scene.target_views[0].image->data);

    // second save of the loaded scene reproduces the files byte for byte
    const auto dir2 = fresh_dir("svr_scene_rt2");
    save_scene(dir2.string(), back);
    for (const auto& rel : {"images/view_000.png", "masks/view_001.png", "depth/view_002.raw"}) {
        std::ifstream a(dir / rel, std::ios::binary), b(dir2 / rel, std::ios::binary);
        std::vector<char> da((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        std::vector<char> db((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        EXPECT_EQ(da, db) << rel;
    }
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST(SceneIo, GreyMaskRejected) {
    Scene scene;
    InputView v;
    v.name = "view_000";
    v.camera = test_camera();
    v.image = gradient_image(8, 6, 3);
    Image8 mask(8, 6, 1);
    mask.data[5] = 128;
    v.mask = mask;
    scene.input_views.push_back(std::move(v));
    EXPECT_THROW(validate_scene(scene), SceneError);
}

TEST(SceneIo, MissingManifestThrows) {
    const auto dir = fresh_dir("svr_scene_empty");
    EXPECT_THROW(load_scene(dir.string()), SceneError);
    fs::remove_all(dir);
}

TEST(SceneIo, SizeMismatchRejected) {
    Scene scene;
    InputView v;
    v.name = "view_000";
    v.camera = test_camera(8, 6);
    v.image = gradient_image(4, 4, 3); // disagrees with the camera
    scene.input_views.push_back(std::move(v));
    EXPECT_THROW(validate_scene(scene), SceneError);
}

TEST(SceneIo, ViewsSortedByName) {
    Scene scene;
    for (const char* name : {"view_002", "view_000", "view_001"}) {
        InputView v;
        v.name = name;
        v.camera = test_camera();
        v.image = gradient_image(8, 6, 3);
        scene.input_views.push_back(std::move(v));
    }
    const auto dir = fresh_dir("svr_scene_sort");
    save_scene(dir.string(), scene);
    const Scene back = load_scene(dir.string());
    ASSERT_EQ(back.input_views.size(), 3u);
    EXPECT_EQ(back.input_views[0].name, "view_000");
    EXPECT_EQ(back.input_views[1].name, "view_001");
    EXPECT_EQ(back.input_views[2].name, "view_002");
    fs::remove_all(dir);
}
