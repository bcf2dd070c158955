// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/metrics.hpp"

#include "svr/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
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

Image8 random_image8(int w, int h, uint64_t seed, int lo = 0, int hi = 255) {
    Image8 img(w, h, 3);
    Rng rng(seed);
    for (uint8_t& v : img.data) v = uint8_t(lo + rng.uniform_int(hi - lo + 1));
    return img;
}

// Offset every code by 25 or 26 in alternation: the mean squared step is
// (25^2 + 26^2) / 2 / 255^2 = 0.0100038, i.e. a 0.1 offset up to 8-bit
// rounding, so PSNR lands at 20 dB within a hundredth.
Image8 offset_tenth(const Image8& img) {
    Image8 out = img;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = uint8_t(out.data[i] + (i % 2 ? 25 : 26));
    return out;
}

// Plain two-pass SSIM on the luma crop, central moments computed directly;
// used as an independent check of the production implementation.
double reference_ssim(const Imagef& a, const Imagef& b, const MaskBox& box) {
    const int h = box.rows(), w = box.cols();
    auto luma = [](const Imagef& img, int r, int c) {
        return 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
    };
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    double win[11][11], wsum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            win[i][j] = std::exp(-((i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0)) /
                                 (2.0 * sigma * sigma));
            wsum += win[i][j];
        }
    double total = 0.0;
    int count = 0;
    for (int r = 0; r + 11 <= h; ++r)
        for (int c = 0; c + 11 <= w; ++c) {
            double mx = 0, my = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    mx += win[i][j] / wsum * luma(a, box.row_min + r + i, box.col_min + c + j);
                    my += win[i][j] / wsum * luma(b, box.row_min + r + i, box.col_min + c + j);
                }
            double vx = 0, vy = 0, cov = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double dx =
                        luma(a, box.row_min + r + i, box.col_min + c + j) - mx;
                    const double dy =
                        luma(b, box.row_min + r + i, box.col_min + c + j) - my;
                    vx += win[i][j] / wsum * dx * dx;
                    vy += win[i][j] / wsum * dy * dy;
                    cov += win[i][j] / wsum * dx * dy;
                }
            total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

} // namespace

TEST(Psnr, IdenticalImagesReportTheCapSentinel) {
    const auto img = normalize8(random_image8(8, 6, 1));
    EXPECT_EQ(psnr(img, img), kPsnrCap);
}

TEST(Psnr, TenthOffsetLandsAtTwentyDecibels) {
    const auto gt = random_image8(16, 12, 2, 0, 220);
    const double db = psnr(normalize8(offset_tenth(gt)), normalize8(gt));
    EXPECT_NEAR(db, 20.0, 0.01);
}

TEST(Psnr, SymmetricInItsArguments) {
    const auto a = normalize8(random_image8(9, 7, 3));
    const auto b = normalize8(random_image8(9, 7, 4));
    EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, StrictlyDecreasesWithNoiseAmplitude) {
    const auto gt = random_image8(24, 24, 5, 30, 220);
    Rng rng(6);
    double prev = kPsnrCap + 1;
    for (const double amp : {0.01, 0.02, 0.05, 0.1}) {
        Image8 noisy = gt;
        Rng r2(7); // same noise shape at every amplitude
        for (uint8_t& v : noisy.data) {
            const double shift = amp * 255.0 * r2.uniform(-1.0, 1.0);
            v = uint8_t(std::clamp(int(std::lround(double(v) + shift)), 0, 255));
        }
        const double db = psnr(normalize8(noisy), normalize8(gt));
        EXPECT_LT(db, prev);
        prev = db;
    }
}

TEST(MaskedPsnr, FullMaskMatchesPsnrBitExactly) {
    const auto a = normalize8(random_image8(13, 9, 8));
    const auto b = normalize8(random_image8(13, 9, 9));
    const Image8 full(13, 9, 1, 255);
    EXPECT_EQ(masked_psnr(a, b, full), psnr(a, b));
}

TEST(MaskedPsnr, IgnoresErrorOutsideTheMask) {
    const auto gt = random_image8(10, 10, 10);
    Image8 pred = gt;
    Image8 mask(10, 10, 1, 0);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 10; ++c) mask.at(r, c, 0) = 255;
    for (int r = 5; r < 10; ++r)
        for (int c = 0; c < 10; ++c) pred.at(r, c, 0) = uint8_t(255 - pred.at(r, c, 0));
    EXPECT_EQ(masked_psnr(normalize8(pred), normalize8(gt), mask), kPsnrCap);
}

TEST(MaskedPsnr, HalfMaskClosedForm) {
    const auto gt = random_image8(12, 8, 11, 0, 220);
    const auto pred = offset_tenth(gt);
    Image8 mask(12, 8, 1, 0);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 6; ++c) mask.at(r, c, 0) = 255;
    EXPECT_NEAR(masked_psnr(normalize8(pred), normalize8(gt), mask), 20.0, 0.01);
}

TEST(MaskedPsnr, EmptyMaskRejected) {
    const auto img = normalize8(random_image8(6, 6, 12));
    const Image8 empty(6, 6, 1, 0);
    EXPECT_THROW(masked_psnr(img, img, empty), MetricError);
}

TEST(MaskBbox, ClosedFormExamples) {
    Image8 one(10, 10, 1, 0);
    one.at(5, 7, 0) = 255;
    auto box = mask_bbox(one);
    EXPECT_EQ(box.row_min, 5);
    EXPECT_EQ(box.row_max, 5);
    EXPECT_EQ(box.col_min, 7);
    EXPECT_EQ(box.col_max, 7);

    Image8 two(4, 10, 1, 0); // width 4, height 10
    two.at(0, 0, 0) = 255;
    two.at(9, 3, 0) = 255;
    box = mask_bbox(two);
    EXPECT_EQ(box.row_min, 0);
    EXPECT_EQ(box.row_max, 9);
    EXPECT_EQ(box.col_min, 0);
    EXPECT_EQ(box.col_max, 3);

    const Image8 full(7, 5, 1, 255);
    box = mask_bbox(full);
    EXPECT_EQ(box.rows(), 5);
    EXPECT_EQ(box.cols(), 7);

    EXPECT_THROW(mask_bbox(Image8(4, 4, 1, 0)), MetricError);
}

TEST(MaskBbox, MinimalOverRandomMasks) {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        Image8 mask(16, 12, 1, 0);
        const int set = 1 + int(rng.uniform_int(20));
        for (int s = 0; s < set; ++s)
            mask.at(int(rng.uniform_int(12)), int(rng.uniform_int(16)), 0) = 255;
        const auto box = mask_bbox(mask);
        bool touch_top = false, touch_bottom = false, touch_left = false, touch_right = false;
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 16; ++c)
                if (mask.at(r, c, 0)) {
                    ASSERT_GE(r, box.row_min);
                    ASSERT_LE(r, box.row_max);
                    ASSERT_GE(c, box.col_min);
                    ASSERT_LE(c, box.col_max);
                    touch_top |= r == box.row_min;
                    touch_bottom |= r == box.row_max;
                    touch_left |= c == box.col_min;
                    touch_right |= c == box.col_max;
                }
        EXPECT_TRUE(touch_top && touch_bottom && touch_left && touch_right);
    }
}

TEST(Ssim, IdenticalCropsScoreExactlyOne) {
    const auto img = normalize8(random_image8(20, 18, 14));
    const MaskBox box{2, 15, 3, 17};
    EXPECT_DOUBLE_EQ(ssim_box(img, img, box), 1.0);
}

TEST(Ssim, EqualConstantsScoreOne) {
    const Imagef a(16, 16, 3, 0.42f);
    const MaskBox box{0, 15, 0, 15};
    EXPECT_DOUBLE_EQ(ssim_box(a, a, box), 1.0);
}

TEST(Ssim, InvertedTextureScoresLow) {
    const auto gt = normalize8(random_image8(24, 24, 15));
    Imagef pred = gt;
    for (float& v : pred.data) v = 1.f - v;
    const MaskBox box{0, 23, 0, 23};
    EXPECT_LT(ssim_box(pred, gt, box), 0.5);
}

TEST(Ssim, MatchesTheReferenceComputation) {
    const auto a = normalize8(random_image8(26, 22, 16));
    const auto b = normalize8(random_image8(26, 22, 17));
    const MaskBox box{1, 19, 2, 24};
    EXPECT_NEAR(ssim_box(a, b, box), reference_ssim(a, b, box), 1e-9);
}

TEST(Ssim, SymmetricInItsArguments) {
    const auto a = normalize8(random_image8(18, 16, 18));
    const auto b = normalize8(random_image8(18, 16, 19));
    const MaskBox box{0, 15, 0, 17};
    EXPECT_NEAR(ssim_box(a, b, box), ssim_box(b, a, box), 1e-9);
}

TEST(Ssim, SmallBoxesUseReflectionPadding) {
    const auto a = normalize8(random_image8(20, 20, 20));
    const MaskBox tiny{4, 6, 9, 13}; // 3 rows, 5 cols
    EXPECT_DOUBLE_EQ(ssim_box(a, a, tiny), 1.0);
    const auto b = normalize8(random_image8(20, 20, 21));
    const double v = ssim_box(a, b, tiny);
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
}

namespace {

Scene tiny_eval_scene(int views, uint64_t seed) {
    Scene scene;
    for (int i = 0; i < views; ++i) {
        TargetView t;
        t.name = "view_" + std::to_string(i);
        t.image = random_image8(16, 14, seed + uint64_t(i));
        Image8 mask(16, 14, 1, 0);
        for (int r = 1; r < 13; ++r)
            for (int c = 2; c < 14; ++c) mask.at(r, c, 0) = 255;
        t.mask = mask;
        scene.target_views.push_back(std::move(t));
    }
    return scene;
}

} // namespace

TEST(Evaluate, PerfectPredictionsScoreAtCapWithUnitSsim) {
    const auto dir = fresh_dir("svr_eval_perfect");
    const auto scene = tiny_eval_scene(3, 100);
    for (const auto& t : scene.target_views)
        write_png((dir / (t.name + ".png")).string(), *t.image);
    const auto report = evaluate_scene_dir(dir.string(), scene, "toy", "synthetic");
    ASSERT_EQ(report.views.size(), 3u);
    for (const auto& vm : report.views) {
        EXPECT_EQ(vm.psnr, kPsnrCap);
        EXPECT_EQ(vm.psnr_m, kPsnrCap);
        EXPECT_DOUBLE_EQ(vm.ssim_m, 1.0);
    }
    EXPECT_EQ(report.source_avg_psnr_m, kPsnrCap);
    EXPECT_DOUBLE_EQ(report.view_avg_ssim_m, 1.0);
}

TEST(Evaluate, MissingPredictionNamesTheView) {
    const auto dir = fresh_dir("svr_eval_missing");
    const auto scene = tiny_eval_scene(2, 200);
    write_png((dir / "view_0.png").string(), *scene.target_views[0].image);
    try {
        evaluate_scene_dir(dir.string(), scene, "toy", "synthetic");
        FAIL() << "expected MetricError";
    } catch (const MetricError& e) {
        EXPECT_NE(std::string(e.what()).find("view_1"), std::string::npos);
    }
}

TEST(Evaluate, AggregatesPerSourceAndOverall) {
    std::vector<EvalItem> items;
    const char* sources[3] = {"dtu", "dtu", "synthetic"};
    for (int i = 0; i < 3; ++i) {
        EvalItem item;
        item.scene = "s";
        item.view = "v" + std::to_string(i);
        item.source = sources[i];
        item.gt = random_image8(16, 14, 300 + uint64_t(i));
        item.pred = random_image8(16, 14, 400 + uint64_t(i));
        item.mask = Image8(16, 14, 1, 255);
        items.push_back(std::move(item));
    }
    const auto report = evaluate_views(items);
    ASSERT_EQ(report.sources.size(), 2u);
    EXPECT_EQ(report.sources[0].source, "dtu");
    EXPECT_EQ(report.sources[0].view_count, 2);
    EXPECT_NEAR(report.sources[0].psnr,
                (report.views[0].psnr + report.views[1].psnr) / 2.0, 1e-12);
    EXPECT_NEAR(report.sources[1].psnr, report.views[2].psnr, 1e-12);
    EXPECT_NEAR(report.source_avg_psnr,
                (report.sources[0].psnr + report.sources[1].psnr) / 2.0, 1e-12);
    EXPECT_NEAR(report.view_avg_psnr,
                (report.views[0].psnr + report.views[1].psnr + report.views[2].psnr) / 3.0,
                1e-12);
    EXPECT_NE(report.source_avg_psnr, report.view_avg_psnr);
}

TEST(Evaluate, PerceptualSlotRunsPerPair) {
    std::vector<EvalItem> items;
    for (int i = 0; i < 2; ++i) {
        EvalItem item;
        item.scene = "s";
        item.view = "v" + std::to_string(i);
        item.source = "synthetic";
        item.gt = random_image8(8, 8, 500 + uint64_t(i));
        item.pred = item.gt;
        item.mask = Image8(8, 8, 1, 255);
        items.push_back(std::move(item));
    }
    int calls = 0;
    const auto report =
        evaluate_views(items, [&](const Image8&, const Image8&) { return 0.5 + calls++; });
    EXPECT_EQ(calls, 2);
    ASSERT_TRUE(report.views[0].perceptual.has_value());
    EXPECT_DOUBLE_EQ(*report.views[1].perceptual, 1.5);
}

TEST(Evaluate, ExecScorerParsesExecutableOutput) {
    const auto dir = fresh_dir("svr_exec_scorer");
    const auto script = dir / "score.sh";
    {
        std::ofstream out(script);
        out << "#!/bin/sh\necho 0.25\n";
    }
    fs::permissions(script, fs::perms::owner_all);
    const auto scorer = exec_pair_scorer(script.string());
    const auto img = random_image8(6, 6, 600);
    EXPECT_DOUBLE_EQ(scorer(img, img), 0.25);
}

TEST(Evaluate, CsvHasFixedSchemaAndStableBytes) {
    const auto dir = fresh_dir("svr_eval_csv");
    MetricReport report;
    report.views.push_back({"toy", "view_0", "synthetic", 21.5, 20.25, 0.875, false, {}});
    report.views.push_back({"toy", "view_1", "synthetic", 19.0, 18.5, 0.75, false, {}});
    const auto path = (dir / "metrics.csv").string();
    write_metrics_csv(path, report);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "scene,view,source,psnr,psnr_m,ssim_m");
    std::getline(in, line);
    EXPECT_EQ(line, "toy,view_0,synthetic,21.500000,20.250000,0.875000");

    write_metrics_csv((dir / "again.csv").string(), report);
    std::ifstream a(path, std::ios::binary), b((dir / "again.csv").string(), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    EXPECT_EQ(sa, sb);
}

TEST(Evaluate, TableMentionsBothAverages) {
    MetricReport report;
    report.views.push_back({"toy", "view_0", "synthetic", 21.0, 20.0, 0.9, false, {}});
    report.sources.push_back({"synthetic", 21.0, 20.0, 0.9, 1});
    report.source_avg_psnr = report.view_avg_psnr = 21.0;
    report.source_avg_psnr_m = report.view_avg_psnr_m = 20.0;
    report.source_avg_ssim_m = report.view_avg_ssim_m = 0.9;
    const auto table = format_metrics_table(report);
    EXPECT_NE(table.find("avg of source means"), std::string::npos);
    EXPECT_NE(table.find("avg over views"), std::string::npos);
    EXPECT_NE(table.find("view_0"), std::string::npos);
}
