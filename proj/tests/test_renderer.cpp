// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/renderer.hpp"
#include "testing_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace svr;
using ad::Shape;
using Td = ad::Tensor<double>;

TEST(StratifiedSampling, MidpointsWithoutJitter) {
    Rng rng(0);
    const auto ts = sample_stratified(0.0, 1.0, 4, false, rng);
    const std::vector<double> expected{0.125, 0.375, 0.625, 0.875};
    ASSERT_EQ(ts.size(), 4u);
    for (size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(ts[i], expected[i]);

    Rng rng2(0);
    const auto one = sample_stratified(2.0, 4.0, 1, false, rng2);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one[0], 3.0);
}

TEST(StratifiedSampling, JitterStaysInStratumAndIsDeterministic) {
    Rng a(77), b(77);
    const auto t1 = sample_stratified(1.0, 3.0, 8, true, a);
    const auto t2 = sample_stratified(1.0, 3.0, 8, true, b);
    EXPECT_EQ(t1, t2);
    const double h = 2.0 / 8.0;
    for (int k = 0; k < 8; ++k) {
        EXPECT_GE(t1[size_t(k)], 1.0 + k * h);
        EXPECT_LT(t1[size_t(k)], 1.0 + (k + 1) * h);
    }
    EXPECT_TRUE(std::is_sorted(t1.begin(), t1.end()));
}

TEST(ImportanceSampling, ConcentratedWeightsConcentrateSamples) {
    std::vector<double> w(16, 0.0);
    w[9] = 5.0;
    Rng rng(5);
    const auto ts = sample_importance(0.0, 1.0, w, 256, true, rng);
    const double lo = 9.0 / 16.0, hi = 10.0 / 16.0;
    int inside = 0;
    for (double t : ts) inside += (t >= lo && t < hi);
    EXPECT_GE(inside, int(0.9 * 256));
}

TEST(ImportanceSampling, UniformWeightsLookUniform) {
    std::vector<double> w(16, 1.0);
    Rng rng(6);
    auto ts = sample_importance(0.0, 1.0, w, 256, true, rng);
    std::sort(ts.begin(), ts.end());
    // Kolmogorov-Smirnov statistic against U[0,1]
    double ks = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
        const double ecdf_hi = double(i + 1) / double(ts.size());
        const double ecdf_lo = double(i) / double(ts.size());
        ks = std::max(ks, std::max(std::abs(ecdf_hi - ts[i]), std::abs(ts[i] - ecdf_lo)));
    }
    EXPECT_LT(ks, 0.1);
}

TEST(ImportanceSampling, ZeroWeightsFallBackToUniform) {
    std::vector<double> zero(16, 0.0);
    Rng r1(9), r2(9);
    const auto ts = sample_importance(0.3, 2.7, zero, 64, true, r1);
    ASSERT_EQ(ts.size(), 64u);
    for (double t : ts) EXPECT_EQ(t, 0.3 + r2.uniform() * (2.7 - 0.3));
}

TEST(ImportanceSampling, JitterOffIgnoresTheRngEntirely) {
    std::vector<double> w(16, 0.0);
    w[3] = 1.0;
    w[11] = 3.0;
    Rng r1(1), r2(999);
    const auto a = sample_importance(0.0, 1.0, w, 32, false, r1);
    const auto b = sample_importance(0.0, 1.0, w, 32, false, r2);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
}

namespace {

// Single ray, K samples, constant colour per sample.
struct RayFixture {
    Td sigma, rgb, ts;
    std::vector<double> t_far;
};

RayFixture make_fixture(const std::vector<double>& sigmas, const std::vector<double>& ts,
                        double t_far, const std::array<double, 3>& colour) {
    RayFixture f;
    const int64_t k = int64_t(ts.size());
    f.sigma = Td({1, k});
    f.ts = Td({1, k});
    f.rgb = Td({1, k, 3});
    for (int64_t i = 0; i < k; ++i) {
        f.sigma.data[size_t(i)] = sigmas[size_t(i)];
        f.ts.data[size_t(i)] = ts[size_t(i)];
        for (int c = 0; c < 3; ++c) f.rgb.data[size_t(i * 3 + c)] = colour[size_t(c)];
    }
    f.t_far = {t_far};
    return f;
}

} // namespace

TEST(Composite, ZeroDensityGivesExactBackground) {
    auto f = make_fixture({0, 0, 0, 0}, {0.5, 1.0, 1.5, 2.0}, 2.5, {0.9, 0.1, 0.4});
    const std::array<double, 3> bg{0.25, 0.5, 0.75};
    const auto out = composite<Td>(f.sigma, f.rgb, std::nullopt, f.ts, f.t_far, bg);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(out.rgb.data[size_t(c)], bg[size_t(c)]);
    EXPECT_EQ(out.opacity.data[0], 0.0);
    EXPECT_EQ(out.depth.data[0], 0.0);
}

TEST(Composite, HalfBlendAtLogTwoOpticalDepth) {
    // one sample, sigma*delta = ln 2 -> alpha exactly one half
    const double t0 = 1.0, t_far = 2.0;
    const double sigma = std::log(2.0) / (t_far - t0);
    auto f = make_fixture({sigma}, {t0}, t_far, {0.8, 0.6, 0.2});
    const std::array<double, 3> black{0, 0, 0};
    const auto out = composite<Td>(f.sigma, f.rgb, std::nullopt, f.ts, f.t_far, black);
    EXPECT_NEAR(out.weights.data[0], 0.5, 1e-12);
    EXPECT_NEAR(out.rgb.data[0], 0.4, 1e-12);
    EXPECT_NEAR(out.rgb.data[1], 0.3, 1e-12);
    EXPECT_NEAR(out.rgb.data[2], 0.1, 1e-12);
}

TEST(Composite, OpaqueFirstSampleDominates) {
    auto f = make_fixture({20.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, 4.0, {0.3, 0.5, 0.7});
    const auto out = composite<Td>(f.sigma, f.rgb, std::nullopt, f.ts, f.t_far, std::nullopt);
    for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(out.rgb.data[size_t(c)], f.rgb.data[size_t(c)], 1e-8);
    EXPECT_LT(out.trans.data[1], 1e-8); // transmittance behind the wall
}

TEST(Composite, EnergyConservedOnRandomRays) {
    Rng rng(123);
    const int64_t r = 100, k = 32;
    for (int rep = 0; rep < 100; ++rep) {
        Td sigma({r, k}), ts({r, k}), rgb({r, k, 3});
        std::vector<double> t_far(size_t(r), 0.0);
        for (int64_t i = 0; i < r; ++i) {
            double t = 0.1;
            for (int64_t j = 0; j < k; ++j) {
                sigma.data[size_t(i * k + j)] = rng.uniform(0.0, 3.0);
                t += rng.uniform(0.01, 0.1);
                ts.data[size_t(i * k + j)] = t;
            }
            t_far[size_t(i)] = t + rng.uniform(0.01, 0.2);
        }
        for (auto& v : rgb.data) v = rng.uniform(0, 1);
        const auto out = composite<Td>(sigma, rgb, std::nullopt, ts, t_far, std::nullopt);
        for (int64_t i = 0; i < r; ++i) {
            EXPECT_NEAR(out.opacity.data[size_t(i)] + out.trans_final.data[size_t(i)], 1.0, 1e-6);
            // weights nonnegative, transmittance non-increasing
            double prev = 1.0;
            for (int64_t j = 0; j < k; ++j) {
                EXPECT_GE(out.weights.data[size_t(i * k + j)], 0.0);
                EXPECT_LE(out.trans.data[size_t(i * k + j)], prev + 1e-12);
                prev = out.trans.data[size_t(i * k + j)];
            }
        }
    }
}

TEST(Composite, TransmittanceTelescopes) {
    Rng rng(321);
    const int64_t k = 16;
    Td sigma({1, k}), ts({1, k}), rgb({1, k, 3}, 0.5);
    double t = 0.5;
    for (int64_t j = 0; j < k; ++j) {
        sigma.data[size_t(j)] = rng.uniform(0.0, 2.0);
        ts.data[size_t(j)] = t;
        t += 0.125;
    }
    const auto out = composite<Td>(sigma, rgb, std::nullopt, ts, {t}, std::nullopt);
    for (int64_t j = 0; j + 1 < k; ++j) {
        const double delta = ts.data[size_t(j + 1)] - ts.data[size_t(j)];
        const double expected = out.trans.data[size_t(j)] * std::exp(-sigma.data[size_t(j)] * delta);
        EXPECT_NEAR(out.trans.data[size_t(j + 1)], expected, 1e-12);
    }
}

TEST(Composite, UnsortedSamplesRejected) {
    auto f = make_fixture({1, 1}, {2.0, 1.0}, 3.0, {0.5, 0.5, 0.5});
    EXPECT_THROW(composite<Td>(f.sigma, f.rgb, std::nullopt, f.ts, f.t_far, std::nullopt),
                 ad::ShapeError);
}

namespace {

// Smooth analytic medium along one ray for convergence studies. The density
// stays well away from zero across [t_near, t_far] so the quadrature error is
// dominated by its leading O(1/N) term rather than higher-order remainders.
double smooth_sigma(double t) { return 0.6 + 0.4 * std::sin(1.3 * t + 0.4); }
std::array<double, 3> smooth_colour(double t) {
    return {0.5 + 0.3 * std::sin(1.7 * t), 0.5 + 0.2 * std::cos(0.9 * t),
            0.5 + 0.25 * std::sin(2.3 * t + 1.0)};
}

std::array<double, 3> render_smooth(int n) {
    const double t0 = 0.5, t1 = 4.5;
    Rng rng(0);
    const auto ts = sample_stratified(t0, t1, n, false, rng);
    Td sigma({1, int64_t(n)}), rgb({1, int64_t(n), 3}), tst({1, int64_t(n)});
    for (int j = 0; j < n; ++j) {
        sigma.data[size_t(j)] = smooth_sigma(ts[size_t(j)]);
        tst.data[size_t(j)] = ts[size_t(j)];
        const auto c = smooth_colour(ts[size_t(j)]);
        for (int ch = 0; ch < 3; ++ch) rgb.data[size_t(j * 3 + ch)] = c[size_t(ch)];
    }
    const auto out = composite<Td>(sigma, rgb, std::nullopt, tst, {t1}, std::nullopt);
    return {out.rgb.data[0], out.rgb.data[1], out.rgb.data[2]};
}

double colour_error(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double e = 0;
    for (int c = 0; c < 3; ++c) e += (a[size_t(c)] - b[size_t(c)]) * (a[size_t(c)] - b[size_t(c)]);
    return std::sqrt(e);
}

} // namespace

TEST(Composite, QuadratureErrorHalvesWithSampleCount) {
    const auto reference = render_smooth(8192);
    const double e32 = colour_error(render_smooth(32), reference);
    const double e64 = colour_error(render_smooth(64), reference);
    const double e128 = colour_error(render_smooth(128), reference);
    ASSERT_GT(e32, 0.0);
    const double r1 = e64 / e32;
    const double r2 = e128 / e64;
    EXPECT_GE(r1, 0.35);
    EXPECT_LE(r1, 0.65);
    EXPECT_GE(r2, 0.35);
    EXPECT_LE(r2, 0.65);
}

TEST(Composite, DepthTracksAnalyticBoxOccupancy) {
    // density injected from an analytic slab [2.2, 3.0]: opaque inside,
    // empty outside; expected depth within one coarse stratum of the wall
    const double t0 = 0.5, t1 = 4.5;
    const int n = 32;
    Rng rng(0);
    const auto ts = sample_stratified(t0, t1, n, false, rng);
    Td sigma({1, n}), rgb({1, n, 3}, 0.5), tst({1, n});
    for (int j = 0; j < n; ++j) {
        tst.data[size_t(j)] = ts[size_t(j)];
        sigma.data[size_t(j)] = (ts[size_t(j)] >= 2.2 && ts[size_t(j)] <= 3.0) ? 50.0 : 0.0;
    }
    const auto out = composite<Td>(sigma, rgb, std::nullopt, tst, {t1}, std::nullopt);
    EXPECT_NEAR(out.depth.data[0], 2.2, 2.0 * (t1 - t0) / n);
    EXPECT_NEAR(out.opacity.data[0], 1.0, 1e-6);
}

TEST(RenderRays, DeterministicAndWellFormed) {
    FieldConfig cfg;
    cfg.hidden_width = 16;
    cfg.depth = 2;
    cfg.bottleneck = 8;
    cfg.skip_layer = 1;
    cfg.point_enc.bands = 2;
    cfg.point_enc.anneal_steps = 100;
    cfg.dir_bands = 1;
    Rng rng(71);
    const auto coarse = init_field_params<float>(cfg, rng);
    const auto fine = init_field_params<float>(cfg, rng);

    Camera cam;
    cam.fx = cam.fy = 8.0;
    cam.cx = cam.cy = 4.0;
    cam.width = cam.height = 8;
    cam.near = 1.0;
    cam.far = 5.0;
    cam.world_from_camera = look_at(Vec3(3, 0, 1), Vec3::Zero());
    std::vector<Ray> rays;
    for (int i = 0; i < 4; ++i) rays.push_back(make_ray(cam, i, i, 0));

    SamplingConfig sampling;
    sampling.n_coarse = 8;
    sampling.n_fine = 8;
    const auto r1 = render_rays(cfg, coarse, fine, rays, sampling, 50, 99, 7, std::nullopt);
    const auto r2 = render_rays(cfg, coarse, fine, rays, sampling, 50, 99, 7, std::nullopt);
    EXPECT_EQ(r1.fine.rgb.data, r2.fine.rgb.data);
    EXPECT_EQ(r1.coarse.ts.data, r2.coarse.ts.data);

    EXPECT_EQ(r1.coarse.ts.shape, (Shape{4, 8}));
    EXPECT_EQ(r1.fine.ts.shape, (Shape{4, 16}));
    for (int64_t i = 0; i < 4; ++i) {
        for (int64_t j = 1; j < 16; ++j)
            EXPECT_LE(r1.fine.ts.data[size_t(i * 16 + j - 1)], r1.fine.ts.data[size_t(i * 16 + j)]);
    }
    EXPECT_TRUE(ad::all_finite(r1.fine.rgb));

    // chunking must not change sampling decisions; values agree to float
    // tolerance (GEMM blocking may differ between batch shapes)
    const std::vector<Ray> first_two(rays.begin(), rays.begin() + 2);
    const auto r3 = render_rays(cfg, coarse, fine, first_two, sampling, 50, 99, 7, std::nullopt);
    for (size_t i = 0; i < 2 * 8; ++i)
        EXPECT_EQ(r3.coarse.ts.data[i], r1.coarse.ts.data[i]);
    for (size_t i = 0; i < 2 * 3; ++i)
        EXPECT_NEAR(r3.fine.rgb.data[i], r1.fine.rgb.data[i], 1e-5);
}
