// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/losses.hpp"
#include "testing_util.hpp"

#include <gtest/gtest.h>

using namespace svr;
using ad::Shape;
using Td = ad::Tensor<double>;
using testutil::check_graph_gradients;

TEST(Photometric, ClosedForms) {
    Td target({1, 3}, {0.2, 0.4, 0.6});
    Td exact = target;
    EXPECT_DOUBLE_EQ(loss_photometric(exact, exact, target).item(), 0.0);

    Td off({1, 3}, {0.3, 0.4, 0.6}); // +0.1 in one channel of the fine pass
    EXPECT_NEAR(loss_photometric(exact, off, target).item(), 0.01, 1e-15);

    // doubling an identical batch doubles the sum
    Td t2({2, 3}), c2({2, 3}), f2({2, 3});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            t2.data[size_t(r * 3 + c)] = target.data[size_t(c)];
            c2.data[size_t(r * 3 + c)] = exact.data[size_t(c)];
            f2.data[size_t(r * 3 + c)] = off.data[size_t(c)];
        }
    EXPECT_NEAR(loss_photometric(c2, f2, t2).item(),
                2.0 * loss_photometric(exact, off, target).item(), 1e-15);
    // mean-normalized variant is batch-size independent
    EXPECT_NEAR(loss_photometric(c2, f2, t2, true).item(),
                loss_photometric(exact, off, target, true).item(), 1e-15);
}

TEST(Occlusion, ClosedForms) {
    Td ones({3, 10}, 1.0);
    EXPECT_NEAR(loss_occlusion(ones, 5).item(), 0.5, 1e-12);
    Td zeros({3, 10}, 0.0);
    EXPECT_DOUBLE_EQ(loss_occlusion(zeros, 5).item(), 0.0);
    EXPECT_DOUBLE_EQ(loss_occlusion(ones, 0).item(), 0.0);
}

TEST(DepthTv, ClosedForms) {
    Td flat({3, 4}, 1.7);
    EXPECT_DOUBLE_EQ(loss_depth_tv(flat).item(), 0.0);

    Td patch({2, 2}, {0.0, 1.0, 0.0, 1.0});
    EXPECT_DOUBLE_EQ(loss_depth_tv(patch).item(), 2.0);

    Td single({1, 1}, 5.0);
    EXPECT_DOUBLE_EQ(loss_depth_tv(single).item(), 0.0);
}

TEST(DepthTv, ValidityMaskDropsPairs) {
    Td patch({2, 2}, {0.0, 1.0, 0.0, 1.0});
    Td valid({2, 2}, {1.0, 0.0, 1.0, 1.0}); // invalidate the top-right pixel
    // surviving pairs: vertical (0,0)-(1,0) diff 0, horizontal (1,0)-(1,1) diff 1
    EXPECT_DOUBLE_EQ(loss_depth_tv(patch, valid).item(), 1.0);
}

TEST(DepthRank, ClosedForms) {
    // ordering agrees with the prior, gaps exceed the margin
    Td agree({3}, {1.0, 2.0, 3.0});
    const std::vector<IndexPair> chain{{0, 1}, {1, 2}, {0, 2}};
    EXPECT_DOUBLE_EQ(loss_depth_rank(agree, chain, 1e-4).item(), 0.0);

    // single violation: prior says first <= second but rendered 2 > 1
    Td violate({2}, {2.0, 1.0});
    EXPECT_NEAR(loss_depth_rank(violate, {{0, 1}}, 0.1).item(), 1.1, 1e-12);

    // ties with zero margin cost nothing
    Td tie({2}, {1.5, 1.5});
    EXPECT_DOUBLE_EQ(loss_depth_rank(tie, {{0, 1}}, 0.0).item(), 0.0);
}

TEST(DepthRank, HingeIsPiecewiseLinear) {
    Td d1({2}, {1.5, 1.0});
    Td d2({2}, {2.0, 1.0}); // doubles the violation beyond zero margin
    const std::vector<IndexPair> p{{0, 1}};
    EXPECT_NEAR(loss_depth_rank(d2, p, 0.0).item(), 2.0 * loss_depth_rank(d1, p, 0.0).item(),
                1e-12);
}

TEST(DepthContinuity, ClosedForms) {
    Td flat({4}, 2.5);
    const std::vector<IndexPair> p{{0, 1}, {1, 2}, {2, 3}};
    EXPECT_DOUBLE_EQ(loss_depth_continuity(flat, p, 0.05).item(), 0.0);

    Td jump({2}, {1.0, 2.5}); // |diff| = 1.5, threshold 1 -> 0.5
    EXPECT_NEAR(loss_depth_continuity(jump, {{0, 1}}, 1.0).item(), 0.5, 1e-12);

    // threshold beyond any difference -> no violation
    EXPECT_DOUBLE_EQ(loss_depth_continuity(jump, {{0, 1}}, 100.0).item(), 0.0);
}

TEST(Feature, ClosedForms) {
    Td gt({1, 2}, {0.3, 0.7});
    EXPECT_NEAR(loss_feature(gt, gt).item(), 0.0, 1e-11);

    Td pred({1, 2}, {3.3, 4.7}); // difference (3,4) -> norm 5
    EXPECT_NEAR(loss_feature(pred, gt).item(), 5.0, 1e-9);

    Td pred2({1, 2}, {6.3, 8.7}); // difference doubled
    EXPECT_NEAR(loss_feature(pred2, gt).item(), 10.0, 1e-9);
}

TEST(Schedules, TvWeightAnnealsLinearly) {
    EXPECT_DOUBLE_EQ(tv_weight_at(0, 1000, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(tv_weight_at(500, 1000, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(tv_weight_at(1000, 1000, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(tv_weight_at(2000, 1000, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(tv_weight_at(250, 1000, 0.4), 0.1);
}

TEST(LossReport, TotalMatchesIndependentSum) {
    LossReport report;
    report.add("photometric", 0.5, 1.0);
    report.add("tv", 2.0, 0.25);
    report.add("rank", 1.1, 0.2);
    double expected = 0;
    for (size_t i = 0; i < report.names.size(); ++i)
        expected += report.values[i] * report.weights[i];
    EXPECT_NEAR(report.total, expected, 1e-6);
    EXPECT_NEAR(report.total, 1.22, 1e-12);
}

TEST(PairSampling, RankPairsOrientedByPrior) {
    Rng rng(13);
    std::vector<double> prior(64);
    for (auto& v : prior) v = rng.uniform(1.0, 5.0);
    std::vector<uint8_t> valid(64, 1);
    valid[10] = 0;
    Rng srng(14);
    const auto pairs = sample_rank_pairs(prior, valid, 128, srng);
    EXPECT_GT(pairs.size(), 100u);
    for (const auto& [a, b] : pairs) {
        EXPECT_LE(prior[size_t(a)], prior[size_t(b)]);
        EXPECT_NE(a, 10);
        EXPECT_NE(b, 10);
    }
}

TEST(PairSampling, KnnPicksValueNearestInWindow) {
    // 3x3 patch, K=1, window 3: each pixel pairs with its value-closest
    // spatial neighbour
    const std::vector<double> prior{1.0, 1.1, 9.0, //
                                    5.0, 1.2, 9.2, //
                                    5.1, 7.0, 9.1};
    const auto pairs = knn_depth_pairs(prior, 3, 3, {}, 1, 3);
    ASSERT_EQ(pairs.size(), 9u);
    // pixel 0 (value 1.0): closest among {1.1, 5.0, 1.2} is 1.1 at index 1
    EXPECT_EQ(pairs[0], (IndexPair{0, 1}));
    // pixel 2 (value 9.0): closest among {1.1, 1.2, 9.2} is 9.2 at index 5
    EXPECT_EQ(pairs[2], (IndexPair{2, 5}));
    // pixel 8 (value 9.1): window covers {1.2, 9.2, 7.0}: picks 9.2 at 5
    EXPECT_EQ(pairs[8], (IndexPair{8, 5}));
}

TEST(GradCheck, AllLossesDifferentiable) {
    Rng rng(2718);
    for (int trial = 0; trial < 25; ++trial) {
        Td cc = testutil::random_tensor(rng, {4, 3}, 0.0, 1.0);
        Td cf = testutil::random_tensor(rng, {4, 3}, 0.0, 1.0);
        Td tgt = testutil::random_tensor(rng, {4, 3}, 0.0, 1.0);
        ASSERT_LT(check_graph_gradients(
                      [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& in) {
                          return loss_photometric(in[0], in[1], tgt);
                      },
                      {cc, cf}),
                  1e-3);

        Td sigma = testutil::random_tensor(rng, {3, 8}, 0.01, 2.0);
        ASSERT_LT(check_graph_gradients(
                      [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& in) {
                          return loss_occlusion(in[0], 3);
                      },
                      {sigma}),
                  1e-3);

        Td patch = testutil::random_tensor(rng, {5, 5}, 1.0, 3.0);
        ASSERT_LT(check_graph_gradients(
                      [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& in) {
                          return loss_depth_tv(in[0]);
                      },
                      {patch}),
                  1e-3);

        // rank/continuity: keep rendered values away from hinge kinks
        Td depth({6}, {1.0, 2.5, 0.7, 3.2, 1.9, 2.8});
        for (auto& v : depth.data) v += rng.uniform(-0.05, 0.05);
        const std::vector<IndexPair> pairs{{0, 1}, {2, 3}, {4, 5}, {3, 0}};
        ASSERT_LT(check_graph_gradients(
                      [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& in) {
                          return loss_depth_rank(in[0], pairs, 0.1);
                      },
                      {depth}),
                  1e-3);
        ASSERT_LT(check_graph_gradients(
                      [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& in) {
                          return loss_depth_continuity(in[0], pairs, 0.3);
                      },
                      {depth}),
                  1e-3);

        Td feat = testutil::random_tensor(rng, {4, 6}, -1.0, 1.0);
        Td feat_gt = testutil::random_tensor(rng, {4, 6}, -1.0, 1.0);
        ASSERT_LT(check_graph_gradients(
                      [&](ad::Tape<double>& t, const std::vector<ad::Var<double>>& in) {
                          return loss_feature(in[0], feat_gt);
                      },
                      {feat}),
                  1e-3);
    }
}
