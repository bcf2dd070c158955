// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/encoding.hpp"
#include "svr/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace svr;
using Td = ad::Tensor<double>;

TEST(Encoding, ZeroPointGivesZeroSinUnitCos) {
    EncodingConfig cfg;
    cfg.bands = 2;
    Td x({1, 3}, 0.0);
    const Td e = encode_points(x, cfg);
    ASSERT_EQ(e.shape, (ad::Shape{1, 15}));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(e.data[size_t(i)], 0.0); // identity
    for (int b = 0; b < 2; ++b) {
        for (int a = 0; a < 3; ++a) {
            EXPECT_EQ(e.data[size_t(3 + 6 * b + a)], 0.0); // sin(0)
            EXPECT_EQ(e.data[size_t(3 + 6 * b + 3 + a)], 1.0); // cos(0)
        }
    }
}

TEST(Encoding, ZeroBandsIsIdentity) {
    EncodingConfig cfg;
    cfg.bands = 0;
    Td x({2, 3}, {0.1, -0.2, 0.3, 1.0, 2.0, -3.0});
    const Td e = encode_points(x, cfg);
    EXPECT_EQ(e.shape, x.shape);
    EXPECT_EQ(e.data, x.data);
}

TEST(Encoding, BandZeroAtUnitX) {
    EncodingConfig cfg;
    cfg.bands = 1;
    Td x({1, 3}, {1.0, 0.0, 0.0});
    const Td e = encode_points(x, cfg);
    // band 0 frequency is pi: sin(pi) ~ 0, cos(pi) = -1 on the x axis
    EXPECT_NEAR(e.data[3], 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(e.data[6], -1.0);
}

TEST(FrequencyMaskSchedule, StartAndEnd) {
    EncodingConfig cfg;
    cfg.bands = 8;
    cfg.anneal_steps = 1000;
    const auto m0 = mask_at(0, cfg);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(m0.slots[size_t(i)], 1.0);
    for (int b = 0; b < 8; ++b) EXPECT_EQ(m0.slots[size_t(3 + b)], 0.0);

    for (int64_t t : {1000, 1001, 100000}) {
        const auto m = mask_at(t, cfg);
        for (double s : m.slots) EXPECT_EQ(s, 1.0);
    }
}

TEST(FrequencyMaskSchedule, MidScheduleWorkedExample) {
    EncodingConfig cfg;
    cfg.bands = 10;
    cfg.anneal_steps = 40000;
    const auto m = mask_at(20000, cfg); // progress 5 of 10 bands
    ASSERT_EQ(m.slots.size(), 13u);
    for (int i = 0; i < 8; ++i) EXPECT_EQ(m.slots[size_t(i)], 1.0) << "slot " << i;
    for (int i = 8; i < 13; ++i) EXPECT_EQ(m.slots[size_t(i)], 0.0) << "slot " << i;
    EXPECT_EQ(fully_on_slots(m), 8);
}

TEST(FrequencyMaskSchedule, MonotoneRevealOverRandomSchedules) {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        EncodingConfig cfg;
        cfg.bands = 1 + int(rng.uniform_int(16));
        cfg.anneal_steps = 1 + int(rng.uniform_int(50000));
        int64_t t1 = int64_t(rng.uniform_int(60000));
        int64_t t2 = int64_t(rng.uniform_int(60000));
        if (t1 > t2) std::swap(t1, t2);
        const auto m1 = mask_at(t1, cfg);
        const auto m2 = mask_at(t2, cfg);
        for (size_t i = 0; i < m1.slots.size(); ++i)
            ASSERT_LE(m1.slots[i], m2.slots[i])
                << "slot " << i << " t1=" << t1 << " t2=" << t2 << " L=" << cfg.bands
                << " T=" << cfg.anneal_steps;
    }
}

TEST(FrequencyMaskSchedule, FullyOnCountMatchesFormula) {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        EncodingConfig cfg;
        cfg.bands = 1 + int(rng.uniform_int(16));
        cfg.anneal_steps = 1 + int(rng.uniform_int(50000));
        const int64_t t = int64_t(rng.uniform_int(60000));
        const auto m = mask_at(t, cfg);
        int expected;
        if (t >= cfg.anneal_steps) {
            expected = cfg.bands + 3;
        } else {
            const double p = double(t) * double(cfg.bands) / double(cfg.anneal_steps);
            expected = int(std::floor(p)) + 3;
        }
        ASSERT_EQ(fully_on_slots(m), expected)
            << "t=" << t << " L=" << cfg.bands << " T=" << cfg.anneal_steps;
    }
}

TEST(FrequencyMaskSchedule, SlotsNonIncreasingBeyondIdentity) {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        EncodingConfig cfg;
        cfg.bands = 1 + int(rng.uniform_int(16));
        cfg.anneal_steps = 1 + int(rng.uniform_int(50000));
        const auto m = mask_at(int64_t(rng.uniform_int(60000)), cfg);
        for (size_t i = 4; i < m.slots.size(); ++i) ASSERT_GE(m.slots[i - 1], m.slots[i]);
    }
}

TEST(FrequencyMaskSchedule, LiteralClampedBranchValues) {
    EncodingConfig cfg;
    cfg.bands = 10;
    cfg.anneal_steps = 40000;
    cfg.mode = MaskMode::LiteralClamped;
    const auto m = mask_at(22000, cfg); // progress 5.5
    // 1-based slots: 1 for i <= 8.5, fractional 0.5 for 8.5 < i <= 11.5
    for (int i = 0; i < 8; ++i) EXPECT_EQ(m.slots[size_t(i)], 1.0);
    for (int i = 8; i < 11; ++i) EXPECT_DOUBLE_EQ(m.slots[size_t(i)], 0.5);
    for (size_t i = 11; i < m.slots.size(); ++i) EXPECT_EQ(m.slots[i], 0.0);
}

TEST(ApplyMask, AllOnesIsIdentity) {
    EncodingConfig cfg;
    cfg.bands = 3;
    cfg.anneal_steps = 10;
    Rng rng(5);
    Td x({4, 3});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    const Td e = encode_points(x, cfg);
    const Td masked = apply_mask(e, mask_at(10, cfg));
    EXPECT_EQ(masked.data, e.data);
}

TEST(ApplyMask, ZeroBandsLeaveOnlyIdentity) {
    EncodingConfig cfg;
    cfg.bands = 2;
    cfg.anneal_steps = 100;
    Td x({1, 3}, {0.3, -0.6, 0.9});
    const Td e = encode_points(x, cfg);
    const Td masked = apply_mask(e, mask_at(0, cfg));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(masked.data[size_t(i)], x.data[size_t(i)]);
    for (size_t i = 3; i < masked.data.size(); ++i) EXPECT_EQ(masked.data[i], 0.0);
}

TEST(ApplyMask, FractionalSlotScalesItsSixEntries) {
    EncodingConfig cfg;
    cfg.bands = 2;
    FrequencyMask m;
    m.slots = {1, 1, 1, 0.5, 1};
    Td x({1, 3}, {0.2, 0.4, 0.6});
    const Td e = encode_points(x, cfg);
    const Td masked = apply_mask(e, m);
    for (int k = 0; k < 6; ++k)
        EXPECT_DOUBLE_EQ(masked.data[size_t(3 + k)], 0.5 * e.data[size_t(3 + k)]);
    for (int k = 6; k < 12; ++k) EXPECT_EQ(masked.data[size_t(3 + k)], e.data[size_t(3 + k)]);
}
