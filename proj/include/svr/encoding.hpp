// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace svr {

// How the band mask interpolates while frequencies are being revealed.
// `Ramp` keeps every revealed band fully on and feeds the next band its
// fractional weight, which makes the schedule monotone in t per slot.
// `LiteralClamped` evaluates the printed closed form (middle window weighted
// by the fractional part) and is kept for comparison; it is not monotone.
enum class MaskMode { Ramp, LiteralClamped };

struct EncodingConfig {
    int bands = 8; // L
    int anneal_steps = 1; // T; mask is all-ones from this step on
    MaskMode mode = MaskMode::Ramp;

    int encoded_dim() const { return 3 + 6 * bands; }
    int slot_count() const { return 3 + bands; }
};

// Per-slot visibility of the positional encoding at one training step:
// 3 identity slots followed by one slot per frequency band. Band slot
// values scale all 6 sin/cos entries of that band.
struct FrequencyMask {
    std::vector<double> slots;
    int64_t t = 0;
};

// Slot visibility schedule. Identity slots are always on; with p = t*L/T,
// floor(p)+3 slots are fully on, the next band carries frac(p), and bands
// beyond that stay dark until the schedule reaches them. All slots are on
// from t = T.
inline FrequencyMask mask_at(int64_t t, const EncodingConfig& cfg) {
    if (cfg.bands < 0) throw ad::ShapeError("mask_at: negative band count");
    if (cfg.anneal_steps < 1) throw ad::ShapeError("mask_at: anneal_steps must be >= 1");
    FrequencyMask m;
    m.t = t;
    m.slots.assign(size_t(cfg.slot_count()), 0.0);
    for (int i = 0; i < 3; ++i) m.slots[size_t(i)] = 1.0;
    if (cfg.bands == 0) return m;

    if (t >= cfg.anneal_steps) {
        std::fill(m.slots.begin(), m.slots.end(), 1.0);
        return m;
    }
    const double p = double(t) * double(cfg.bands) / double(cfg.anneal_steps);
    if (cfg.mode == MaskMode::Ramp) {
        const double full = std::floor(p);
        const double frac = p - full;
        for (int b = 0; b < cfg.bands; ++b) {
            const double v = b < int(full) ? 1.0 : (b == int(full) ? frac : 0.0);
            m.slots[size_t(3 + b)] = v;
        }
    } else {
        // printed closed form: slot index i (1-based over all L+3 slots) gets
        // 1 for i <= p+3, the fractional weight for p+3 < i <= p+6, else 0
        const double w = std::clamp(p - std::floor(p), 0.0, 1.0);
        for (int b = 0; b < cfg.bands; ++b) {
            const double i = double(b + 4); // 1-based slot index of band b
            double v = 0.0;
            if (i <= p + 3.0)
                v = 1.0;
            else if (i <= p + 6.0)
                v = w;
            m.slots[size_t(3 + b)] = v;
        }
    }
    return m;
}

// Number of fully-on slots (identity included).
inline int fully_on_slots(const FrequencyMask& m) {
    int n = 0;
    for (double s : m.slots) n += (s == 1.0);
    return n;
}

// gamma_L(x) for a batch: rows of `x` are 3D points, output rows are
// [x, y, z, sin(2^0 pi x), sin(2^0 pi y), sin(2^0 pi z), cos(2^0 pi ...) x3,
//  sin(2^1 pi ...) x3, cos ...] with frequencies 2^b * pi, b = 0..L-1.
template <typename T>
ad::Tensor<T> encode_points(const ad::Tensor<T>& x, const EncodingConfig& cfg) {
    if (x.rank() != 2 || x.shape[1] != 3)
        throw ad::ShapeError("encode_points: expected [N,3], got " + ad::shape_str(x.shape));
    const int64_t n = x.shape[0];
    ad::Tensor<T> out({n, int64_t(cfg.encoded_dim())});
    for (int64_t r = 0; r < n; ++r) {
        const T* px = &x.data[size_t(r) * 3];
        T* po = &out.data[size_t(r) * size_t(cfg.encoded_dim())];
        po[0] = px[0];
        po[1] = px[1];
        po[2] = px[2];
        for (int b = 0; b < cfg.bands; ++b) {
            const double freq = std::ldexp(3.14159265358979323846, b); // 2^b * pi
            for (int a = 0; a < 3; ++a) {
                const double arg = freq * double(px[a]);
                po[3 + 6 * b + a] = T(std::sin(arg));
                po[3 + 6 * b + 3 + a] = T(std::cos(arg));
            }
        }
    }
    return out;
}

// gamma'_L = gamma_L(x) elementwise-scaled by the slot mask, each band slot
// driving its 6 entries.
template <typename T>
ad::Tensor<T> apply_mask(const ad::Tensor<T>& encoded, const FrequencyMask& mask) {
    const int bands = int((mask.slots.size() - 3));
    const int64_t dim = 3 + 6 * int64_t(bands);
    if (encoded.rank() != 2 || encoded.shape[1] != dim)
        throw ad::ShapeError("apply_mask: encoding width " + ad::shape_str(encoded.shape) +
                         " does not match " + std::to_string(mask.slots.size()) + " slots");
    ad::Tensor<T> out = encoded;
    for (int64_t r = 0; r < encoded.shape[0]; ++r) {
        T* po = &out.data[size_t(r) * size_t(dim)];
        for (int i = 0; i < 3; ++i) po[i] *= T(mask.slots[size_t(i)]);
        for (int b = 0; b < bands; ++b) {
            const T s = T(mask.slots[size_t(3 + b)]);
            for (int k = 0; k < 6; ++k) po[3 + 6 * b + k] *= s;
        }
    }
    return out;
}

} // namespace svr
