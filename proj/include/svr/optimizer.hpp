// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/tensor.hpp"

#include <cmath>
#include <vector>

namespace svr::ad {

template <typename T>
struct AdamConfig {
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

// First/second moment accumulators, one pair per parameter tensor.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    int64_t step = 0;
    int64_t skipped = 0;

    static AdamState init(const std::vector<Tensor<T>>& params) {
        AdamState s;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const auto& p : params) {
            s.m.emplace_back(p.shape, T(0));
            s.v.emplace_back(p.shape, T(0));
        }
        return s;
    }
};

// One Adam update with bias correction:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// If any gradient entry is non-finite the whole step is skipped (moments and
// step count untouched) and false is returned.
template <typename T>
bool adam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, T lr, const AdamConfig<T>& cfg = {}) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]))
            throw ShapeError("adam_step: grad shape " + shape_str(grads[i].shape) +
                             " vs param " + shape_str(params[i].shape));
        if (!all_finite(grads[i])) {
            ++state.skipped;
            return false;
        }
    }
    ++state.step;
    const T c1 = T(1) - std::pow(cfg.beta1, T(state.step));
    const T c2 = T(1) - std::pow(cfg.beta2, T(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        T* p = params[i].data.data();
        const T* g = grads[i].data.data();
        T* m = state.m[i].data.data();
        T* v = state.v[i].data.data();
        const size_t n = params[i].data.size();
        for (size_t j = 0; j < n; ++j) {
            m[j] = cfg.beta1 * m[j] + (T(1) - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (T(1) - cfg.beta2) * g[j] * g[j];
            const T mhat = m[j] / c1;
            const T vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    return true;
}

// Exponential interpolation from lr0 at step 0 to lr_final at step max_step.
// A non-positive lr0 has no geometric path to lr_final; the schedule stays
// constant at lr0 (a zero rate freezes training rather than producing NaN).
template <typename T>
T lr_exp_decay(T lr0, T lr_final, int64_t step, int64_t max_step) {
    if (max_step <= 0 || !(lr0 > T(0))) return lr0;
    double f = double(step) / double(max_step);
    if (f > 1.0) f = 1.0;
    return T(double(lr0) * std::pow(double(lr_final) / double(lr0), f));
}

} // namespace svr::ad
