// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/rng.hpp"
#include "svr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace svr {

// L_NeRF: sum over rays of the squared colour error of both render passes.
// `mean_normalized` divides by the ray count for batch-size independence.
template <class V>
V loss_photometric(const V& c_coarse, const V& c_fine,
                   const ad::Tensor<ad::scalar_of_t<V>>& target, bool mean_normalized = false) {
    using T = ad::scalar_of_t<V>;
    if (value_of(c_coarse).shape != target.shape || value_of(c_fine).shape != target.shape)
        throw ad::ShapeError("loss_photometric: ray count mismatch");
    const V tgt = ad::lift(c_coarse, target);
    V total = add(sum(square(sub(c_coarse, tgt))), sum(square(sub(c_fine, tgt))));
    if (mean_normalized) total = scale(total, T(1) / T(target.shape[0]));
    return total;
}

// L_occ: per ray, the mean over all K samples of the densities within the
// first `m` samples (the regularisation range near the camera), averaged
// over the batch. The range mask enters as a matmul so the term stays on
// the tape.
template <class V>
V loss_occlusion(const V& sigma_rk, int m) {
    using T = ad::scalar_of_t<V>;
    const auto& shape = value_of(sigma_rk).shape;
    if (shape.size() != 2) throw ad::ShapeError("loss_occlusion: expected [R,K] densities");
    const int64_t k = shape[1];
    if (m < 0 || int64_t(m) > k) throw ad::ShapeError("loss_occlusion: range outside [0,K]");
    ad::Tensor<T> range({k, 1}, T(0));
    for (int64_t i = 0; i < int64_t(m); ++i) range.data[size_t(i)] = T(1);
    const V per_ray = matmul(sigma_rk, ad::lift(sigma_rk, std::move(range)));
    return mean(scale(per_ray, T(1) / T(k)));
}

// L_TV on a depth patch: squared differences of vertical and horizontal
// neighbours, boundary terms dropped. An optional 0/1 validity patch drops
// any pair with an invalid endpoint.
template <class V>
V loss_depth_tv(const V& depth_hw,
                const std::optional<ad::Tensor<ad::scalar_of_t<V>>>& valid = std::nullopt) {
    using T = ad::scalar_of_t<V>;
    const auto& shape = value_of(depth_hw).shape;
    if (shape.size() != 2) throw ad::ShapeError("loss_depth_tv: expected [H,W] patch");
    const int64_t h = shape[0], w = shape[1];
    if (valid && valid->shape != shape)
        throw ad::ShapeError("loss_depth_tv: validity patch shape mismatch");

    V total = scale(sum(depth_hw), T(0)); // zero with a live graph dependency
    auto pair_mask = [&](int axis) {
        // 1 where both endpoints of the difference are valid
        const int64_t hh = axis == 0 ? h - 1 : h;
        const int64_t ww = axis == 0 ? w : w - 1;
        ad::Tensor<T> m({hh, ww}, T(1));
        if (valid) {
            for (int64_t i = 0; i < hh; ++i)
                for (int64_t j = 0; j < ww; ++j) {
                    const T a = valid->data[size_t(i * w + j)];
                    const T b = axis == 0 ? valid->data[size_t((i + 1) * w + j)]
                                          : valid->data[size_t(i * w + j + 1)];
                    m.data[size_t(i * ww + j)] = a * b;
                }
        }
        return m;
    };
    if (h > 1) {
        const V dv = sub(slice(depth_hw, 0, 1, h - 1), slice(depth_hw, 0, 0, h - 1));
        total = add(total, sum(square(mul(dv, ad::lift(depth_hw, pair_mask(0))))));
    }
    if (w > 1) {
        const V dh = sub(slice(depth_hw, 1, 1, w - 1), slice(depth_hw, 1, 0, w - 1));
        total = add(total, sum(square(mul(dh, ad::lift(depth_hw, pair_mask(1))))));
    }
    return total;
}

// An index pair (first, second) oriented so the prior claims
// depth(first) <= depth(second).
using IndexPair = std::pair<int, int>;

// Gather d[i] for the first and second elements of each pair via 0/1
// selection matrices, keeping the gather inside the primitive set.
template <class V>
std::pair<V, V> gather_pairs(const V& values, const std::vector<IndexPair>& pairs) {
    using T = ad::scalar_of_t<V>;
    const int64_t n = value_of(values).shape[0];
    const int64_t p = int64_t(pairs.size());
    ad::Tensor<T> sel_a({n, p}, T(0));
    ad::Tensor<T> sel_b({n, p}, T(0));
    for (int64_t c = 0; c < p; ++c) {
        sel_a.data[size_t(int64_t(pairs[size_t(c)].first) * p + c)] = T(1);
        sel_b.data[size_t(int64_t(pairs[size_t(c)].second) * p + c)] = T(1);
    }
    const V row = reshape(values, ad::Shape{1, n});
    return {matmul(row, ad::lift(values, std::move(sel_a))),
            matmul(row, ad::lift(values, std::move(sel_b)))};
}

// R_rank: hinge on pairs whose rendered depths contradict the prior
// ordering, sum of max(d_first - d_second + margin, 0) over the sampled
// pairs. `rendered` is a flat [P] depth vector; pairs index into it.
template <class V>
V loss_depth_rank(const V& rendered, const std::vector<IndexPair>& pairs, double margin) {
    using T = ad::scalar_of_t<V>;
    if (value_of(rendered).shape.size() != 1)
        throw ad::ShapeError("loss_depth_rank: expected flat depth vector");
    if (pairs.empty()) return scale(sum(rendered), T(0));
    auto [da, db] = gather_pairs(rendered, pairs);
    return sum(relu(offset(sub(da, db), T(margin))));
}

// R_cont: for each directed neighbour pair, hinge on the rendered depth
// difference exceeding the threshold.
template <class V>
V loss_depth_continuity(const V& rendered, const std::vector<IndexPair>& pairs,
                        double threshold) {
    using T = ad::scalar_of_t<V>;
    if (value_of(rendered).shape.size() != 1)
        throw ad::ShapeError("loss_depth_continuity: expected flat depth vector");
    if (pairs.empty()) return scale(sum(rendered), T(0));
    auto [da, db] = gather_pairs(rendered, pairs);
    return sum(relu(offset(abs(sub(da, db)), T(-threshold))));
}

// L_f: mean over rays of the L2 norm of the feature error. The tiny floor
// inside the square root keeps the gradient finite at zero error; it
// perturbs the value by less than 1e-12.
template <class V>
V loss_feature(const V& feat, const ad::Tensor<ad::scalar_of_t<V>>& feat_gt) {
    using T = ad::scalar_of_t<V>;
    if (value_of(feat).shape != feat_gt.shape)
        throw ad::ShapeError("loss_feature: feature dimensions differ");
    const V diff = sub(feat, ad::lift(feat, feat_gt));
    const V norms = sqrt(offset(sum(square(diff), 1), T(1e-24)));
    return mean(norms);
}

// Pair sampling for R_rank: `count` random pairs among the valid pixels of
// a patch, each oriented by the prior depth.
inline std::vector<IndexPair> sample_rank_pairs(const std::vector<double>& prior,
                                                const std::vector<uint8_t>& valid, int count,
                                                Rng& rng) {
    std::vector<int> idx;
    for (size_t i = 0; i < prior.size(); ++i)
        if (valid.empty() || valid[i]) idx.push_back(int(i));
    std::vector<IndexPair> pairs;
    if (idx.size() < 2) return pairs;
    pairs.reserve(size_t(count));
    for (int c = 0; c < count; ++c) {
        const int a = idx[size_t(rng.uniform_int(uint64_t(idx.size())))];
        int b = idx[size_t(rng.uniform_int(uint64_t(idx.size())))];
        if (a == b) continue;
        if (prior[size_t(a)] <= prior[size_t(b)])
            pairs.emplace_back(a, b);
        else
            pairs.emplace_back(b, a);
    }
    return pairs;
}

// Neighbour pairs for R_cont: for each valid pixel, the K prior-depth
// nearest valid pixels within a centered spatial window, as directed pairs.
inline std::vector<IndexPair> knn_depth_pairs(const std::vector<double>& prior, int height,
                                              int width, const std::vector<uint8_t>& valid,
                                              int k_nn, int window) {
    if (int(prior.size()) != height * width)
        throw ad::ShapeError("knn_depth_pairs: prior size mismatch");
    std::vector<IndexPair> pairs;
    const int half = window / 2;
    std::vector<std::pair<double, int>> candidates;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const int i = r * width + c;
            if (!valid.empty() && !valid[size_t(i)]) continue;
            candidates.clear();
            for (int nr = std::max(0, r - half); nr < std::min(height, r - half + window); ++nr)
                for (int nc = std::max(0, c - half); nc < std::min(width, c - half + window);
                     ++nc) {
                    const int j = nr * width + nc;
                    if (j == i) continue;
                    if (!valid.empty() && !valid[size_t(j)]) continue;
                    candidates.emplace_back(std::abs(prior[size_t(i)] - prior[size_t(j)]), j);
                }
            const size_t take = std::min(size_t(k_nn), candidates.size());
            std::partial_sort(candidates.begin(), candidates.begin() + std::ptrdiff_t(take),
                              candidates.end());
            for (size_t t = 0; t < take; ++t) pairs.emplace_back(i, candidates[t].second);
        }
    }
    return pairs;
}

// Weight schedule and bookkeeping for the combined objectives.
struct LossWeights {
    double occlusion = 0.1;
    double tv_max = 1.0; // linear anneal from 0, reaching tv_max at max_step
    double rank = 0.2;
    double continuity = 0.2;
    double feature = 0.1; // lambda of the feature-supervision variant
};

inline double tv_weight_at(int64_t step, int64_t max_step, double tv_max) {
    if (max_step <= 0) return tv_max;
    const double f = std::min(1.0, double(step) / double(max_step));
    return tv_max * f;
}

struct LossReport {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> weights;
    double total = 0;

    void add(const std::string& name, double value, double weight) {
        names.push_back(name);
        values.push_back(value);
        weights.push_back(weight);
        total += weight * value;
    }
};

} // namespace svr
