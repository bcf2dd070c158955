// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/camera.hpp"
#include "svr/field.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

namespace svr {

struct SamplingConfig {
    int n_coarse = 32;
    int n_fine = 32;
    bool jitter = true;
};

// One stratified draw along [t0, t1]: one sample per stratum, ascending.
// Jitter off places each sample at its stratum midpoint.
inline std::vector<double> sample_stratified(double t0, double t1, int n, bool jitter, Rng& rng) {
    if (!(t0 < t1)) throw CameraError("sample_stratified: require t_near < t_far");
    if (n < 1) throw CameraError("sample_stratified: need at least one sample");
    const double h = (t1 - t0) / double(n);
    std::vector<double> ts(size_t(n), 0.0);
    for (int k = 0; k < n; ++k) {
        const double u = jitter ? rng.uniform() : 0.5;
        ts[size_t(k)] = t0 + (double(k) + u) * h;
    }
    return ts;
}

// Inverse-CDF draw of `n_fine` positions from the piecewise-constant
// histogram that puts mass `weights[k]` on the k-th uniform stratum of
// [t0, t1]. With jitter off the CDF is probed at stratified midpoints, so
// rays with equal histograms get identical samples. An all-zero histogram
// carries no information, so it falls back to plain uniform placement; a
// tiny floor on each bin keeps the CDF invertible when only some bins are
// empty.
inline std::vector<double> sample_importance(double t0, double t1,
                                             const std::vector<double>& weights, int n_fine,
                                             bool jitter, Rng& rng) {
    if (weights.empty()) throw CameraError("sample_importance: no histogram bins");
    auto unit_draw = [&](int s) {
        return jitter ? rng.uniform() : (double(s) + 0.5) / double(n_fine);
    };
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w <= 0.0; })) {
        std::vector<double> out(size_t(n_fine), 0.0);
        for (int s = 0; s < n_fine; ++s) out[size_t(s)] = t0 + unit_draw(s) * (t1 - t0);
        return out;
    }
    const int k = int(weights.size());
    std::vector<double> cdf(size_t(k) + 1, 0.0);
    for (int i = 0; i < k; ++i) {
        const double w = std::max(0.0, weights[size_t(i)]) + 1e-5;
        cdf[size_t(i) + 1] = cdf[size_t(i)] + w;
    }
    const double total = cdf.back();
    const double h = (t1 - t0) / double(k);
    std::vector<double> out(size_t(n_fine), 0.0);
    for (int s = 0; s < n_fine; ++s) {
        const double u = unit_draw(s) * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const int bin = std::clamp(int(it - cdf.begin()) - 1, 0, k - 1);
        const double frac = (u - cdf[size_t(bin)]) / (cdf[size_t(bin) + 1] - cdf[size_t(bin)]);
        out[size_t(s)] = t0 + (double(bin) + frac) * h;
    }
    return out;
}

// Fine positions merged and sorted with the coarse ones, as consumed by the
// second render pass.
inline std::vector<double> sample_hierarchical(double t0, double t1,
                                               const std::vector<double>& coarse_ts,
                                               const std::vector<double>& coarse_weights,
                                               int n_fine, bool jitter, Rng& rng) {
    std::vector<double> merged = coarse_ts;
    const auto fine = sample_importance(t0, t1, coarse_weights, n_fine, jitter, rng);
    merged.insert(merged.end(), fine.begin(), fine.end());
    std::sort(merged.begin(), merged.end());
    return merged;
}

// Everything the quadrature produces for a batch of rays with K samples
// each. `V` is Var<T> while training and Tensor<T> for eager evaluation.
template <class V> struct RayBatchRender {
    V rgb; // [R,3]
    V depth; // [R], expected depth sum(w_k t_k), zero on empty rays
    V sigma; // [R,K], raw densities before quadrature (occlusion penalties)
    V weights; // [R,K]
    V trans; // [R,K], transmittance in front of each sample
    V trans_final; // [R], transmittance behind the last sample
    V opacity; // [R], sum of weights
    std::optional<V> feature; // [R,F] for feature-conditioned fields
    ad::Tensor<ad::scalar_of_t<V>> ts; // [R,K] sample positions used
};

// Volume rendering quadrature over sorted per-ray samples:
//   a_k = sigma_k * delta_k,  delta_k = t_{k+1} - t_k (last: t_far - t_K)
//   T_k = exp(-sum_{j<k} a_j),  w_k = T_k (1 - exp(-a_k))
//   C = sum_k w_k c_k + (1 - sum_k w_k) * background
// The exclusive prefix sum is a matmul with a strictly upper triangular
// ones matrix, which keeps the whole computation inside the recorded
// primitive set.
template <class V>
RayBatchRender<V> composite(const V& sigma_rk, const V& rgb_rk3, const std::optional<V>& feat_rkf,
                            const ad::Tensor<ad::scalar_of_t<V>>& ts,
                            const std::vector<double>& t_far,
                            const std::optional<std::array<double, 3>>& background) {
    using T = ad::scalar_of_t<V>;
    using ad::Shape;
    using ad::Tensor;
    if (ts.rank() != 2) throw ad::ShapeError("composite: sample grid must be [R,K]");
    const int64_t r = ts.shape[0], k = ts.shape[1];
    if (value_of(sigma_rk).shape != Shape{r, k})
        throw ad::ShapeError("composite: sigma shape mismatch");
    if (value_of(rgb_rk3).shape != Shape{r, k, 3})
        throw ad::ShapeError("composite: rgb shape mismatch");
    if (int64_t(t_far.size()) != r) throw ad::ShapeError("composite: t_far length mismatch");

    Tensor<T> deltas({r, k});
    for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < k; ++j) {
            const double t_here = double(ts.data[size_t(i * k + j)]);
            const double t_next =
                j + 1 < k ? double(ts.data[size_t(i * k + j + 1)]) : t_far[size_t(i)];
            if (t_next < t_here) throw ad::ShapeError("composite: samples not sorted");
            deltas.data[size_t(i * k + j)] = T(t_next - t_here);
        }
    }

    Tensor<T> upper({k, k}, T(0));
    for (int64_t a = 0; a < k; ++a)
        for (int64_t b = a + 1; b < k; ++b) upper.data[size_t(a * k + b)] = T(1);

    const V a = mul(sigma_rk, ad::lift(sigma_rk, std::move(deltas)));
    const V cum = matmul(a, ad::lift(sigma_rk, std::move(upper)));
    const V trans = exp(neg(cum));
    const V alpha = offset(neg(exp(neg(a))), T(1));
    const V w = mul(trans, alpha);

    RayBatchRender<V> out;
    out.ts = ts;
    out.sigma = sigma_rk;
    out.weights = w;
    out.trans = trans;
    out.trans_final = exp(neg(sum(a, 1)));
    out.opacity = sum(w, 1);

    const V w3 = broadcast_to(reshape(w, Shape{r, k, 1}), Shape{r, k, 3});
    V color = sum(mul(w3, rgb_rk3), 1);
    if (background) {
        Tensor<T> bg({3});
        for (int c = 0; c < 3; ++c) bg.data[size_t(c)] = T((*background)[size_t(c)]);
        const V bg_rows = broadcast_to(ad::lift(sigma_rk, std::move(bg)), Shape{r, 3});
        const V miss = broadcast_to(reshape(offset(neg(out.opacity), T(1)), Shape{r, 1}),
                                    Shape{r, 3});
        color = add(color, mul(miss, bg_rows));
    }
    out.rgb = color;
    out.depth = sum(mul(w, ad::lift(sigma_rk, ts)), 1);

    if (feat_rkf) {
        const int64_t f = value_of(*feat_rkf).shape[2];
        const V wf = broadcast_to(reshape(w, Shape{r, k, 1}), Shape{r, k, f});
        out.feature = sum(mul(wf, *feat_rkf), 1);
    }
    return out;
}

template <class V> struct RenderResult {
    RayBatchRender<V> coarse;
    RayBatchRender<V> fine;
};

// Per-ray sampling seed: independent of batch composition so that chunked
// and whole-image renders agree bit for bit.
inline Rng ray_sampling_rng(uint64_t seed, const Ray& ray, uint64_t salt, uint64_t pass) {
    return Rng(seed, {uint64_t(ray.view), uint64_t(ray.row), uint64_t(ray.col), salt, pass});
}

namespace detail {

template <class V>
RayBatchRender<V> render_pass(const FieldConfig& cfg, const std::vector<V>& params,
                              const std::vector<Ray>& rays,
                              const std::vector<std::vector<double>>& ts_per_ray,
                              const FrequencyMask& mask,
                              const std::optional<std::array<double, 3>>& background) {
    using T = ad::scalar_of_t<V>;
    using ad::Shape;
    using ad::Tensor;
    const int64_t r = int64_t(rays.size());
    const int64_t k = int64_t(ts_per_ray[0].size());

    Tensor<double> points({r * k, 3});
    Tensor<double> dirs({r * k, 3});
    Tensor<T> ts({r, k});
    std::vector<double> t_far(size_t(r), 0.0);
    for (int64_t i = 0; i < r; ++i) {
        const Ray& ray = rays[size_t(i)];
        t_far[size_t(i)] = ray.t_far;
        for (int64_t j = 0; j < k; ++j) {
            const double t = ts_per_ray[size_t(i)][size_t(j)];
            ts.data[size_t(i * k + j)] = T(t);
            const Vec3 p = ray.origin + t * ray.direction;
            for (int a = 0; a < 3; ++a) {
                points.data[size_t((i * k + j) * 3 + a)] = p[a];
                dirs.data[size_t((i * k + j) * 3 + a)] = ray.direction[a];
            }
        }
    }

    const auto x_enc_d = apply_mask(encode_points(points, cfg.point_enc), mask);
    const auto d_enc_d = encode_points(dirs, cfg.dir_enc());
    const V x_enc = ad::lift(params[0], ad::cast_tensor<T>(x_enc_d));
    const V d_enc = ad::lift(params[0], ad::cast_tensor<T>(d_enc_d));

    const FieldOutput<V> f = field_forward(cfg, params, x_enc, d_enc);
    const V sigma_rk = reshape(f.sigma, Shape{r, k});
    const V rgb_rk3 = reshape(f.rgb, Shape{r, k, 3});
    std::optional<V> feat_rkf;
    if (f.feature)
        feat_rkf = reshape(*f.feature, Shape{r, k, int64_t(cfg.feature_dim)});
    return composite(sigma_rk, rgb_rk3, feat_rkf, ts, t_far, background);
}

} // namespace detail

// Coarse and fine render of a ray batch at training step `step` (which sets
// the frequency mask). `sample_salt` decorrelates jitter across training
// iterations; renders with jitter off ignore it.
template <class V>
RenderResult<V> render_rays(const FieldConfig& cfg, const std::vector<V>& coarse_params,
                            const std::vector<V>& fine_params, const std::vector<Ray>& rays,
                            const SamplingConfig& sampling, int64_t step, uint64_t seed,
                            uint64_t sample_salt,
                            const std::optional<std::array<double, 3>>& background) {
    if (rays.empty()) throw CameraError("render_rays: empty ray batch");
    const FrequencyMask mask = mask_at(step, cfg.point_enc);

    std::vector<std::vector<double>> ts_coarse(rays.size());
    for (size_t i = 0; i < rays.size(); ++i) {
        Rng rng = ray_sampling_rng(seed, rays[i], sample_salt, 0);
        ts_coarse[i] = sample_stratified(rays[i].t_near, rays[i].t_far, sampling.n_coarse,
                                         sampling.jitter, rng);
    }
    RenderResult<V> out;
    out.coarse = detail::render_pass(cfg, coarse_params, rays, ts_coarse, mask, background);

    const auto& w = value_of(out.coarse.weights);
    std::vector<std::vector<double>> ts_fine(rays.size());
    for (size_t i = 0; i < rays.size(); ++i) {
        std::vector<double> wi(size_t(sampling.n_coarse), 0.0);
        for (int j = 0; j < sampling.n_coarse; ++j)
            wi[size_t(j)] = double(w.data[i * size_t(sampling.n_coarse) + size_t(j)]);
        Rng rng = ray_sampling_rng(seed, rays[i], sample_salt, 1);
        ts_fine[i] = sample_hierarchical(rays[i].t_near, rays[i].t_far, ts_coarse[i], wi,
                                         sampling.n_fine, sampling.jitter, rng);
    }
    out.fine = detail::render_pass(cfg, fine_params, rays, ts_fine, mask, background);
    return out;
}

} // namespace svr
