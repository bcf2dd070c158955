// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/encoding.hpp"
#include "svr/rng.hpp"
#include "svr/tape.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace svr {

// Architecture of one radiance field: a trunk MLP mapping the encoded point
// to a bottleneck vector, a density head and an optional feature head on the
// bottleneck, and a colour head that additionally sees the encoded view
// direction. Density is structurally independent of direction because the
// direction enters the colour head only.
struct FieldConfig {
    int hidden_width = 64;
    int depth = 4; // trunk layers
    int bottleneck = 64;
    int feature_dim = 12;
    int skip_layer = 2; // trunk layer whose input re-concatenates the encoding
    bool feature_conditioned = false;
    EncodingConfig point_enc{};
    int dir_bands = 4; // view-direction encoding, never masked

    EncodingConfig dir_enc() const {
        EncodingConfig e;
        e.bands = dir_bands;
        e.anneal_steps = 1;
        return e;
    }
    int point_in_dim() const { return point_enc.encoded_dim(); }
    int dir_in_dim() const { return 3 + 6 * dir_bands; }
    int color_hidden() const { return std::max(8, hidden_width / 2); }
};

struct FieldLayer {
    std::string name;
    int64_t in = 0, out = 0;
};

// Canonical layer order; parameters are stored as (weight, bias) pairs in
// this order, which fixes the checkpoint layout.
inline std::vector<FieldLayer> field_layers(const FieldConfig& cfg) {
    if (cfg.depth < 1 || cfg.hidden_width < 1 || cfg.bottleneck < 1)
        throw ad::ShapeError("field: widths and depth must be >= 1");
    if (cfg.skip_layer < 0 || cfg.skip_layer >= cfg.depth)
        throw ad::ShapeError("field: skip layer outside trunk");
    std::vector<FieldLayer> layers;
    int64_t in = cfg.point_in_dim();
    for (int l = 0; l < cfg.depth; ++l) {
        if (l == cfg.skip_layer && l > 0) in += cfg.point_in_dim();
        layers.push_back({"trunk" + std::to_string(l), in, cfg.hidden_width});
        in = cfg.hidden_width;
    }
    layers.push_back({"bottleneck", cfg.hidden_width, cfg.bottleneck});
    layers.push_back({"sigma", cfg.bottleneck, 1});
    if (cfg.feature_conditioned)
        layers.push_back({"feature", cfg.bottleneck, cfg.feature_dim});
    int64_t color_in = cfg.bottleneck + cfg.dir_in_dim();
    if (cfg.feature_conditioned) color_in += cfg.feature_dim;
    layers.push_back({"color_hidden", color_in, cfg.color_hidden()});
    layers.push_back({"color_out", cfg.color_hidden(), 3});
    return layers;
}

inline std::vector<std::string> field_param_names(const FieldConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& l : field_layers(cfg)) {
        names.push_back(l.name + ".weight");
        names.push_back(l.name + ".bias");
    }
    return names;
}

// Glorot-uniform weights, zero biases. The density head therefore starts at
// softplus(0) everywhere.
template <typename T>
std::vector<ad::Tensor<T>> init_field_params(const FieldConfig& cfg, Rng& rng) {
    std::vector<ad::Tensor<T>> params;
    for (const auto& l : field_layers(cfg)) {
        ad::Tensor<T> w({l.in, l.out});
        const double limit = std::sqrt(6.0 / double(l.in + l.out));
        for (auto& v : w.data) v = T(rng.uniform(-limit, limit));
        params.push_back(std::move(w));
        params.push_back(ad::Tensor<T>({l.out}, T(0)));
    }
    return params;
}

template <class V> struct FieldOutput {
    V sigma; // [N,1], nonnegative
    V rgb; // [N,3], in (0,1)
    V bottleneck; // [N,B]
    std::optional<V> feature; // [N,F] when feature_conditioned
};

// One forward pass over a batch of encoded points and directions. `params`
// holds Var<T> during training or Tensor<T> for eager evaluation, in
// field_layers order as (weight, bias) pairs.
template <class V>
FieldOutput<V> field_forward(const FieldConfig& cfg, const std::vector<V>& params,
                             const V& x_enc, const V& d_enc) {
    using ad::value_of;
    const auto layers = field_layers(cfg);
    if (params.size() != layers.size() * 2)
        throw ad::ShapeError("field_forward: expected " + std::to_string(layers.size() * 2) +
                         " parameter tensors, got " + std::to_string(params.size()));
    const int64_t n = value_of(x_enc).shape[0];

    auto linear = [&](const V& h, size_t layer_idx) {
        const V& w = params[layer_idx * 2];
        const V& b = params[layer_idx * 2 + 1];
        return add(matmul(h, w), broadcast_to(b, ad::Shape{n, value_of(b).shape[0]}));
    };

    size_t li = 0;
    V h = x_enc;
    for (int l = 0; l < cfg.depth; ++l, ++li) {
        if (l == cfg.skip_layer && l > 0) h = ad::concat({h, x_enc}, 1);
        h = relu(linear(h, li));
    }
    const V bottleneck = linear(h, li++);
    FieldOutput<V> out;
    out.bottleneck = bottleneck;
    out.sigma = ad::softplus(linear(bottleneck, li));
    ++li;

    V color_in = bottleneck;
    if (cfg.feature_conditioned) {
        out.feature = linear(bottleneck, li);
        ++li;
        color_in = ad::concat({color_in, *out.feature}, 1);
    }
    color_in = ad::concat({color_in, d_enc}, 1);
    const V ch = relu(linear(color_in, li++));
    out.rgb = sigmoid(linear(ch, li++));
    return out;
}

} // namespace svr
