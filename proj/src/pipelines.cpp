// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/pipelines.hpp"

#include "svr/checkpoint.hpp"
#include "svr/metrics.hpp"
#include "svr/optimizer.hpp"
#include "svr/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace svr {

namespace fs = std::filesystem;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string to_string(Method m) {
    switch (m) {
    case Method::Baseline: return "baseline";
    case Method::FreqOcc: return "freq_occ";
    case Method::Esnerf: return "esnerf";
    case Method::FeatureCond: return "feature_cond";
    }
    throw PipelineError("to_string: bad method value");
}

Method method_from_string(const std::string& s) {
    if (s == "baseline") return Method::Baseline;
    if (s == "freq_occ") return Method::FreqOcc;
    if (s == "esnerf") return Method::Esnerf;
    if (s == "feature_cond") return Method::FeatureCond;
    throw PipelineError("unknown method '" + s + "'");
}

std::string to_string(FusionMode m) {
    switch (m) {
    case FusionMode::PixelWeighted: return "pixel_weighted";
    case FusionMode::MetricSelect: return "metric_select";
    }
    throw PipelineError("to_string: bad fusion mode value");
}

FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "pixel_weighted") return FusionMode::PixelWeighted;
    if (s == "metric_select") return FusionMode::MetricSelect;
    throw PipelineError("unknown fusion mode '" + s + "'");
}

std::optional<std::array<double, 3>> background_term(Background b) {
    switch (b) {
    case Background::White: return std::array<double, 3>{1.0, 1.0, 1.0};
    case Background::Black: return std::array<double, 3>{0.0, 0.0, 0.0};
    case Background::None: return std::nullopt;
    }
    throw PipelineError("background_term: bad background value");
}

Camera scale_camera(const Camera& cam, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) throw PipelineError("scale_camera: size must be positive");
    const double rx = double(new_w) / double(cam.width);
    const double ry = double(new_h) / double(cam.height);
    Camera out = cam;
    out.fx *= rx;
    out.cx *= rx;
    out.fy *= ry;
    out.cy *= ry;
    out.width = new_w;
    out.height = new_h;
    return out;
}

namespace {

DepthMap resize_depth_nearest(const DepthMap& d, int new_w, int new_h) {
    DepthMap out;
    out.width = new_w;
    out.height = new_h;
    out.scale = d.scale;
    out.values.resize(size_t(new_w) * size_t(new_h));
    for (int r = 0; r < new_h; ++r) {
        const int sr = std::min(d.height - 1, int(double(r + 0.5) * d.height / new_h));
        for (int c = 0; c < new_w; ++c) {
            const int sc = std::min(d.width - 1, int(double(c + 0.5) * d.width / new_w));
            out.values[size_t(r) * size_t(new_w) + size_t(c)] =
                d.values[size_t(sr) * size_t(d.width) + size_t(sc)];
        }
    }
    return out;
}

std::pair<int, int> scaled_size(const Camera& cam, double scale) {
    const int nw = std::max(1, int(std::lround(cam.width * scale)));
    const int nh = std::max(1, int(std::lround(cam.height * scale)));
    return {nw, nh};
}

} // namespace

Scene scale_scene(const Scene& scene, double scale) {
    if (!(scale > 0.0)) throw PipelineError("scale_scene: scale must be positive");
    if (scale == 1.0) return scene;
    Scene out = scene;
    for (auto& v : out.input_views) {
        const auto [nw, nh] = scaled_size(v.camera, scale);
        v.image = resize_area(v.image, nw, nh);
        if (v.mask) v.mask = resize_nearest(*v.mask, nw, nh);
        if (v.depth) v.depth = resize_depth_nearest(*v.depth, nw, nh);
        v.camera = scale_camera(v.camera, nw, nh);
    }
    for (auto& t : out.target_views) {
        const auto [nw, nh] = scaled_size(t.camera, scale);
        if (t.image) t.image = resize_area(*t.image, nw, nh);
        if (t.mask) t.mask = resize_nearest(*t.mask, nw, nh);
        t.camera = scale_camera(t.camera, nw, nh);
    }
    return out;
}

Vec3 estimate_look_target(const std::vector<Camera>& cameras) {
    if (cameras.empty()) throw PipelineError("estimate_look_target: no cameras");
    Mat3 a = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    for (const auto& c : cameras) {
        const Vec3 d = c.forward().normalized();
        const Mat3 p = Mat3::Identity() - d * d.transpose();
        a += p;
        b += p * c.position();
    }
    // Near-parallel axes leave the normal matrix singular; fall back to the
    // average mid-range point along each axis.
    if (cameras.size() < 2 || a.determinant() < 1e-9) {
        Vec3 mean = Vec3::Zero();
        for (const auto& c : cameras)
            mean += c.position() + c.forward().normalized() * (0.5 * (c.near + c.far));
        return mean / double(cameras.size());
    }
    return a.ldlt().solve(b);
}

std::vector<Camera> pseudo_ring_cameras(const std::vector<Camera>& inputs, int count) {
    if (inputs.empty()) throw PipelineError("pseudo_ring_cameras: no input cameras");
    if (count < 1) throw PipelineError("pseudo_ring_cameras: count must be >= 1");
    for (const auto& c : inputs)
        if (c.width != inputs[0].width || c.height != inputs[0].height)
            throw PipelineError("pseudo_ring_cameras: input view sizes differ");

    const Vec3 center = estimate_look_target(inputs);
    double radius = 0, elevation = 0, fx = 0, fy = 0, cx = 0, cy = 0, near = 0, far = 0;
    for (const auto& c : inputs) {
        const Vec3 rel = c.position() - center;
        const double r = rel.norm();
        if (!(r > 1e-9)) throw PipelineError("pseudo_ring_cameras: camera sits on the target");
        radius += r;
        elevation += std::asin(std::clamp(rel.z() / r, -1.0, 1.0));
        fx += c.fx;
        fy += c.fy;
        cx += c.cx;
        cy += c.cy;
        near += c.near;
        far += c.far;
    }
    const double n = double(inputs.size());
    radius /= n;
    elevation /= n;

    std::vector<Camera> ring;
    ring.reserve(size_t(count));
    for (int j = 0; j < count; ++j) {
        const double phi = 2.0 * kPi * double(j) / double(count);
        const Vec3 pos = center + radius * Vec3(std::cos(phi) * std::cos(elevation),
                                                std::sin(phi) * std::cos(elevation),
                                                std::sin(elevation));
        Camera c;
        c.fx = fx / n;
        c.fy = fy / n;
        c.cx = cx / n;
        c.cy = cy / n;
        c.width = inputs[0].width;
        c.height = inputs[0].height;
        c.near = near / n;
        c.far = far / n;
        c.world_from_camera = look_at(pos, center);
        ring.push_back(c);
    }
    return ring;
}

// ---------------------------------------------------------------------------
// Training

namespace {

constexpr uint64_t kInitStream = 0xf1e1dULL;      // parameter initialization
constexpr uint64_t kEpochStream = 0xe70c8ULL;     // per-epoch pixel permutation
constexpr uint64_t kPatchStream = 0x9a7c8ULL;     // per-step patch placement
constexpr uint64_t kPairStream = 0xaa17ULL;       // per-step ordinal pair draws
constexpr uint64_t kPriorNoiseStream = 0x9d0eULL; // synthetic depth prior noise
constexpr uint64_t kSampleSalt = 0x5a17ULL;       // train-time jitter salt
constexpr uint64_t kRenderSalt = 0x2e4dULL;       // render-time jitter salt

struct PixelRef {
    int view = 0;
    int row = 0;
    int col = 0;
};

struct ViewData {
    const Camera* cam = nullptr;
    Imagef linear; // decoded training targets
    DepthMap prior;
    FeatureMap feat;
};

double mean_depth_range(const Scene& s) {
    double acc = 0;
    for (const auto& v : s.input_views) acc += v.camera.far - v.camera.near;
    return acc / double(s.input_views.size());
}

void validate_train_config(const Scene& s, const TrainConfig& cfg) {
    if (s.input_views.empty()) throw PipelineError("train: scene has no input views");
    if (cfg.iterations < 0) throw PipelineError("train: iterations must be >= 0");
    if (cfg.batch_rays < 1) throw PipelineError("train: batch_rays must be >= 1");
    if (!(cfg.resolution_scale > 0.0))
        throw PipelineError("train: resolution_scale must be positive");
    if (cfg.log_every < 1) throw PipelineError("train: log_every must be >= 1");
    if (!(cfg.occ_fraction >= 0.0 && cfg.occ_fraction <= 1.0))
        throw PipelineError("train: occ_fraction must lie in [0,1]");
    if (cfg.method == Method::Esnerf && cfg.patch_size < 2)
        throw PipelineError("train: esnerf needs patch_size >= 2");
    if (cfg.method == Method::FeatureCond && !cfg.field.feature_conditioned)
        throw PipelineError("train: feature_cond needs a feature-conditioned field");
}

} // namespace

TrainResult train(const Scene& scene, const TrainConfig& cfg,
                  const std::vector<ad::Tensor<float>>* initial_params) {
    using ad::Shape;
    using ad::Tensor;
    using ad::Var;

    validate_train_config(scene, cfg);

    Scene scaled;
    const Scene* sp = &scene;
    if (cfg.resolution_scale != 1.0) {
        scaled = scale_scene(scene, cfg.resolution_scale);
        sp = &scaled;
    }
    const Scene& s = *sp;
    const auto bg = background_term(s.background);

    // Per-view working data: linear targets plus whatever priors the method
    // consumes. The synthetic depth prior draws its noise from a stream
    // derived from cfg.seed so distinct training seeds see distinct noise.
    DepthPriorConfig dp = cfg.depth_prior;
    if (cfg.method == Method::Esnerf) {
        if (dp.noise_sigma < 0) dp.noise_sigma = 0.02 * mean_depth_range(s);
        if (dp.kind == DepthPriorKind::SyntheticGtPlusNoise)
            dp.seed = Rng::derive(cfg.seed, {kPriorNoiseStream});
    }
    std::vector<ViewData> views(s.input_views.size());
    for (size_t i = 0; i < s.input_views.size(); ++i) {
        const InputView& v = s.input_views[i];
        if (v.image.channels != 3)
            throw PipelineError("train: view '" + v.name + "' is not a 3-channel image");
        views[i].cam = &v.camera;
        views[i].linear = decode_srgb(v.image);
        if (cfg.method == Method::Esnerf) views[i].prior = depth_prior_for_view(dp, v);
        if (cfg.method == Method::FeatureCond) {
            views[i].feat = feature_prior_for_view(cfg.feature_prior, v);
            if (views[i].feat.channels != cfg.field.feature_dim)
                throw PipelineError("train: feature prior for '" + v.name + "' has " +
                                    std::to_string(views[i].feat.channels) +
                                    " channels, field expects " +
                                    std::to_string(cfg.field.feature_dim));
        }
    }
    if (cfg.method == Method::Esnerf) {
        const int p = cfg.patch_size;
        for (const auto& v : views)
            if (v.cam->width < p || v.cam->height < p)
                throw PipelineError("train: patch_size exceeds an input view");
    }

    // Parameters, optimizer state.
    std::vector<Tensor<float>> params;
    if (initial_params) {
        const auto layers = field_layers(cfg.field);
        if (initial_params->size() != layers.size() * 2)
            throw PipelineError("train: initial parameter count does not match the field");
        params = *initial_params;
    } else {
        Rng init_rng(cfg.seed, {kInitStream});
        params = init_field_params<float>(cfg.field, init_rng);
    }
    auto state = ad::AdamState<float>::init(params);

    // Without-replacement pixel pool for ray batches. A fresh permutation is
    // drawn per epoch; batches may straddle an epoch boundary.
    const bool patch_based = cfg.method == Method::Esnerf;
    std::vector<PixelRef> pool;
    std::vector<size_t> order;
    size_t cursor = 0;
    int64_t epoch = -1;
    if (!patch_based) {
        for (size_t v = 0; v < views.size(); ++v)
            for (int r = 0; r < views[v].cam->height; ++r)
                for (int c = 0; c < views[v].cam->width; ++c)
                    pool.push_back({int(v), r, c});
        order.resize(pool.size());
        cursor = order.size(); // forces the first shuffle
    }
    auto next_pool_batch = [&]() {
        std::vector<PixelRef> batch;
        batch.reserve(size_t(cfg.batch_rays));
        while (int(batch.size()) < cfg.batch_rays) {
            if (cursor >= order.size()) {
                ++epoch;
                Rng perm_rng(cfg.seed, {kEpochStream, uint64_t(epoch)});
                std::iota(order.begin(), order.end(), size_t(0));
                for (size_t i = order.size() - 1; i > 0; --i) {
                    const size_t j = size_t(perm_rng.uniform_int(uint64_t(i) + 1));
                    std::swap(order[i], order[j]);
                }
                cursor = 0;
            }
            batch.push_back(pool[order[cursor++]]);
        }
        return batch;
    };
    auto next_patch_batch = [&](int64_t it) {
        Rng patch_rng(cfg.seed, {kPatchStream, uint64_t(it)});
        const int p = cfg.patch_size;
        const int v = int(patch_rng.uniform_int(uint64_t(views.size())));
        const int r0 = int(patch_rng.uniform_int(uint64_t(views[size_t(v)].cam->height - p + 1)));
        const int c0 = int(patch_rng.uniform_int(uint64_t(views[size_t(v)].cam->width - p + 1)));
        std::vector<PixelRef> batch;
        batch.reserve(size_t(p) * size_t(p));
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c) batch.push_back({v, r0 + r, c0 + c});
        return batch;
    };

    TrainResult res;
    int consecutive_bad = 0;
    for (int64_t it = 0; it < cfg.iterations; ++it) {
        const auto batch = patch_based ? next_patch_batch(it) : next_pool_batch();
        const int64_t n = int64_t(batch.size());

        std::vector<Ray> rays;
        rays.reserve(batch.size());
        Tensor<float> target({n, 3});
        for (int64_t i = 0; i < n; ++i) {
            const PixelRef& px = batch[size_t(i)];
            rays.push_back(make_ray(*views[size_t(px.view)].cam, px.row, px.col, px.view));
            for (int ch = 0; ch < 3; ++ch)
                target.data[size_t(i) * 3 + size_t(ch)] =
                    views[size_t(px.view)].linear.at(px.row, px.col, ch);
        }

        LossReport report;
        bool finite = true;
        try {
            ad::Tape<float> tape;
            std::vector<Var<float>> leaves;
            leaves.reserve(params.size());
            for (const auto& p : params) leaves.push_back(tape.leaf(p));

            // The baseline trains with the frequency mask fully open; the
            // other methods anneal it with the step count.
            const int64_t mask_step =
                cfg.method == Method::Baseline ? cfg.field.point_enc.anneal_steps : it;
            auto rr = render_rays(cfg.field, leaves, leaves, rays, cfg.sampling, mask_step,
                                  cfg.seed, kSampleSalt, bg);

            auto photo = loss_photometric(rr.coarse.rgb, rr.fine.rgb, target, true);
            Var<float> total = photo;
            report.add("photometric", double(value_of(photo).item()), 1.0);

            if (cfg.method != Method::Baseline) {
                const int m = int(std::lround(cfg.occ_fraction * cfg.sampling.n_coarse));
                auto occ = loss_occlusion(rr.coarse.sigma, m);
                total = ad::add(total, scale(occ, float(cfg.weights.occlusion)));
                report.add("occlusion", double(value_of(occ).item()), cfg.weights.occlusion);
            }

            if (cfg.method == Method::Esnerf) {
                const int p = cfg.patch_size;
                const ViewData& vd = views[size_t(batch[0].view)];
                // Opacity-renormalized depth so half-transparent pixels still
                // carry a usable depth estimate.
                auto renorm = div(rr.fine.depth, offset(rr.fine.opacity, 1e-6f));
                const Tensor<float>& opacity = value_of(rr.fine.opacity);

                // Smoothness over the rendered patch where the render is
                // solid, normalized by the patch's neighbour-pair capacity.
                Tensor<float> solid({int64_t(p), int64_t(p)});
                for (int64_t i = 0; i < n; ++i)
                    solid.data[size_t(i)] = opacity.data[size_t(i)] > 0.5f ? 1.f : 0.f;
                auto tv = scale(loss_depth_tv(reshape(renorm, Shape{p, p}), solid),
                                1.f / float(2 * p * (p - 1)));
                const double tv_w = tv_weight_at(it, cfg.iterations, cfg.weights.tv_max);
                total = ad::add(total, scale(tv, float(tv_w)));
                report.add("depth_tv", double(value_of(tv).item()), tv_w);

                // Prior-guided terms run on pixels where the prior has depth
                // and the render is solid enough to compare against it.
                std::vector<double> prior(size_t(n), 0.0);
                std::vector<uint8_t> usable(size_t(n), 0);
                for (int64_t i = 0; i < n; ++i) {
                    const PixelRef& px = batch[size_t(i)];
                    prior[size_t(i)] = double(vd.prior.metric_at(px.row, px.col));
                    usable[size_t(i)] =
                        prior[size_t(i)] > 0.0 && opacity.data[size_t(i)] > 0.5f;
                }
                Rng pair_rng(cfg.seed, {kPairStream, uint64_t(it)});
                const auto rpairs = sample_rank_pairs(prior, usable, cfg.rank_pairs, pair_rng);
                if (!rpairs.empty()) {
                    auto rank = scale(loss_depth_rank(renorm, rpairs, cfg.rank_margin),
                                      1.f / float(rpairs.size()));
                    total = ad::add(total, scale(rank, float(cfg.weights.rank)));
                    report.add("depth_rank", double(value_of(rank).item()), cfg.weights.rank);
                }
                const auto kpairs =
                    knn_depth_pairs(prior, p, p, usable, cfg.knn_k, cfg.knn_window);
                if (!kpairs.empty()) {
                    auto cont = scale(loss_depth_continuity(renorm, kpairs, cfg.cont_threshold),
                                      1.f / float(kpairs.size()));
                    total = ad::add(total, scale(cont, float(cfg.weights.continuity)));
                    report.add("depth_continuity", double(value_of(cont).item()),
                               cfg.weights.continuity);
                }
            }

            if (cfg.method == Method::FeatureCond) {
                const int f = cfg.field.feature_dim;
                Tensor<float> feat_gt({n, int64_t(f)});
                for (int64_t i = 0; i < n; ++i) {
                    const PixelRef& px = batch[size_t(i)];
                    for (int ch = 0; ch < f; ++ch)
                        feat_gt.data[size_t(i) * size_t(f) + size_t(ch)] =
                            views[size_t(px.view)].feat.at(px.row, px.col, ch);
                }
                auto lf = loss_feature(*rr.fine.feature, feat_gt);
                total = ad::add(total, scale(lf, float(cfg.weights.feature)));
                report.add("feature", double(value_of(lf).item()), cfg.weights.feature);
            }

            tape.backward(total);
            std::vector<Tensor<float>> grads;
            grads.reserve(leaves.size());
            for (const auto& l : leaves) grads.push_back(l.grad());
            const double lr =
                ad::lr_exp_decay(cfg.lr_start, cfg.lr_end, it, cfg.iterations - 1);
            adam_step(params, grads, state, float(lr));
        } catch (const ad::NonFiniteError&) {
            // Skip the update; params stay at the last finite state.
            finite = false;
            report = LossReport{};
            report.add("non_finite", 1.0, 0.0);
            report.total = std::numeric_limits<double>::quiet_NaN();
        }
        consecutive_bad = finite ? 0 : consecutive_bad + 1;
        ++res.steps_run;
        const bool stop = consecutive_bad >= 2;
        if (it % cfg.log_every == 0 || it == cfg.iterations - 1 || stop)
            res.log.emplace_back(it, report);
        if (stop) {
            res.diverged = true;
            break;
        }
    }
    res.params = std::move(params);
    return res;
}

void write_train_log_csv(const std::string& path,
                         const std::vector<std::pair<int64_t, LossReport>>& log) {
    // Column set is the union of term names in first-appearance order, so
    // early-stop rows with different terms still land in a rectangular table.
    std::vector<std::string> cols;
    for (const auto& [step, rep] : log)
        for (const auto& name : rep.names)
            if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);

    std::ofstream f(path);
    if (!f) throw PipelineError("cannot write " + path);
    f << "step,total";
    for (const auto& c : cols) f << "," << c << "," << c << "_weight";
    f << "\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& [step, rep] : log) {
        f << step << "," << fmt(rep.total);
        for (const auto& c : cols) {
            const auto it = std::find(rep.names.begin(), rep.names.end(), c);
            if (it == rep.names.end()) {
                f << ",,";
            } else {
                const size_t i = size_t(it - rep.names.begin());
                f << "," << fmt(rep.values[i]) << "," << fmt(rep.weights[i]);
            }
        }
        f << "\n";
    }
    if (!f.good()) throw PipelineError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// Rendering

std::vector<RenderedView> render_views(const FieldConfig& field,
                                       const std::vector<ad::Tensor<float>>& params,
                                       const std::vector<std::pair<std::string, Camera>>& views,
                                       const RenderViewsConfig& cfg) {
    using ad::Tensor;
    if (cfg.upscale < 1) throw PipelineError("render_views: upscale must be >= 1");
    if (cfg.chunk_rays < 1) throw PipelineError("render_views: chunk_rays must be >= 1");
    if (cfg.jobs < 1) throw PipelineError("render_views: jobs must be >= 1");

    std::vector<RenderedView> out;
    out.reserve(views.size());
    for (size_t vi = 0; vi < views.size(); ++vi) {
        const Camera& cam = views[vi].second;
        const auto rays = generate_all_rays(cam, int(vi));
        const size_t total = rays.size();
        std::vector<float> rgb(total * 3);
        std::vector<float> depth(total);

        const size_t chunk = size_t(cfg.chunk_rays);
        const size_t n_chunks = (total + chunk - 1) / chunk;
        auto run_chunk = [&](size_t ci) {
            const size_t lo = ci * chunk;
            const size_t hi = std::min(total, lo + chunk);
            const std::vector<Ray> slice(rays.begin() + std::ptrdiff_t(lo),
                                         rays.begin() + std::ptrdiff_t(hi));
            // Step past the anneal horizon renders with the mask fully open.
            auto rr = render_rays(field, params, params, slice, cfg.sampling,
                                  field.point_enc.anneal_steps, cfg.seed, kRenderSalt,
                                  cfg.background);
            const Tensor<float>& c = rr.fine.rgb;
            const Tensor<float>& d = rr.fine.depth;
            std::copy(c.data.begin(), c.data.end(), rgb.begin() + std::ptrdiff_t(lo * 3));
            std::copy(d.data.begin(), d.data.end(), depth.begin() + std::ptrdiff_t(lo));
        };

        if (cfg.jobs == 1 || n_chunks <= 1) {
            for (size_t ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
        } else {
            // Chunk boundaries are fixed by chunk_rays, so the worker count
            // changes only scheduling, never the output.
            std::atomic<size_t> next{0};
            std::exception_ptr first_error;
            std::mutex error_mutex;
            auto worker = [&]() {
                for (;;) {
                    const size_t ci = next.fetch_add(1);
                    if (ci >= n_chunks) return;
                    try {
                        run_chunk(ci);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            };
            std::vector<std::thread> threads;
            const size_t n_threads = std::min(size_t(cfg.jobs), n_chunks);
            threads.reserve(n_threads);
            for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
            if (first_error) std::rethrow_exception(first_error);
        }

        Imagef linear(cam.width, cam.height, 3);
        for (size_t i = 0; i < total * 3; ++i)
            linear.data[i] = std::clamp(rgb[i], 0.f, 1.f);
        if (cfg.upscale > 1)
            linear = resize_bilinear(linear, cam.width * cfg.upscale, cam.height * cfg.upscale);

        RenderedView rv;
        rv.name = views[vi].first;
        rv.image = encode_srgb(linear);
        rv.depth.width = cam.width;
        rv.depth.height = cam.height;
        rv.depth.scale = 1.f;
        rv.depth.values = std::move(depth);
        out.push_back(std::move(rv));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distillation

TrainConfig make_student_config(const TrainConfig& teacher) {
    TrainConfig s = teacher;
    s.method = Method::Baseline;
    s.field.hidden_width = teacher.field.hidden_width * 2;
    s.resolution_scale = 1.0;
    return s;
}

namespace {

void save_stage(const std::string& dir, const TrainResult& r) {
    fs::create_directories(dir);
    ad::save_checkpoint(dir + "/checkpoint.svcp", r.params);
    write_train_log_csv(dir + "/train_log.csv", r.log);
}

} // namespace

DistillResult distill(const Scene& scene, const DistillConfig& cfg,
                      const std::string& run_dir) {
    if (cfg.pseudo_views < 1) throw PipelineError("distill: pseudo_views must be >= 1");
    if (cfg.upscale < 1) throw PipelineError("distill: upscale must be >= 1");
    if (cfg.finetune_iterations < 0)
        throw PipelineError("distill: finetune_iterations must be >= 0");
    fs::create_directories(run_dir);

    DistillResult out;

    // Stage 1: teacher on the real inputs.
    TrainConfig tcfg = cfg.teacher;
    tcfg.seed = Rng::derive(cfg.seed, {0x7eac4e2ULL});
    out.teacher = train(scene, tcfg);
    save_stage(run_dir + "/teacher", out.teacher);
    if (out.teacher.diverged)
        throw PipelineError("distill: teacher training diverged; pseudo views not rendered");

    // Pseudo views: an azimuth ring rendered by the teacher, optionally at
    // reduced resolution and upscaled back to the input size.
    std::vector<Camera> input_cams;
    input_cams.reserve(scene.input_views.size());
    for (const auto& v : scene.input_views) input_cams.push_back(v.camera);
    const auto ring = pseudo_ring_cameras(input_cams, cfg.pseudo_views);

    std::vector<std::pair<std::string, Camera>> to_render;
    to_render.reserve(ring.size());
    for (size_t j = 0; j < ring.size(); ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "pseudo_%03zu", j);
        Camera rc = ring[j];
        if (cfg.upscale > 1) {
            if (rc.width % cfg.upscale != 0 || rc.height % cfg.upscale != 0)
                throw PipelineError("distill: upscale must divide the view size");
            rc = scale_camera(rc, rc.width / cfg.upscale, rc.height / cfg.upscale);
        }
        to_render.emplace_back(name, rc);
    }
    RenderViewsConfig rv;
    rv.sampling = tcfg.sampling;
    rv.sampling.jitter = false;
    rv.upscale = cfg.upscale;
    rv.seed = Rng::derive(cfg.seed, {0x9e4d11ULL});
    rv.background = background_term(scene.background);
    const auto rendered = render_views(tcfg.field, out.teacher.params, to_render, rv);

    out.pseudo_scene.background = scene.background;
    out.pseudo_scene.split = "pseudo";
    for (size_t j = 0; j < rendered.size(); ++j) {
        InputView v;
        v.name = rendered[j].name;
        v.camera = ring[j];
        v.image = rendered[j].image;
        out.pseudo_scene.input_views.push_back(std::move(v));
    }
    save_scene(run_dir + "/pseudo", out.pseudo_scene);

    // Stage 2: student from scratch on the pseudo views.
    TrainConfig scfg = cfg.student;
    scfg.seed = Rng::derive(cfg.seed, {0x57de27ULL});
    out.student = train(out.pseudo_scene, scfg);
    save_stage(run_dir + "/student", out.student);

    // Stage 3: short finetune of the student on the real inputs.
    TrainConfig fcfg = scfg;
    fcfg.iterations = cfg.finetune_iterations;
    fcfg.seed = Rng::derive(cfg.seed, {0xf17e73ULL});
    out.finetuned = train(scene, fcfg, &out.student.params);
    save_stage(run_dir + "/final", out.finetuned);
    return out;
}

// ---------------------------------------------------------------------------
// Fusion

std::vector<Image8> fuse(const std::vector<std::vector<Image8>>& candidates,
                         const FusionConfig& cfg) {
    if (candidates.size() < 2) throw PipelineError("fuse: need at least two candidates");
    const size_t n_c = candidates.size();
    const size_t n_v = candidates[0].size();
    if (n_v == 0) throw PipelineError("fuse: candidates have no views");
    for (const auto& c : candidates) {
        if (c.size() != n_v) throw PipelineError("fuse: candidate view counts differ");
        for (size_t v = 0; v < n_v; ++v) {
            const Image8& img = c[v];
            const Image8& ref = candidates[0][v];
            if (img.width != ref.width || img.height != ref.height ||
                img.channels != ref.channels)
                throw PipelineError("fuse: candidate image shapes differ");
        }
    }

    std::vector<Image8> out;
    out.reserve(n_v);

    if (cfg.mode == FusionMode::MetricSelect) {
        if (cfg.references.size() != n_v)
            throw PipelineError("fuse: metric_select needs one reference per view");
        for (size_t v = 0; v < n_v; ++v) {
            const Imagef ref = normalize8(cfg.references[v]);
            size_t best = 0;
            double best_score = psnr(normalize8(candidates[0][v]), ref);
            for (size_t c = 1; c < n_c; ++c) {
                const double score = psnr(normalize8(candidates[c][v]), ref);
                if (score > best_score) {
                    best = c;
                    best_score = score;
                }
            }
            out.push_back(candidates[best][v]);
        }
        return out;
    }

    // Per-pixel weight maps override the scalar weights when present.
    const bool per_pixel = !cfg.weight_maps.empty();
    if (per_pixel) {
        if (cfg.weight_maps.size() != n_c)
            throw PipelineError("fuse: need one weight map set per candidate");
        for (const auto& maps : cfg.weight_maps) {
            if (maps.size() != n_v) throw PipelineError("fuse: need one weight map per view");
            for (size_t v = 0; v < n_v; ++v) {
                const Imagef& m = maps[v];
                if (m.width != candidates[0][v].width || m.height != candidates[0][v].height ||
                    m.channels != 1)
                    throw PipelineError("fuse: weight map shape mismatch");
                for (float w : m.data)
                    if (!(w >= 0.f)) throw PipelineError("fuse: negative weight map entry");
            }
        }
    }
    std::vector<double> weights(n_c, 1.0 / double(n_c));
    if (!per_pixel && !cfg.weights.empty()) {
        if (cfg.weights.size() != n_c)
            throw PipelineError("fuse: need one weight per candidate");
        double sum = 0;
        for (double w : cfg.weights) {
            if (!(w >= 0.0)) throw PipelineError("fuse: weights must be non-negative");
            sum += w;
        }
        if (!(sum > 0.0)) throw PipelineError("fuse: weights sum to zero");
        for (size_t c = 0; c < n_c; ++c) weights[c] = cfg.weights[c] / sum;
    }

    std::vector<double> w(n_c);
    for (size_t v = 0; v < n_v; ++v) {
        const Image8& ref = candidates[0][v];
        Image8 blend(ref.width, ref.height, ref.channels);
        for (int r = 0; r < ref.height; ++r) {
            for (int c = 0; c < ref.width; ++c) {
                double wsum = 0;
                for (size_t k = 0; k < n_c; ++k) {
                    w[k] = per_pixel ? double(cfg.weight_maps[k][v].at(r, c, 0)) : weights[k];
                    wsum += w[k];
                }
                if (!(wsum > 0.0))
                    throw PipelineError("fuse: weights sum to zero at a pixel");
                for (int ch = 0; ch < ref.channels; ++ch) {
                    double acc = 0;
                    for (size_t k = 0; k < n_c; ++k)
                        acc += (w[k] / wsum) * double(candidates[k][v].at(r, c, ch));
                    blend.at(r, c, ch) = uint8_t(std::lround(std::clamp(acc, 0.0, 255.0)));
                }
            }
        }
        out.push_back(std::move(blend));
    }
    return out;
}

} // namespace svr
