// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/camera.hpp"
#include "svr/field.hpp"
#include "svr/losses.hpp"
#include "svr/priors.hpp"
#include "svr/renderer.hpp"
#include "svr/scene.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace svr {

struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// What the training loop optimizes besides the photometric term:
//   Baseline     nothing; the full positional encoding is active from step 0
//   FreqOcc      frequency-annealed encoding plus the near-camera occlusion
//                penalty
//   Esnerf       FreqOcc plus the depth-prior terms (smoothness, ordinal
//                ranking, neighbour continuity) on patch batches
//   FeatureCond  FreqOcc plus feature supervision of a feature-conditioned
//                field
enum class Method { Baseline, FreqOcc, Esnerf, FeatureCond };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct TrainConfig {
    Method method = Method::FreqOcc;
    int iterations = 2000;
    int batch_rays = 128; // ray batch for pixel-pool methods
    int patch_size = 16;  // Esnerf batches are patch_size^2 rays from one patch
    int rank_pairs = 64;  // ordinal depth pairs sampled per patch
    int knn_k = 4;        // neighbours per pixel for the continuity term
    int knn_window = 8;   // spatial window of the neighbour search
    double rank_margin = 1e-4;      // hinge margin of the ordinal depth term
    double cont_threshold = 0.05;   // tolerated depth gap between neighbours
    double occ_fraction = 0.25; // leading fraction of coarse samples penalized
    double lr_start = 5e-4;
    double lr_end = 5e-5;
    double resolution_scale = 1.0; // inputs are rescaled by this before training
    uint64_t seed = 0;
    int log_every = 100;
    LossWeights weights;
    FieldConfig field;
    SamplingConfig sampling;
    // Esnerf only; noise_sigma < 0 means 2% of the mean camera depth range
    DepthPriorConfig depth_prior{DepthPriorKind::SyntheticGtPlusNoise, -1.0, 0, ""};
    FeaturePriorConfig feature_prior; // FeatureCond only
};

struct TrainResult {
    std::vector<ad::Tensor<float>> params;
    // (step, report) pairs at the log_every cadence plus the first and last step
    std::vector<std::pair<int64_t, LossReport>> log;
    bool diverged = false;
    int64_t steps_run = 0;
};

// Runs the configured method on the scene's input views. Deterministic for a
// fixed config: every random choice (init, batch order, patch placement,
// sample jitter) comes from streams derived from cfg.seed. Ray batches for
// pixel-pool methods walk a fresh seeded permutation of all input pixels each
// epoch, so an epoch touches every pixel exactly once. A forward pass that
// produces non-finite values skips the update; two in a row abort the run
// with diverged set and params still at the last finite state.
TrainResult train(const Scene& scene, const TrainConfig& cfg,
                  const std::vector<ad::Tensor<float>>* initial_params = nullptr);

// One row per logged step: step, lr-free weighted total, then one
// value,weight column pair per loss term.
void write_train_log_csv(const std::string& path,
                         const std::vector<std::pair<int64_t, LossReport>>& log);

struct RenderViewsConfig {
    SamplingConfig sampling{32, 32, false};
    int upscale = 1;       // bilinear upscale factor applied to the output
    int chunk_rays = 1024; // fixed chunk size keeps output independent of jobs
    int jobs = 1;
    uint64_t seed = 0;
    std::optional<std::array<double, 3>> background;
};

struct RenderedView {
    std::string name;
    Image8 image;   // sRGB-encoded render
    DepthMap depth; // expected depth, zero on empty rays; native render size
};

std::vector<RenderedView> render_views(const FieldConfig& field,
                                       const std::vector<ad::Tensor<float>>& params,
                                       const std::vector<std::pair<std::string, Camera>>& views,
                                       const RenderViewsConfig& cfg);

// Scene background as a linear compositing colour (None -> no term).
std::optional<std::array<double, 3>> background_term(Background b);

// Input views rescaled for low-resolution training: images area-averaged,
// masks and depth nearest-sampled, intrinsics scaled to match.
Scene scale_scene(const Scene& scene, double scale);

Camera scale_camera(const Camera& cam, int new_w, int new_h);

// Least-squares intersection point of the cameras' optical axes; the object
// center estimate used to aim pseudo-view rings.
Vec3 estimate_look_target(const std::vector<Camera>& cameras);

// Azimuth-uniform ring of `count` cameras at the mean input elevation and
// radius around the estimated look target, with mean input intrinsics.
std::vector<Camera> pseudo_ring_cameras(const std::vector<Camera>& inputs, int count);

struct DistillConfig {
    TrainConfig teacher;
    TrainConfig student;         // stage 2 settings; trains only on pseudo views
    int finetune_iterations = 500; // stage 3, on the original input views
    int pseudo_views = 25;
    int upscale = 1; // pseudo views are rendered at 1/upscale and upscaled back
    uint64_t seed = 0;
};

// Student defaults from a teacher config: twice the trunk width as the
// stand-in for a higher-capacity student, photometric-only training, full
// encoding (dense pseudo coverage needs no annealing).
TrainConfig make_student_config(const TrainConfig& teacher);

struct DistillResult {
    TrainResult teacher;   // stage 1
    TrainResult student;   // stage 2, trained from scratch on pseudo views
    TrainResult finetuned; // stage 3
    Scene pseudo_scene;
};

// Three-stage distillation. Stage boundaries are pure checkpoints: each stage
// writes under <run_dir>/{teacher,student,final} and <run_dir>/pseudo holds
// the rendered pseudo scene, so any stage can be reproduced from the previous
// stage's artifacts alone. Teacher divergence aborts before pseudo rendering.
DistillResult distill(const Scene& scene, const DistillConfig& cfg,
                      const std::string& run_dir);

enum class FusionMode { PixelWeighted, MetricSelect };

std::string to_string(FusionMode m);
FusionMode fusion_mode_from_string(const std::string& s);

struct FusionConfig {
    FusionMode mode = FusionMode::PixelWeighted;
    // per-candidate scalar weights; empty means uniform. Normalized to sum 1.
    std::vector<double> weights;
    // optional per-pixel weights, [candidate][view], single channel; when
    // given they replace the scalar weights and are normalized per pixel
    std::vector<std::vector<Imagef>> weight_maps;
    // per-view references; required for MetricSelect
    std::vector<Image8> references;
};

// candidates[c][v]: view v of candidate c. PixelWeighted blends the stored
// 8-bit codes per pixel; MetricSelect returns, per view, the candidate with
// the highest PSNR against the reference, verbatim.
std::vector<Image8> fuse(const std::vector<std::vector<Image8>>& candidates,
                         const FusionConfig& cfg);

} // namespace svr
