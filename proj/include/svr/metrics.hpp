// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/image.hpp"
#include "svr/scene.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Identical images have infinite PSNR; they are reported as this sentinel,
// and any finite score above it is clamped to it as well.
constexpr double kPsnrCap = 99.0;

// Inclusive bounds of the tightest box around the set pixels of a mask.
struct MaskBox {
    int row_min = 0, row_max = 0, col_min = 0, col_max = 0;

    int rows() const { return row_max - row_min + 1; }
    int cols() const { return col_max - col_min + 1; }
};

// All metrics score stored-domain images scaled to [0,1] (what normalize8
// produces from an 8-bit file), so results match a file-based submission
// pipeline. Masks count a pixel as set when its value is nonzero.

// 10*log10(1/MSE) with MAX=1, MSE over every pixel and channel.
double psnr(const Imagef& pred, const Imagef& gt);

// Same, with the MSE averaged over masked pixels only (all channels); with a
// fully set mask this reproduces psnr bit for bit.
double masked_psnr(const Imagef& pred, const Imagef& gt, const Image8& mask);

MaskBox mask_bbox(const Image8& mask);

// Mean SSIM over the box crop of the BT.601 luma channel: 11x11 Gaussian
// window (sigma 1.5), C1=(0.01)^2, C2=(0.03)^2, valid convolution. Crops
// smaller than the window are extended to 11 pixels by symmetric reflection
// (edge pixels included); callers can detect that case from the box size.
double ssim_box(const Imagef& pred, const Imagef& gt, const MaskBox& box);

struct ViewMetrics {
    std::string scene, view, source;
    double psnr = 0.0, psnr_m = 0.0, ssim_m = 0.0;
    bool ssim_padded = false; // mask box was smaller than the SSIM window
    std::optional<double> perceptual;
};

struct SourceMean {
    std::string source;
    double psnr = 0.0, psnr_m = 0.0, ssim_m = 0.0;
    int view_count = 0;
};

// Whether the headline average should be the mean of per-source means or the
// mean over views is a protocol choice; both are filled in.
struct MetricReport {
    std::vector<ViewMetrics> views;
    std::vector<SourceMean> sources; // in first-seen order
    double source_avg_psnr = 0.0, source_avg_psnr_m = 0.0, source_avg_ssim_m = 0.0;
    double view_avg_psnr = 0.0, view_avg_psnr_m = 0.0, view_avg_ssim_m = 0.0;
};

struct EvalItem {
    std::string scene, view, source;
    Image8 pred, gt;  // stored 8-bit images, same size
    Image8 mask;      // single channel
};

// Optional external scorer, run per (pred, gt) pair; its value is carried
// in the report and the table but not the CSV.
using PairScorer = std::function<double(const Image8& pred, const Image8& gt)>;

MetricReport evaluate_views(const std::vector<EvalItem>& items,
                            const PairScorer& perceptual = nullptr);

// Scores <pred_dir>/<view name>.png against every target view of the scene.
// Target views must carry ground-truth images and masks; a missing or
// mismatched prediction is an error naming the view.
MetricReport evaluate_scene_dir(const std::string& pred_dir, const Scene& scene,
                                const std::string& scene_label, const std::string& source_label,
                                const PairScorer& perceptual = nullptr);

// Wraps an executable as a PairScorer: it is invoked as
//   <exe> <pred.png> <gt.png>
// with the pair written to temporary files, and must print one number.
PairScorer exec_pair_scorer(const std::string& exe);

// One row per view: scene,view,source,psnr,psnr_m,ssim_m (fixed 6-decimal
// formatting so identical runs emit identical bytes).
void write_metrics_csv(const std::string& path, const MetricReport& report);

std::string format_metrics_table(const MetricReport& report);

} // namespace svr
