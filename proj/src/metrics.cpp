// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/metrics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace svr {

namespace fs = std::filesystem;

namespace {

void check_pair(const Imagef& pred, const Imagef& gt) {
    if (pred.width != gt.width || pred.height != gt.height || pred.channels != gt.channels)
        throw MetricError("prediction and ground truth differ in size or channels");
    if (pred.width <= 0 || pred.height <= 0) throw MetricError("empty image");
}

void check_mask(const Imagef& img, const Image8& mask) {
    if (mask.channels != 1) throw MetricError("mask must be single-channel");
    if (mask.width != img.width || mask.height != img.height)
        throw MetricError("mask size does not match the images");
}

// Shared by psnr and masked_psnr (mask == nullptr scores every pixel) so a
// fully set mask reproduces the unmasked score bit for bit.
double mse_over(const Imagef& pred, const Imagef& gt, const Image8* mask) {
    double sum = 0.0;
    int64_t count = 0;
    for (int r = 0; r < pred.height; ++r)
        for (int c = 0; c < pred.width; ++c) {
            if (mask && mask->at(r, c, 0) == 0) continue;
            for (int ch = 0; ch < pred.channels; ++ch) {
                const double d = double(pred.at(r, c, ch)) - double(gt.at(r, c, ch));
                sum += d * d;
            }
            ++count;
        }
    if (count == 0) throw MetricError("mask has no set pixels");
    return sum / (double(count) * double(pred.channels));
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(10.0 * std::log10(1.0 / mse), kPsnrCap);
}

// Centered symmetric reflection: pads crops shorter than the SSIM window.
int fold_index(int i, int n) {
    const int period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? i : period - 1 - i;
}

std::vector<double> luma_crop_padded(const Imagef& img, const MaskBox& box, int min_size,
                                     int& out_h, int& out_w) {
    const int h = box.rows(), w = box.cols();
    out_h = std::max(h, min_size);
    out_w = std::max(w, min_size);
    const int off_r = (out_h - h) / 2, off_c = (out_w - w) / 2;
    std::vector<double> luma(size_t(out_h) * size_t(out_w), 0.0);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) {
            const int sr = box.row_min + fold_index(r - off_r, h);
            const int sc = box.col_min + fold_index(c - off_c, w);
            double y;
            if (img.channels == 1) {
                y = double(img.at(sr, sc, 0));
            } else {
                y = 0.299 * double(img.at(sr, sc, 0)) + 0.587 * double(img.at(sr, sc, 1)) +
                    0.114 * double(img.at(sr, sc, 2));
            }
            luma[size_t(r) * size_t(out_w) + size_t(c)] = y;
        }
    return luma;
}

constexpr int kSsimWindow = 11;

const std::array<double, kSsimWindow * kSsimWindow>& ssim_window() {
    static const auto win = [] {
        std::array<double, kSsimWindow * kSsimWindow> w{};
        const double sigma = 1.5;
        double total = 0.0;
        for (int i = 0; i < kSsimWindow; ++i)
            for (int j = 0; j < kSsimWindow; ++j) {
                const double di = i - 5, dj = j - 5;
                w[size_t(i) * kSsimWindow + size_t(j)] =
                    std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
                total += w[size_t(i) * kSsimWindow + size_t(j)];
            }
        for (double& v : w) v /= total;
        return w;
    }();
    return win;
}

} // namespace

double psnr(const Imagef& pred, const Imagef& gt) {
    check_pair(pred, gt);
    return psnr_from_mse(mse_over(pred, gt, nullptr));
}

double masked_psnr(const Imagef& pred, const Imagef& gt, const Image8& mask) {
    check_pair(pred, gt);
    check_mask(pred, mask);
    return psnr_from_mse(mse_over(pred, gt, &mask));
}

MaskBox mask_bbox(const Image8& mask) {
    if (mask.channels != 1) throw MetricError("mask must be single-channel");
    MaskBox box{mask.height, -1, mask.width, -1};
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            if (mask.at(r, c, 0) != 0) {
                box.row_min = std::min(box.row_min, r);
                box.row_max = std::max(box.row_max, r);
                box.col_min = std::min(box.col_min, c);
                box.col_max = std::max(box.col_max, c);
            }
    if (box.row_max < 0) throw MetricError("mask has no set pixels");
    return box;
}

double ssim_box(const Imagef& pred, const Imagef& gt, const MaskBox& box) {
    check_pair(pred, gt);
    if (box.row_min < 0 || box.col_min < 0 || box.row_max >= pred.height ||
        box.col_max >= pred.width || box.rows() <= 0 || box.cols() <= 0)
        throw MetricError("mask box does not fit inside the images");
    int h = 0, w = 0;
    const auto x = luma_crop_padded(pred, box, kSsimWindow, h, w);
    const auto y = luma_crop_padded(gt, box, kSsimWindow, h, w);
    const auto& win = ssim_window();
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int64_t count = 0;
    for (int r = 0; r + kSsimWindow <= h; ++r)
        for (int c = 0; c + kSsimWindow <= w; ++c) {
            double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                for (int j = 0; j < kSsimWindow; ++j) {
                    const double wv = win[size_t(i) * kSsimWindow + size_t(j)];
                    const double xv = x[size_t(r + i) * size_t(w) + size_t(c + j)];
                    const double yv = y[size_t(r + i) * size_t(w) + size_t(c + j)];
                    mx += wv * xv;
                    my += wv * yv;
                    mxx += wv * xv * xv;
                    myy += wv * yv * yv;
                    mxy += wv * xv * yv;
                }
            const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    // rounding can push a perfect match a few ulps past 1; the score is
    // defined on [-1, 1]
    return std::clamp(total / double(count), -1.0, 1.0);
}

MetricReport evaluate_views(const std::vector<EvalItem>& items, const PairScorer& perceptual) {
    MetricReport report;
    for (const auto& item : items) {
        const auto pred = normalize8(item.pred);
        const auto gt = normalize8(item.gt);
        const auto box = mask_bbox(item.mask);
        ViewMetrics vm;
        vm.scene = item.scene;
        vm.view = item.view;
        vm.source = item.source;
        vm.psnr = psnr(pred, gt);
        vm.psnr_m = masked_psnr(pred, gt, item.mask);
        vm.ssim_m = ssim_box(pred, gt, box);
        vm.ssim_padded = box.rows() < kSsimWindow || box.cols() < kSsimWindow;
        if (perceptual) vm.perceptual = perceptual(item.pred, item.gt);
        report.views.push_back(std::move(vm));
    }
    if (report.views.empty()) throw MetricError("nothing to evaluate");
    for (const auto& vm : report.views) {
        auto it = std::find_if(report.sources.begin(), report.sources.end(),
                               [&](const SourceMean& s) { return s.source == vm.source; });
        if (it == report.sources.end()) {
            report.sources.push_back({vm.source, 0.0, 0.0, 0.0, 0});
            it = std::prev(report.sources.end());
        }
        it->psnr += vm.psnr;
        it->psnr_m += vm.psnr_m;
        it->ssim_m += vm.ssim_m;
        ++it->view_count;
        report.view_avg_psnr += vm.psnr;
        report.view_avg_psnr_m += vm.psnr_m;
        report.view_avg_ssim_m += vm.ssim_m;
    }
    for (auto& s : report.sources) {
        s.psnr /= s.view_count;
        s.psnr_m /= s.view_count;
        s.ssim_m /= s.view_count;
        report.source_avg_psnr += s.psnr;
        report.source_avg_psnr_m += s.psnr_m;
        report.source_avg_ssim_m += s.ssim_m;
    }
    const double ns = double(report.sources.size()), nv = double(report.views.size());
    report.source_avg_psnr /= ns;
    report.source_avg_psnr_m /= ns;
    report.source_avg_ssim_m /= ns;
    report.view_avg_psnr /= nv;
    report.view_avg_psnr_m /= nv;
    report.view_avg_ssim_m /= nv;
    return report;
}

MetricReport evaluate_scene_dir(const std::string& pred_dir, const Scene& scene,
                                const std::string& scene_label, const std::string& source_label,
                                const PairScorer& perceptual) {
    std::vector<EvalItem> items;
    for (const auto& target : scene.target_views) {
        if (!target.image)
            throw MetricError("target view '" + target.name + "' has no ground-truth image");
        if (!target.mask) throw MetricError("target view '" + target.name + "' has no mask");
        const auto path = fs::path(pred_dir) / (target.name + ".png");
        if (!fs::exists(path))
            throw MetricError("missing prediction for view '" + target.name + "': " +
                              path.string());
        EvalItem item;
        item.scene = scene_label;
        item.view = target.name;
        item.source = source_label;
        item.pred = read_png(path.string());
        if (item.pred.width != target.image->width || item.pred.height != target.image->height)
            throw MetricError("prediction size mismatch for view '" + target.name + "'");
        item.gt = *target.image;
        item.mask = *target.mask;
        items.push_back(std::move(item));
    }
    return evaluate_views(items, perceptual);
}

PairScorer exec_pair_scorer(const std::string& exe) {
    return [exe](const Image8& pred, const Image8& gt) {
        static std::atomic<uint64_t> counter{0};
        const auto tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
        const auto dir = fs::temp_directory_path();
        const auto p1 = (dir / ("svr_pred_" + tag + ".png")).string();
        const auto p2 = (dir / ("svr_gt_" + tag + ".png")).string();
        write_png(p1, pred);
        write_png(p2, gt);
        const std::string cmd = exe + " '" + p1 + "' '" + p2 + "'";
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) throw MetricError("cannot run scorer: " + exe);
        std::string out;
        char buf[256];
        while (size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
        const int status = ::pclose(pipe);
        fs::remove(p1);
        fs::remove(p2);
        if (status != 0) throw MetricError("scorer failed: " + exe);
        try {
            return std::stod(out);
        } catch (const std::exception&) {
            throw MetricError("scorer output is not a number: '" + out + "'");
        }
    };
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

void write_metrics_csv(const std::string& path, const MetricReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw MetricError("cannot open " + path + " for writing");
    out << "scene,view,source,psnr,psnr_m,ssim_m\n";
    for (const auto& vm : report.views)
        out << vm.scene << ',' << vm.view << ',' << vm.source << ',' << fmt6(vm.psnr) << ','
            << fmt6(vm.psnr_m) << ',' << fmt6(vm.ssim_m) << '\n';
    if (!out) throw MetricError("short write to " + path);
}

std::string format_metrics_table(const MetricReport& report) {
    std::ostringstream os;
    bool any_cap = false, any_pad = false;
    char line[256];
    std::snprintf(line, sizeof line, "%-14s %-12s %-10s %9s %9s %9s\n", "scene", "view",
                  "source", "psnr", "psnr-m", "ssim-m");
    os << line;
    for (const auto& vm : report.views) {
        const char cap = vm.psnr >= kPsnrCap || vm.psnr_m >= kPsnrCap ? '*' : ' ';
        const char pad = vm.ssim_padded ? '~' : ' ';
        any_cap |= cap == '*';
        any_pad |= pad == '~';
        std::snprintf(line, sizeof line, "%-14s %-12s %-10s %9.4f %8.4f%c %8.4f%c", //
                      vm.scene.c_str(), vm.view.c_str(), vm.source.c_str(), vm.psnr, vm.psnr_m,
                      cap, vm.ssim_m, pad);
        os << line;
        if (vm.perceptual) {
            std::snprintf(line, sizeof line, "  perceptual %.4f", *vm.perceptual);
            os << line;
        }
        os << '\n';
    }
    for (const auto& s : report.sources) {
        std::snprintf(line, sizeof line, "%-38s %9.4f %9.4f %9.4f  (%d views)\n",
                      ("mean over " + s.source).c_str(), s.psnr, s.psnr_m, s.ssim_m,
                      s.view_count);
        os << line;
    }
    std::snprintf(line, sizeof line, "%-38s %9.4f %9.4f %9.4f\n", "avg of source means",
                  report.source_avg_psnr, report.source_avg_psnr_m, report.source_avg_ssim_m);
    os << line;
    std::snprintf(line, sizeof line, "%-38s %9.4f %9.4f %9.4f\n", "avg over views",
                  report.view_avg_psnr, report.view_avg_psnr_m, report.view_avg_ssim_m);
    os << line;
    if (any_cap) os << "* psnr capped at 99 dB (identical pixels)\n";
    if (any_pad) os << "~ ssim computed on a reflection-padded box\n";
    return os.str();
}

} // namespace svr
