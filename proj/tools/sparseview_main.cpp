// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every artifact-producing subcommand writes a run
// directory containing a config.json snapshot (the parsed config with any
// command-line overrides applied), the command's outputs, and exactly one
// manifest.json recording the command, seed, build id, and timestamps.
// Reruns with the same inputs and seed reproduce every artifact byte for
// byte; only the manifest timestamps differ.

#include "svr/checkpoint.hpp"
#include "svr/config.hpp"
#include "svr/metrics.hpp"
#include "svr/pipelines.hpp"
#include "svr/synth.hpp"
#include "svr/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using svr::ConfigError;
using json = nlohmann::json;

namespace {

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

// The snapshot is the config file re-serialized after overrides, so the run
// directory always shows the values the run actually used.
void write_config_snapshot(const std::string& run_dir, const json& snapshot) {
    write_text(run_dir + "/config.json", snapshot.dump(2) + "\n");
}

void write_manifest(const std::string& run_dir, const std::string& command, uint64_t seed,
                    const std::string& started_at) {
    json m;
    m["build"] = svr::build_id();
    m["command"] = command;
    m["config"] = "config.json";
    m["finished_at"] = iso_utc_now();
    m["seed"] = seed;
    m["started_at"] = started_at;
    write_text(run_dir + "/manifest.json", m.dump(2) + "\n");
}

// Track 1 keeps the first 3 input views, track 2 the first 9; 0 means all.
void apply_track(svr::Scene& scene, int track) {
    if (track == 0) return;
    const size_t want = track == 1 ? 3 : 9;
    if (scene.input_views.size() < want)
        throw std::runtime_error("track " + std::to_string(track) + " needs " +
                                 std::to_string(want) + " input views, scene has " +
                                 std::to_string(scene.input_views.size()));
    scene.input_views.resize(want);
}

std::vector<std::pair<std::string, svr::Camera>> poses_of(const svr::Scene& scene,
                                                          const std::string& split) {
    std::vector<std::pair<std::string, svr::Camera>> out;
    if (split == "targets" || split == "all")
        for (const auto& v : scene.target_views) out.emplace_back(v.name, v.camera);
    if (split == "inputs" || split == "all")
        for (const auto& v : scene.input_views) out.emplace_back(v.name, v.camera);
    return out;
}

// Evaluation renders sample stratum midpoints (no jitter), so rendering is a
// pure function of the checkpoint and needs no seed.
void render_to_dir(const std::string& dir, const svr::TrainConfig& cfg,
                   const std::vector<svr::ad::Tensor<float>>& params, const svr::Scene& scene,
                   const std::vector<std::pair<std::string, svr::Camera>>& poses, int jobs) {
    svr::RenderViewsConfig rv;
    rv.sampling = cfg.sampling;
    rv.sampling.jitter = false;
    rv.jobs = jobs;
    rv.background = svr::background_term(scene.background);
    fs::create_directories(dir);
    for (const auto& view : svr::render_views(cfg.field, params, poses, rv))
        svr::write_png(dir + "/" + view.name + ".png", view.image);
}

// Run directories keep images under renders/; accept either the run dir or
// the image dir itself.
std::string image_dir_of(const std::string& dir) {
    const std::string nested = dir + "/renders";
    return fs::is_directory(nested) ? nested : dir;
}

std::vector<std::string> png_stems(const std::string& dir) {
    std::vector<std::string> stems;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            stems.push_back(e.path().stem().string());
    std::sort(stems.begin(), stems.end());
    return stems;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, uint64_t seed) {
    const std::string started = iso_utc_now();
    const svr::SyntheticSceneSpec spec = svr::load_scene_spec(spec_path);
    const svr::Scene scene = svr::synthesize_scene(spec, seed);
    svr::save_scene(out_dir, scene);
    write_config_snapshot(out_dir, json::parse(read_text(spec_path)));
    write_manifest(out_dir, "synth", seed, started);
    std::cout << "synth: wrote " << scene.input_views.size() << " input and "
              << scene.target_views.size() << " target views to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& scene_dir, const std::string& config_path,
              const std::string& out_dir, const std::optional<uint64_t>& seed,
              const std::optional<double>& res_scale, int jobs, int track) {
    const std::string started = iso_utc_now();
    svr::TrainConfig cfg = svr::load_train_config(config_path);
    json snapshot = json::parse(read_text(config_path));
    if (seed) cfg.seed = snapshot["seed"] = *seed;
    if (res_scale) cfg.resolution_scale = snapshot["resolution_scale"] = *res_scale;

    svr::Scene scene = svr::load_scene(scene_dir);
    apply_track(scene, track);

    fs::create_directories(out_dir);
    write_config_snapshot(out_dir, snapshot);

    const svr::TrainResult result = svr::train(scene, cfg);
    svr::ad::save_checkpoint(out_dir + "/checkpoint.svcp", result.params);
    svr::write_train_log_csv(out_dir + "/train_log.csv", result.log);
    render_to_dir(out_dir + "/renders", cfg, result.params, scene, poses_of(scene, "targets"),
                  jobs);
    write_manifest(out_dir, "train", cfg.seed, started);

    if (result.diverged) {
        std::cerr << "train: diverged at step " << result.steps_run
                  << "; artifacts hold the last finite parameters\n";
        return 1;
    }
    std::cout << "train: " << svr::to_string(cfg.method) << ", " << result.steps_run
              << " steps, artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_distill(const std::string& scene_dir, const std::string& config_path,
                const std::string& out_dir, const std::optional<uint64_t>& seed, int jobs,
                int track) {
    const std::string started = iso_utc_now();
    svr::DistillConfig cfg = svr::load_distill_config(config_path);
    json snapshot = json::parse(read_text(config_path));
    if (seed) cfg.seed = snapshot["seed"] = *seed;

    svr::Scene scene = svr::load_scene(scene_dir);
    apply_track(scene, track);

    fs::create_directories(out_dir);
    write_config_snapshot(out_dir, snapshot);

    const svr::DistillResult result = svr::distill(scene, cfg, out_dir);
    render_to_dir(out_dir + "/renders", cfg.student, result.finetuned.params, scene,
                  poses_of(scene, "targets"), jobs);
    write_manifest(out_dir, "distill", cfg.seed, started);
    std::cout << "distill: teacher " << result.teacher.steps_run << " steps, "
              << result.pseudo_scene.input_views.size() << " pseudo views, student "
              << result.student.steps_run << " + " << result.finetuned.steps_run
              << " finetune steps, artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_render(const std::string& checkpoint, const std::string& config_path,
               const std::string& scene_dir, const std::string& out_dir, const std::string& split,
               int jobs) {
    const std::string started = iso_utc_now();
    const svr::TrainConfig cfg = svr::load_train_config(config_path);
    const svr::Scene scene = svr::load_scene(scene_dir);

    svr::Rng shape_rng(0);
    std::vector<svr::ad::Tensor<float>> params = svr::init_field_params<float>(cfg.field, shape_rng);
    svr::ad::load_checkpoint(checkpoint, params);

    const auto poses = poses_of(scene, split);
    if (poses.empty()) throw std::runtime_error("render: no views in split '" + split + "'");

    fs::create_directories(out_dir);
    write_config_snapshot(out_dir, json::parse(read_text(config_path)));
    render_to_dir(out_dir + "/renders", cfg, params, scene, poses, jobs);
    write_manifest(out_dir, "render", 0, started);
    std::cout << "render: " << poses.size() << " views to " << out_dir << "/renders\n";
    return 0;
}

int cmd_fuse(const std::string& config_path, const std::vector<std::string>& candidate_dirs,
             const std::string& reference_scene, const std::string& out_dir) {
    const std::string started = iso_utc_now();
    svr::FusionConfig cfg = svr::load_fusion_config(config_path);

    std::vector<std::string> names;
    std::vector<std::vector<svr::Image8>> candidates;
    for (const auto& dir : candidate_dirs) {
        const std::string img_dir = image_dir_of(dir);
        const auto stems = png_stems(img_dir);
        if (stems.empty()) throw std::runtime_error("fuse: no .png files under " + img_dir);
        if (names.empty()) {
            names = stems;
        } else if (stems != names) {
            throw std::runtime_error("fuse: view names under " + img_dir +
                                     " do not match the first candidate");
        }
        std::vector<svr::Image8> views;
        for (const auto& n : names) views.push_back(svr::read_png(img_dir + "/" + n + ".png"));
        candidates.push_back(std::move(views));
    }

    if (!reference_scene.empty()) {
        const svr::Scene scene = svr::load_scene(reference_scene);
        std::map<std::string, const svr::TargetView*> by_name;
        for (const auto& v : scene.target_views) by_name[v.name] = &v;
        for (const auto& n : names) {
            const auto it = by_name.find(n);
            if (it == by_name.end() || !it->second->image)
                throw std::runtime_error("fuse: reference scene has no ground truth for view " + n);
            cfg.references.push_back(*it->second->image);
        }
    }

    const std::vector<svr::Image8> fused = svr::fuse(candidates, cfg);
    fs::create_directories(out_dir + "/renders");
    for (size_t v = 0; v < fused.size(); ++v)
        svr::write_png(out_dir + "/renders/" + names[v] + ".png", fused[v]);
    write_config_snapshot(out_dir, json::parse(read_text(config_path)));
    write_manifest(out_dir, "fuse", 0, started);
    std::cout << "fuse: " << svr::to_string(cfg.mode) << " over " << candidates.size()
              << " candidates, " << fused.size() << " views to " << out_dir << "/renders\n";
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& scene_dir,
                 const std::string& out_csv, const std::string& scene_label,
                 const std::string& source_label) {
    const svr::Scene scene = svr::load_scene(scene_dir);
    const svr::MetricReport report =
        svr::evaluate_scene_dir(image_dir_of(pred_dir), scene, scene_label, source_label);
    svr::write_metrics_csv(out_csv, report);
    std::cout << svr::format_metrics_table(report);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparseview: sparse-view neural rendering laboratory"};
    app.set_version_flag("--version", svr::build_id());
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Ray-trace a synthetic scene from a spec");
    std::string sy_spec, sy_out;
    uint64_t sy_seed = 0;
    synth->add_option("--spec", sy_spec, "scene spec JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", sy_out, "output scene directory")->required();
    synth->add_option("--seed", sy_seed, "image noise seed")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train a radiance field on a scene's input views");
    std::string tr_scene, tr_config, tr_out;
    std::optional<uint64_t> tr_seed;
    std::optional<double> tr_scale;
    int tr_jobs = 1, tr_track = 0;
    train->add_option("--scene", tr_scene, "scene directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    train->add_option("--config", tr_config, "train config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", tr_out, "run directory")->required();
    train->add_option("--seed", tr_seed, "override the config seed");
    train->add_option("--resolution-scale", tr_scale, "override the config resolution scale");
    train->add_option("--jobs", tr_jobs, "render worker threads")->capture_default_str();
    train->add_option("--track", tr_track, "input view budget: 1 = 3 views, 2 = 9 views")
        ->check(CLI::IsMember({1, 2}));

    // distill
    auto* distill = app.add_subcommand("distill", "Teacher/pseudo-view/student distillation");
    std::string di_scene, di_config, di_out;
    std::optional<uint64_t> di_seed;
    int di_jobs = 1, di_track = 0;
    distill->add_option("--scene", di_scene, "scene directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    distill->add_option("--config", di_config, "distill config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    distill->add_option("--out", di_out, "run directory")->required();
    distill->add_option("--seed", di_seed, "override the config seed");
    distill->add_option("--jobs", di_jobs, "render worker threads")->capture_default_str();
    distill->add_option("--track", di_track, "input view budget: 1 = 3 views, 2 = 9 views")
        ->check(CLI::IsMember({1, 2}));

    // render
    auto* render = app.add_subcommand("render", "Render scene poses from a checkpoint");
    std::string re_ckpt, re_config, re_scene, re_out, re_split = "targets";
    int re_jobs = 1;
    render->add_option("--checkpoint", re_ckpt, "parameter checkpoint (.svcp)")
        ->required()
        ->check(CLI::ExistingFile);
    render->add_option("--config", re_config, "train config the checkpoint was produced with")
        ->required()
        ->check(CLI::ExistingFile);
    render->add_option("--scene", re_scene, "scene directory providing the poses")
        ->required()
        ->check(CLI::ExistingDirectory);
    render->add_option("--out", re_out, "run directory")->required();
    render->add_option("--split", re_split, "targets, inputs, or all")->capture_default_str()
        ->check(CLI::IsMember({"targets", "inputs", "all"}));
    render->add_option("--jobs", re_jobs, "render worker threads")->capture_default_str();

    // fuse
    auto* fusec = app.add_subcommand("fuse", "Blend rendered outputs from several runs");
    std::string fu_config, fu_reference, fu_out;
    std::vector<std::string> fu_candidates;
    fusec->add_option("--config", fu_config, "fusion config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    fusec->add_option("--candidate", fu_candidates, "run or image directory (repeat, >= 2)")
        ->required()
        ->expected(-2)
        ->check(CLI::ExistingDirectory);
    fusec->add_option("--reference", fu_reference,
                      "scene directory with ground truth (metric_select)")
        ->check(CLI::ExistingDirectory);
    fusec->add_option("--out", fu_out, "run directory")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a scene's targets");
    std::string ev_pred, ev_scene, ev_out, ev_scene_label = "scene", ev_source = "pred";
    evaluate->add_option("--pred", ev_pred, "run or image directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    evaluate->add_option("--scene", ev_scene, "ground-truth scene directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    evaluate->add_option("--out", ev_out, "output CSV path")->required();
    evaluate->add_option("--scene-label", ev_scene_label, "scene column value")->capture_default_str();
    evaluate->add_option("--source", ev_source, "source column value")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand(synth)) return cmd_synth(sy_spec, sy_out, sy_seed);
        if (app.got_subcommand(train))
            return cmd_train(tr_scene, tr_config, tr_out, tr_seed, tr_scale, tr_jobs, tr_track);
        if (app.got_subcommand(distill))
            return cmd_distill(di_scene, di_config, di_out, di_seed, di_jobs, di_track);
        if (app.got_subcommand(render))
            return cmd_render(re_ckpt, re_config, re_scene, re_out, re_split, re_jobs);
        if (app.got_subcommand(fusec)) return cmd_fuse(fu_config, fu_candidates, fu_reference, fu_out);
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(ev_pred, ev_scene, ev_out, ev_scene_label, ev_source);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
