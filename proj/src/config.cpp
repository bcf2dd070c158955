// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace svr {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError("config key '" + path + "': " + what);
}

[[noreturn]] void unknown(const std::string& path) {
    throw ConfigError("unknown config key '" + path + "'");
}

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return int(j.get<int64_t>());
}

uint64_t as_u64(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<int64_t>() < 0)
        bad(path, "expected a non-negative integer");
    return j.get<uint64_t>();
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) bad(path, "expected true or false");
    return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) bad(path, "expected a string");
    return j.get<std::string>();
}

Vec3 as_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) bad(path, "expected [x, y, z]");
    return Vec3(as_number(j[0], path), as_number(j[1], path), as_number(j[2], path));
}

const json& as_object(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
    return j;
}

json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

json parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_text(buf.str());
}

EncodingConfig encoding_from_json(const json& j, const std::string& prefix) {
    EncodingConfig e;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "bands") {
            e.bands = as_int(v, p);
        } else if (k == "anneal_steps") {
            e.anneal_steps = as_int(v, p);
        } else if (k == "mode") {
            const std::string s = as_string(v, p);
            if (s == "ramp") e.mode = MaskMode::Ramp;
            else if (s == "literal_clamped") e.mode = MaskMode::LiteralClamped;
            else bad(p, "expected 'ramp' or 'literal_clamped'");
        } else {
            unknown(p);
        }
    }
    return e;
}

FieldConfig field_from_json(const json& j, const std::string& prefix) {
    FieldConfig f;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "hidden_width") f.hidden_width = as_int(v, p);
        else if (k == "depth") f.depth = as_int(v, p);
        else if (k == "bottleneck") f.bottleneck = as_int(v, p);
        else if (k == "feature_dim") f.feature_dim = as_int(v, p);
        else if (k == "skip_layer") f.skip_layer = as_int(v, p);
        else if (k == "feature_conditioned") f.feature_conditioned = as_bool(v, p);
        else if (k == "point_enc") f.point_enc = encoding_from_json(v, p);
        else unknown(p);
    }
    return f;
}

SamplingConfig sampling_from_json(const json& j, const std::string& prefix) {
    SamplingConfig s;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "n_coarse") s.n_coarse = as_int(v, p);
        else if (k == "n_fine") s.n_fine = as_int(v, p);
        else if (k == "jitter") s.jitter = as_bool(v, p);
        else unknown(p);
    }
    return s;
}

LossWeights weights_from_json(const json& j, const std::string& prefix) {
    LossWeights w;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "occlusion") w.occlusion = as_number(v, p);
        else if (k == "tv_max") w.tv_max = as_number(v, p);
        else if (k == "rank") w.rank = as_number(v, p);
        else if (k == "continuity") w.continuity = as_number(v, p);
        else if (k == "feature") w.feature = as_number(v, p);
        else unknown(p);
    }
    return w;
}

DepthPriorConfig depth_prior_from_json(const json& j, const std::string& prefix) {
    DepthPriorConfig d{DepthPriorKind::SyntheticGtPlusNoise, -1.0, 0, ""};
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "kind") {
            const std::string s = as_string(v, p);
            if (s == "synthetic_gt_plus_noise") d.kind = DepthPriorKind::SyntheticGtPlusNoise;
            else if (s == "file") d.kind = DepthPriorKind::File;
            else bad(p, "expected 'synthetic_gt_plus_noise' or 'file'");
        } else if (k == "noise_sigma") {
            d.noise_sigma = as_number(v, p);
        } else if (k == "seed") {
            d.seed = as_u64(v, p);
        } else if (k == "directory") {
            d.directory = as_string(v, p);
        } else {
            unknown(p);
        }
    }
    return d;
}

FeaturePriorConfig feature_prior_from_json(const json& j, const std::string& prefix) {
    FeaturePriorConfig f;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "kind") {
            const std::string s = as_string(v, p);
            if (s == "local_descriptor") f.kind = FeaturePriorKind::LocalDescriptor;
            else if (s == "file") f.kind = FeaturePriorKind::File;
            else bad(p, "expected 'local_descriptor' or 'file'");
        } else if (k == "directory") {
            f.directory = as_string(v, p);
        } else {
            unknown(p);
        }
    }
    return f;
}

TrainConfig train_from_json(const json& j, const std::string& prefix) {
    TrainConfig c;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "method") {
            try {
                c.method = method_from_string(as_string(v, p));
            } catch (const PipelineError& e) {
                bad(p, e.what());
            }
        } else if (k == "iterations") c.iterations = as_int(v, p);
        else if (k == "batch_rays") c.batch_rays = as_int(v, p);
        else if (k == "patch_size") c.patch_size = as_int(v, p);
        else if (k == "rank_pairs") c.rank_pairs = as_int(v, p);
        else if (k == "knn_k") c.knn_k = as_int(v, p);
        else if (k == "knn_window") c.knn_window = as_int(v, p);
        else if (k == "rank_margin") c.rank_margin = as_number(v, p);
        else if (k == "cont_threshold") c.cont_threshold = as_number(v, p);
        else if (k == "occ_fraction") c.occ_fraction = as_number(v, p);
        else if (k == "lr_start") c.lr_start = as_number(v, p);
        else if (k == "lr_end") c.lr_end = as_number(v, p);
        else if (k == "resolution_scale") c.resolution_scale = as_number(v, p);
        else if (k == "seed") c.seed = as_u64(v, p);
        else if (k == "log_every") c.log_every = as_int(v, p);
        else if (k == "weights") c.weights = weights_from_json(v, p);
        else if (k == "field") c.field = field_from_json(v, p);
        else if (k == "sampling") c.sampling = sampling_from_json(v, p);
        else if (k == "depth_prior") c.depth_prior = depth_prior_from_json(v, p);
        else if (k == "feature_prior") c.feature_prior = feature_prior_from_json(v, p);
        else unknown(p);
    }
    return c;
}

DistillConfig distill_from_json(const json& j, const std::string& prefix) {
    DistillConfig c;
    bool have_student = false;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "teacher") {
            c.teacher = train_from_json(v, p);
        } else if (k == "student") {
            c.student = train_from_json(v, p);
            have_student = true;
        } else if (k == "finetune_iterations") {
            c.finetune_iterations = as_int(v, p);
        } else if (k == "pseudo_views") {
            c.pseudo_views = as_int(v, p);
        } else if (k == "upscale") {
            c.upscale = as_int(v, p);
        } else if (k == "seed") {
            c.seed = as_u64(v, p);
        } else {
            unknown(p);
        }
    }
    if (!have_student) c.student = make_student_config(c.teacher);
    return c;
}

FusionConfig fusion_from_json(const json& j, const std::string& prefix) {
    FusionConfig c;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "mode") {
            try {
                c.mode = fusion_mode_from_string(as_string(v, p));
            } catch (const PipelineError& e) {
                bad(p, e.what());
            }
        } else if (k == "weights") {
            if (!v.is_array()) bad(p, "expected an array of numbers");
            for (const auto& w : v) c.weights.push_back(as_number(w, p));
        } else {
            unknown(p);
        }
    }
    return c;
}

SpherePrim sphere_from_json(const json& j, const std::string& prefix) {
    SpherePrim s{Vec3::Zero(), 1.0, Vec3(0.5, 0.5, 0.5)};
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "center") s.center = as_vec3(v, p);
        else if (k == "radius") s.radius = as_number(v, p);
        else if (k == "albedo") s.albedo = as_vec3(v, p);
        else unknown(p);
    }
    return s;
}

BoxPrim box_from_json(const json& j, const std::string& prefix) {
    BoxPrim b{Vec3::Zero(), Vec3(0.5, 0.5, 0.5), Vec3(0.5, 0.5, 0.5)};
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "center") b.center = as_vec3(v, p);
        else if (k == "half_extent") b.half_extent = as_vec3(v, p);
        else if (k == "albedo") b.albedo = as_vec3(v, p);
        else unknown(p);
    }
    return b;
}

SyntheticSceneSpec spec_from_json(const json& j, const std::string& prefix) {
    SyntheticSceneSpec s;
    for (const auto& [k, v] : as_object(j, prefix).items()) {
        const std::string p = join(prefix, k);
        if (k == "spheres") {
            if (!v.is_array()) bad(p, "expected an array");
            s.spheres.clear();
            for (size_t i = 0; i < v.size(); ++i)
                s.spheres.push_back(sphere_from_json(v[i], p + "[" + std::to_string(i) + "]"));
        } else if (k == "boxes") {
            if (!v.is_array()) bad(p, "expected an array");
            s.boxes.clear();
            for (size_t i = 0; i < v.size(); ++i)
                s.boxes.push_back(box_from_json(v[i], p + "[" + std::to_string(i) + "]"));
        } else if (k == "light_dir") {
            s.light_dir = as_vec3(v, p);
        } else if (k == "ambient") {
            s.ambient = as_number(v, p);
        } else if (k == "background_rgb") {
            s.background_rgb = as_vec3(v, p);
        } else if (k == "background") {
            try {
                s.background = background_from_string(as_string(v, p));
            } catch (const SceneError& e) {
                bad(p, e.what());
            }
        } else if (k == "ring_count") {
            s.ring_count = as_int(v, p);
        } else if (k == "ring_radius") {
            s.ring_radius = as_number(v, p);
        } else if (k == "ring_elevation_deg") {
            s.ring_elevation_deg = as_number(v, p);
        } else if (k == "image_size") {
            s.image_size = as_int(v, p);
        } else if (k == "focal_px") {
            s.focal_px = as_number(v, p);
        } else if (k == "input_indices") {
            if (!v.is_array()) bad(p, "expected an array of ring indices");
            s.input_indices.clear();
            for (const auto& idx : v) s.input_indices.push_back(as_int(idx, p));
        } else {
            unknown(p);
        }
    }
    return s;
}

} // namespace

TrainConfig load_train_config(const std::string& path) {
    return train_from_json(parse_file(path), "");
}

TrainConfig train_config_from_json_text(const std::string& text, const std::string& prefix) {
    return train_from_json(parse_text(text), prefix);
}

DistillConfig load_distill_config(const std::string& path) {
    return distill_from_json(parse_file(path), "");
}

FusionConfig load_fusion_config(const std::string& path) {
    return fusion_from_json(parse_file(path), "");
}

SyntheticSceneSpec load_scene_spec(const std::string& path) {
    return spec_from_json(parse_file(path), "");
}

} // namespace svr
