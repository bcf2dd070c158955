// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Smallest positive quadratic root beyond t_min, or nullopt.
std::optional<double> sphere_hit(const Vec3& o, const Vec3& d, const Vec3& c, double r,
                                 double t_min) {
    const Vec3 oc = o - c;
    const double b = oc.dot(d);
    const double disc = b * b - (oc.squaredNorm() - r * r);
    if (disc < 0) return std::nullopt;
    const double s = std::sqrt(disc);
    for (double t : {-b - s, -b + s})
        if (t > t_min) return t;
    return std::nullopt;
}

// Slab test for an axis-aligned box; also reports which face was entered.
std::optional<double> box_hit(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& h,
                              double t_min, Vec3& normal_out) {
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    int enter_axis = -1;
    double enter_sign = 0;
    for (int a = 0; a < 3; ++a) {
        const double lo = c[a] - h[a], hi = c[a] + h[a];
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo || o[a] > hi) return std::nullopt;
            continue;
        }
        double t0 = (lo - o[a]) / d[a];
        double t1 = (hi - o[a]) / d[a];
        double sign = -1;
        if (t0 > t1) {
            std::swap(t0, t1);
            sign = 1;
        }
        if (t0 > t_enter) {
            t_enter = t0;
            enter_axis = a;
            enter_sign = sign;
        }
        t_exit = std::min(t_exit, t1);
        if (t_enter > t_exit) return std::nullopt;
    }
    if (enter_axis < 0 || t_enter <= t_min) return std::nullopt;
    normal_out = Vec3::Zero();
    normal_out[enter_axis] = enter_sign;
    return t_enter;
}

Vec3 shade(const SyntheticSceneSpec& spec, const Vec3& albedo, const Vec3& normal) {
    const Vec3 l = spec.light_dir.normalized();
    const double diffuse = std::max(0.0, normal.dot(-l));
    const double s = spec.ambient + (1.0 - spec.ambient) * diffuse;
    return albedo * s;
}

} // namespace

SyntheticSceneSpec SyntheticSceneSpec::default_scene() {
    SyntheticSceneSpec spec;
    spec.spheres = {{Vec3(-0.45, 0.25, 0.3), 0.55, Vec3(0.75, 0.2, 0.2)}};
    spec.boxes = {{Vec3(0.5, -0.3, -0.25), Vec3(0.45, 0.4, 0.5), Vec3(0.2, 0.35, 0.75)}};
    return spec;
}

std::optional<PrimHit> intersect_primitives(const SyntheticSceneSpec& spec, const Vec3& origin,
                                            const Vec3& dir, double t_min) {
    std::optional<PrimHit> best;
    for (const auto& s : spec.spheres) {
        if (auto t = sphere_hit(origin, dir, s.center, s.radius, t_min)) {
            if (!best || *t < best->t) {
                const Vec3 p = origin + *t * dir;
                best = PrimHit{*t, (p - s.center) / s.radius, s.albedo};
            }
        }
    }
    for (const auto& b : spec.boxes) {
        Vec3 n;
        if (auto t = box_hit(origin, dir, b.center, b.half_extent, t_min, n)) {
            if (!best || *t < best->t) best = PrimHit{*t, n, b.albedo};
        }
    }
    return best;
}

bool inside_any_primitive(const SyntheticSceneSpec& spec, const Vec3& p) {
    for (const auto& s : spec.spheres)
        if ((p - s.center).squaredNorm() <= s.radius * s.radius) return true;
    for (const auto& b : spec.boxes) {
        const Vec3 d = (p - b.center).cwiseAbs() - b.half_extent;
        if (d.maxCoeff() <= 0) return true;
    }
    return false;
}

void bounding_sphere(const SyntheticSceneSpec& spec, Vec3& center, double& radius) {
    if (spec.spheres.empty() && spec.boxes.empty())
        throw SceneError("synthetic scene has no primitives");
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& s : spec.spheres) {
        lo = lo.cwiseMin(s.center - Vec3::Constant(s.radius));
        hi = hi.cwiseMax(s.center + Vec3::Constant(s.radius));
    }
    for (const auto& b : spec.boxes) {
        lo = lo.cwiseMin(b.center - b.half_extent);
        hi = hi.cwiseMax(b.center + b.half_extent);
    }
    center = 0.5 * (lo + hi);
    radius = 0.5 * (hi - lo).norm();
}

std::vector<Camera> ring_cameras(const SyntheticSceneSpec& spec, int count, double radius,
                                 double elevation_deg, double azimuth_offset_rad) {
    Vec3 bs_center;
    double bs_radius;
    bounding_sphere(spec, bs_center, bs_radius);

    std::vector<Camera> cams;
    const double elev = elevation_deg * kPi / 180.0;
    for (int k = 0; k < count; ++k) {
        const double az = azimuth_offset_rad + 2.0 * kPi * double(k) / double(count);
        const Vec3 eye = bs_center + radius * Vec3(std::cos(elev) * std::cos(az),
                                                   std::cos(elev) * std::sin(az), std::sin(elev));
        Camera cam;
        cam.width = cam.height = spec.image_size;
        const double focal = spec.focal_px * double(spec.image_size) / 64.0;
        cam.fx = cam.fy = focal;
        cam.cx = 0.5 * spec.image_size;
        cam.cy = 0.5 * spec.image_size;
        const double dist = (eye - bs_center).norm();
        cam.near = std::max(1e-3, (dist - bs_radius) * 0.9);
        cam.far = (dist + bs_radius) * 1.1;
        cam.world_from_camera = look_at(eye, bs_center);
        validate_camera(cam);
        cams.push_back(cam);
    }
    return cams;
}

void render_view(const SyntheticSceneSpec& spec, const Camera& cam, Image8& image_out,
                 Image8& mask_out, DepthMap& depth_out) {
    image_out = Image8(cam.width, cam.height, 3);
    mask_out = Image8(cam.width, cam.height, 1);
    depth_out.width = cam.width;
    depth_out.height = cam.height;
    depth_out.scale = 1.f;
    depth_out.values.assign(size_t(cam.width) * size_t(cam.height), 0.f);

    for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
            const Ray ray = make_ray(cam, r, c);
            Vec3 rgb = spec.background_rgb;
            if (auto hit = intersect_primitives(spec, ray.origin, ray.direction)) {
                rgb = shade(spec, hit->albedo, hit->normal);
                mask_out.at(r, c, 0) = 255;
                depth_out.values[size_t(r) * size_t(cam.width) + size_t(c)] = float(hit->t);
            }
            for (int ch = 0; ch < 3; ++ch)
                image_out.at(r, c, ch) = quantize8(linear_to_srgb(rgb[ch]));
        }
    }
}

Scene synthesize_scene(const SyntheticSceneSpec& spec, uint64_t seed) {
    if (spec.spheres.empty() && spec.boxes.empty())
        throw SceneError("synthetic scene has no primitives");
    for (const auto& s : spec.spheres)
        if (!(s.radius > 0)) throw SceneError("sphere radius must be positive");
    for (const auto& b : spec.boxes)
        if (!(b.half_extent.minCoeff() > 0)) throw SceneError("box extent must be positive");
    for (int idx : spec.input_indices)
        if (idx < 0 || idx >= spec.ring_count)
            throw SceneError("input ring index out of range");

    Rng rng(seed, {0x5ce11e});
    const double phase = rng.uniform(0.0, 2.0 * kPi / double(std::max(1, spec.ring_count)));
    const auto cams =
        ring_cameras(spec, spec.ring_count, spec.ring_radius, spec.ring_elevation_deg, phase);

    Scene scene;
    scene.background = spec.background;
    scene.split = "synthetic";
    for (int k = 0; k < spec.ring_count; ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03d", k);
        Image8 image, mask;
        DepthMap depth;
        render_view(spec, cams[size_t(k)], image, mask, depth);
        const bool is_input = std::find(spec.input_indices.begin(), spec.input_indices.end(), k) !=
                              spec.input_indices.end();
        if (is_input) {
            InputView v;
            v.name = name;
            v.camera = cams[size_t(k)];
            v.image = std::move(image);
            v.mask = std::move(mask);
            v.depth = std::move(depth);
            scene.input_views.push_back(std::move(v));
        } else {
            TargetView t;
            t.name = name;
            t.camera = cams[size_t(k)];
            t.image = std::move(image);
            t.mask = std::move(mask);
            scene.target_views.push_back(std::move(t));
        }
    }
    validate_scene(scene);
    return scene;
}

} // namespace svr
