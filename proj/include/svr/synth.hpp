// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/rng.hpp"
#include "svr/scene.hpp"

#include <optional>
#include <vector>

namespace svr {

struct SpherePrim {
    Vec3 center;
    double radius;
    Vec3 albedo; // linear RGB
};

struct BoxPrim {
    Vec3 center;
    Vec3 half_extent;
    Vec3 albedo;
};

struct SyntheticSceneSpec {
    std::vector<SpherePrim> spheres;
    std::vector<BoxPrim> boxes;
    Vec3 light_dir = Vec3(-1, -1, -2); // direction light travels, normalized on use
    double ambient = 0.25;
    Vec3 background_rgb = Vec3(1, 1, 1);
    Background background = Background::White;

    int ring_count = 12; // total cameras on the ring
    double ring_radius = 4.0;
    double ring_elevation_deg = 25.0;
    int image_size = 64; // square images
    double focal_px = 80.0; // at image_size 64

    // Ring indices used as inputs; the rest become held-out targets.
    std::vector<int> input_indices = {0, 4, 8};

    static SyntheticSceneSpec default_scene();
};

// First-hit query against the primitive list. Returns the hit distance t
// (unit direction, so t is metric), surface normal, and albedo.
struct PrimHit {
    double t;
    Vec3 normal;
    Vec3 albedo;
};
std::optional<PrimHit> intersect_primitives(const SyntheticSceneSpec& spec, const Vec3& origin,
                                            const Vec3& dir, double t_min = 1e-6);

// True when the point lies inside any primitive; the ray-march consistency
// check uses this as an independent occupancy oracle.
bool inside_any_primitive(const SyntheticSceneSpec& spec, const Vec3& p);

// Bounding sphere of all primitives, used to auto-fit camera near/far.
void bounding_sphere(const SyntheticSceneSpec& spec, Vec3& center, double& radius);

// Cameras on an azimuth ring looking at the primitive bounding-sphere
// center, near/far fitted to the bounding sphere with 10% padding.
std::vector<Camera> ring_cameras(const SyntheticSceneSpec& spec, int count, double radius,
                                 double elevation_deg, double azimuth_offset_rad = 0.0);

// Exact analytic render of one view: Lambertian shading with a directional
// light plus ambient, no shadows. Images come back as stored sRGB codes;
// mask is hit/no-hit; depth is first-hit distance (scale 1).
void render_view(const SyntheticSceneSpec& spec, const Camera& cam, Image8& image_out,
                 Image8& mask_out, DepthMap& depth_out);

// Full scene synthesis: renders every ring camera, splits views into inputs
// (spec.input_indices) and held-out targets (the rest, keeping ground truth
// for local evaluation). The seed only rotates the ring phase so distinct
// seeds give distinct poses; geometry and shading are deterministic.
Scene synthesize_scene(const SyntheticSceneSpec& spec, uint64_t seed);

} // namespace svr
