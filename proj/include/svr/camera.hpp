// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

struct CameraError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Pinhole camera. Camera space is x-right, y-down, z-forward; pixel (row i,
// col j) samples the continuous image point (j + 0.5, i + 0.5). This is the
// single pixel-center convention used by the renderer and the metrics.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    double near = 0, far = 0;
    Mat4 world_from_camera = Mat4::Identity();

    Mat3 intrinsics() const {
        Mat3 k = Mat3::Identity();
        k(0, 0) = fx;
        k(1, 1) = fy;
        k(0, 2) = cx;
        k(1, 2) = cy;
        return k;
    }
    Mat3 rotation() const { return world_from_camera.topLeftCorner<3, 3>(); }
    Vec3 position() const { return world_from_camera.topRightCorner<3, 1>(); }
    Vec3 forward() const { return rotation().col(2); }
};

inline void validate_camera(const Camera& c) {
    if (!(c.fx > 0) || !(c.fy > 0)) throw CameraError("focal lengths must be positive");
    if (c.width <= 0 || c.height <= 0) throw CameraError("image dimensions must be positive");
    if (!(c.cx >= 0) || c.cx >= c.width || !(c.cy >= 0) || c.cy >= c.height)
        throw CameraError("principal point outside image");
    if (!(c.near > 0) || !(c.near < c.far)) throw CameraError("require 0 < near < far");
    const Mat3 r = c.rotation();
    if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-5)
        throw CameraError("rotation block is not orthonormal");
    const Eigen::RowVector4d bottom = c.world_from_camera.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
        throw CameraError("transform bottom row must be (0,0,0,1)");
}

struct Ray {
    Vec3 origin;
    Vec3 direction; // unit length
    double t_near = 0, t_far = 0;
    int row = 0, col = 0;
    int view = 0;
};

// Backproject one pixel center through the pinhole model.
inline Ray make_ray(const Camera& cam, int row, int col, int view = 0) {
    if (row < 0 || row >= cam.height || col < 0 || col >= cam.width)
        throw CameraError("pixel (" + std::to_string(row) + "," + std::to_string(col) +
                          ") outside " + std::to_string(cam.width) + "x" +
                          std::to_string(cam.height));
    const double u = double(col) + 0.5;
    const double v = double(row) + 0.5;
    Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    Ray ray;
    ray.origin = cam.position();
    ray.direction = (cam.rotation() * dir_cam).normalized();
    ray.t_near = cam.near;
    ray.t_far = cam.far;
    ray.row = row;
    ray.col = col;
    ray.view = view;
    return ray;
}

inline std::vector<Ray> generate_rays(const Camera& cam,
                                      const std::vector<std::pair<int, int>>& pixels,
                                      int view = 0) {
    std::vector<Ray> rays;
    rays.reserve(pixels.size());
    for (const auto& [r, c] : pixels) rays.push_back(make_ray(cam, r, c, view));
    return rays;
}

inline std::vector<Ray> generate_all_rays(const Camera& cam, int view = 0) {
    std::vector<Ray> rays;
    rays.reserve(size_t(cam.width) * size_t(cam.height));
    for (int r = 0; r < cam.height; ++r)
        for (int c = 0; c < cam.width; ++c) rays.push_back(make_ray(cam, r, c, view));
    return rays;
}

// Rigid pose looking from `eye` toward `at`, with image-up aligned against
// world `up` (camera y points down, so its y column is the negated up
// direction after orthogonalization).
inline Mat4 look_at(const Vec3& eye, const Vec3& at, const Vec3& up = Vec3(0, 0, 1)) {
    const Vec3 f = (at - eye).normalized();
    if (f.cross(up).norm() < 1e-9) throw CameraError("look_at: view direction parallel to up");
    const Vec3 right = f.cross(up).normalized();
    const Vec3 down = f.cross(right);
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() << right, down, f;
    m.topRightCorner<3, 1>() = eye;
    return m;
}

} // namespace svr
