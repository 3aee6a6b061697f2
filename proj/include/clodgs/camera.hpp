#pragma once

#include "clodgs/math.hpp"

namespace clodgs {

/// Pinhole camera. Camera space follows the x-right, y-down, z-forward
/// convention; pixel (i, j) covers [i, i+1) x [j, j+1), so its center is at
/// (i + 0.5, j + 0.5).
struct Camera {
    int width = 64;
    int height = 64;
    double fx = 64.0;
    double fy = 64.0;
    double cx = 32.0;
    double cy = 32.0;
    Mat4 world_to_camera = Mat4::Identity();
    double near = 0.01;
    double far = 100.0;

    Mat3 rotation() const { return world_to_camera.block<3, 3>(0, 0); }
    Vec3 translation() const { return world_to_camera.block<3, 1>(0, 3); }

    /// Camera position in world coordinates.
    Vec3 center() const { return -rotation().transpose() * translation(); }

    Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }

    /// Throws ConfigError when intrinsics, clip planes or the pose are invalid.
    void validate() const;

    bool operator==(const Camera&) const = default;
};

/// Camera at `eye` looking at `target`; `up` is the world up direction.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height, double fov_y_deg);

struct OrbitParams {
    double azimuth_deg = 0.0;
    double elevation_deg = 45.0;
    double radius = 3.0;
    Vec3 target = Vec3::Zero();
};

/// Orbit camera around `target` with world +z as up.
Camera orbit_camera(const OrbitParams& orbit, int width, int height, double fov_y_deg = 50.0);

}  // namespace clodgs
