#include "clodgs/camera.hpp"

#include "clodgs/error.hpp"

#include <cmath>
#include <numbers>

namespace clodgs {

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("camera resolution must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera focal lengths must be positive");
    if (!(near > 0.0) || !(far > near)) throw ConfigError("camera needs 0 < near < far");
    if (!world_to_camera.allFinite()) throw ConfigError("camera pose is not finite");
    const Mat3 r = rotation();
    if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-5 || r.determinant() < 0.0) {
        throw ConfigError("camera pose rotation is not orthonormal");
    }
    if ((world_to_camera.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12) {
        throw ConfigError("camera pose bottom row must be (0,0,0,1)");
    }
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height, double fov_y_deg) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
    right.normalize();
    const Vec3 down = forward.cross(right);

    Camera cam;
    cam.width = width;
    cam.height = height;
    const double f = 0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
    cam.fx = f;
    cam.fy = f;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.block<3, 3>(0, 0) = r;
    cam.world_to_camera.block<3, 1>(0, 3) = -r * eye;
    return cam;
}

Camera orbit_camera(const OrbitParams& orbit, int width, int height, double fov_y_deg) {
    const double az = orbit.azimuth_deg * std::numbers::pi / 180.0;
    const double el = orbit.elevation_deg * std::numbers::pi / 180.0;
    const Vec3 offset(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    return look_at(orbit.target + orbit.radius * offset, orbit.target, Vec3::UnitZ(), width, height, fov_y_deg);
}

}  // namespace clodgs
