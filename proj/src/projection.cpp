#include "clodgs/projection.hpp"

#include "clodgs/sh.hpp"

#include <algorithm>
#include <cmath>

namespace clodgs {

namespace {

Mat3 world_covariance(const GaussianPrimitive& p, const Mat3& r) {
    const Mat3 m = r * p.scale().asDiagonal();
    return m * m.transpose();
}

Mat23 projection_jacobian(const Vec3& t, const Camera& cam) {
    Mat23 j;
    const double iz = 1.0 / t.z();
    j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz,
        0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    return j;
}

}  // namespace

Mat2 projected_covariance(const GaussianPrimitive& p, const Camera& cam) {
    const Vec3 t = cam.to_camera(p.position);
    const Mat23 tm = projection_jacobian(t, cam) * cam.rotation();
    const Mat3 sigma = world_covariance(p, quat_to_rotation(p.rotation.normalized()));
    return tm * sigma * tm.transpose();
}

std::optional<ProjectedSplat> project_gaussian(const GaussianPrimitive& p, const Camera& cam, int sh_degree) {
    const Vec3 t = cam.to_camera(p.position);
    if (!(t.z() > cam.near) || !(t.z() < cam.far)) return std::nullopt;

    ProjectedSplat s;
    s.depth = t.z();
    s.mean2d = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
    s.cov2d = projected_covariance(p, cam) + kLowPassFloor * Mat2::Identity();
    const double det = s.cov2d.determinant();
    if (!(det > 0.0)) return std::nullopt;
    s.conic = Vec3(s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, s.cov2d(0, 0) / det);
    s.half_extent = Vec2(kFootprintSigmas * std::sqrt(s.cov2d(0, 0)), kFootprintSigmas * std::sqrt(s.cov2d(1, 1)));

    const double fx0 = std::ceil(s.mean2d.x() - s.half_extent.x() - 0.5);
    const double fx1 = std::floor(s.mean2d.x() + s.half_extent.x() - 0.5) + 1.0;
    const double fy0 = std::ceil(s.mean2d.y() - s.half_extent.y() - 0.5);
    const double fy1 = std::floor(s.mean2d.y() + s.half_extent.y() - 0.5) + 1.0;
    s.x0 = static_cast<int>(std::clamp(fx0, 0.0, static_cast<double>(cam.width)));
    s.x1 = static_cast<int>(std::clamp(fx1, 0.0, static_cast<double>(cam.width)));
    s.y0 = static_cast<int>(std::clamp(fy0, 0.0, static_cast<double>(cam.height)));
    s.y1 = static_cast<int>(std::clamp(fy1, 0.0, static_cast<double>(cam.height)));
    if (s.x0 >= s.x1 || s.y0 >= s.y1) return std::nullopt;

    const Vec3 dir = (p.position - cam.center()).normalized();
    s.color = evaluate_sh_raw(std::span<const Vec3>(p.sh.data(), p.sh.size()), dir, sh_degree)
                  .cwiseMax(0.0)
                  .cwiseMin(1.0);
    s.alpha_eff = p.opacity();
    return s;
}

void project_backward(const GaussianPrimitive& p, const Camera& cam, int sh_degree, const SplatGrad& g,
                      GaussianPrimitive& out) {
    const Mat3 w = cam.rotation();
    const Vec3 t = cam.to_camera(p.position);
    const Mat23 j = projection_jacobian(t, cam);
    const Mat23 tm = j * w;
    const double qnorm = p.rotation.norm();
    const Vec4 q = p.rotation / qnorm;
    const Mat3 r = quat_to_rotation(q);
    const Vec3 s = p.scale();
    const Mat3 m = r * s.asDiagonal();
    const Mat3 sigma = m * m.transpose();
    const Mat2 cov = tm * sigma * tm.transpose() + kLowPassFloor * Mat2::Identity();

    // conic (a, b, c) -> cov2d. The off-diagonal conic entry b appears twice
    // in the symmetric inverse.
    const Mat2 k = cov.inverse();
    Mat2 dk;
    dk << g.conic[0], 0.5 * g.conic[1], 0.5 * g.conic[1], g.conic[2];
    const Mat2 dcov = -k * dk * k;

    const Mat3 dsigma = tm.transpose() * dcov * tm;
    const Mat23 dtm = 2.0 * dcov * tm * sigma;
    const Mat23 dj = dtm * w.transpose();

    // mean2d and J both depend on the camera-space center t.
    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    Vec3 dt = Vec3::Zero();
    dt.x() += g.mean2d.x() * cam.fx * iz;
    dt.y() += g.mean2d.y() * cam.fy * iz;
    dt.z() += -g.mean2d.x() * cam.fx * t.x() * iz2 - g.mean2d.y() * cam.fy * t.y() * iz2;
    dt.z() += -dj(0, 0) * cam.fx * iz2 - dj(1, 1) * cam.fy * iz2;
    dt.x() += -dj(0, 2) * cam.fx * iz2;
    dt.y() += -dj(1, 2) * cam.fy * iz2;
    dt.z() += 2.0 * dj(0, 2) * cam.fx * t.x() * iz2 * iz + 2.0 * dj(1, 2) * cam.fy * t.y() * iz2 * iz;
    out.position += w.transpose() * dt;

    // Sigma = M M^T with M = R diag(s).
    const Mat3 dm = 2.0 * dsigma * m;
    for (int c = 0; c < 3; ++c) {
        const double ds = dm.col(c).dot(r.col(c));
        out.log_scale[c] += ds * s[c];
    }
    const Mat3 dr = dm * s.asDiagonal();
    const Vec4 dq = rotation_grad_to_quat(q, dr);
    out.rotation += (dq - q * q.dot(dq)) / qnorm;

    // SH color with per-channel clamp to [0, 1].
    const Vec3 view = p.position - cam.center();
    const double dist = view.norm();
    const Vec3 dir = view / dist;
    std::array<Vec3, 16> dbasis;
    const ShBasis basis = sh_basis_with_grad(dir, sh_degree, dbasis);
    const int coeffs = sh_coeff_count(sh_degree);
    Vec3 raw = Vec3::Constant(0.5);
    for (int i = 0; i < coeffs; ++i) raw += basis[i] * p.sh[i];
    Vec3 dcolor = g.color;
    for (int ch = 0; ch < 3; ++ch) {
        if (raw[ch] < 0.0 || raw[ch] > 1.0) dcolor[ch] = 0.0;
    }
    Vec3 ddir = Vec3::Zero();
    for (int i = 0; i < coeffs; ++i) {
        out.sh[i] += basis[i] * dcolor;
        ddir += dbasis[i] * p.sh[i].dot(dcolor);
    }
    out.position += (ddir - dir * dir.dot(ddir)) / dist;
}

}  // namespace clodgs
