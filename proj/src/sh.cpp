#include "clodgs/sh.hpp"

#include "clodgs/error.hpp"
#include "clodgs/splat_model.hpp"

#include <cmath>
#include <string>

namespace clodgs {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

}  // namespace

ShBasis sh_basis_with_grad(const Vec3& dir, int degree, std::array<Vec3, 16>& d) {
    ShBasis y{};
    d.fill(Vec3::Zero());
    y[0] = kShC0;
    if (degree < 1) return y;
    // v is the y component; `y` already names the basis values.
    const double x = dir.x(), v = dir.y(), z = dir.z();
    y[1] = -kC1 * v;
    y[2] = kC1 * z;
    y[3] = -kC1 * x;
    d[1] = Vec3(0, -kC1, 0);
    d[2] = Vec3(0, 0, kC1);
    d[3] = Vec3(-kC1, 0, 0);
    if (degree < 2) return y;
    const double xx = x * x, vv = v * v, zz = z * z;
    y[4] = kC2[0] * x * v;
    y[5] = kC2[1] * v * z;
    y[6] = kC2[2] * (2 * zz - xx - vv);
    y[7] = kC2[3] * x * z;
    y[8] = kC2[4] * (xx - vv);
    d[4] = kC2[0] * Vec3(v, x, 0);
    d[5] = kC2[1] * Vec3(0, z, v);
    d[6] = kC2[2] * Vec3(-2 * x, -2 * v, 4 * z);
    d[7] = kC2[3] * Vec3(z, 0, x);
    d[8] = kC2[4] * Vec3(2 * x, -2 * v, 0);
    if (degree < 3) return y;
    y[9] = kC3[0] * v * (3 * xx - vv);
    y[10] = kC3[1] * x * v * z;
    y[11] = kC3[2] * v * (4 * zz - xx - vv);
    y[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * vv);
    y[13] = kC3[4] * x * (4 * zz - xx - vv);
    y[14] = kC3[5] * z * (xx - vv);
    y[15] = kC3[6] * x * (xx - 3 * vv);
    d[9] = kC3[0] * Vec3(6 * x * v, 3 * xx - 3 * vv, 0);
    d[10] = kC3[1] * Vec3(v * z, x * z, x * v);
    d[11] = kC3[2] * Vec3(-2 * x * v, 4 * zz - xx - 3 * vv, 8 * v * z);
    d[12] = kC3[3] * Vec3(-6 * x * z, -6 * v * z, 6 * zz - 3 * xx - 3 * vv);
    d[13] = kC3[4] * Vec3(4 * zz - 3 * xx - vv, -2 * x * v, 8 * x * z);
    d[14] = kC3[5] * Vec3(2 * x * z, -2 * v * z, xx - vv);
    d[15] = kC3[6] * Vec3(3 * xx - 3 * vv, -6 * x * v, 0);
    return y;
}

ShBasis sh_basis(const Vec3& dir, int degree) {
    std::array<Vec3, 16> unused;
    return sh_basis_with_grad(dir, degree, unused);
}

Vec3 evaluate_sh_raw(std::span<const Vec3> coeffs, const Vec3& dir, int degree) {
    const ShBasis y = sh_basis(dir, degree);
    Vec3 c = Vec3::Constant(0.5);
    const int n = sh_coeff_count(degree);
    for (int k = 0; k < n; ++k) c += y[k] * coeffs[k];
    return c;
}

Vec3 evaluate_sh(std::span<const Vec3> coeffs, const Vec3& dir, int degree) {
    if (degree < 0 || degree > kMaxShDegree ||
        static_cast<std::size_t>(sh_coeff_count(degree)) > coeffs.size()) {
        throw ConfigError("SH degree " + std::to_string(degree) + " exceeds the available coefficients");
    }
    if (std::abs(dir.norm() - 1.0) > 1e-6) throw ConfigError("SH view direction is not unit length");
    return evaluate_sh_raw(coeffs, dir, degree).cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace clodgs
