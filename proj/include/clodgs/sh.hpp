#pragma once

#include "clodgs/math.hpp"

#include <array>
#include <span>

namespace clodgs {

inline constexpr double kShC0 = 0.28209479177387814;

using ShBasis = std::array<double, 16>;

/// Real spherical-harmonic basis values up to `degree` for a unit direction.
/// Entries past (degree+1)^2 are zero.
ShBasis sh_basis(const Vec3& dir, int degree);

/// Basis values and their partial derivatives with respect to the (unnormalized)
/// components of `dir`, evaluated at the given unit direction.
ShBasis sh_basis_with_grad(const Vec3& dir, int degree, std::array<Vec3, 16>& dbasis);

/// Color before the [0,1] clamp: 0.5 + sum_k coeffs[k] * Y_k(dir).
Vec3 evaluate_sh_raw(std::span<const Vec3> coeffs, const Vec3& dir, int degree);

/// View-dependent RGB: raw SH color clamped to [0,1]. Throws ConfigError when
/// `degree` needs more coefficients than supplied or dir is not unit length.
Vec3 evaluate_sh(std::span<const Vec3> coeffs, const Vec3& dir, int degree);

}  // namespace clodgs
