#pragma once

#include "clodgs/camera.hpp"
#include "clodgs/splat_model.hpp"

#include <optional>

namespace clodgs {

/// Added to the diagonal of every screen-space covariance (pixel^2).
inline constexpr double kLowPassFloor = 0.3;

/// Splat footprint extent in standard deviations.
inline constexpr double kFootprintSigmas = 3.0;

struct ProjectedSplat {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();   // includes the low-pass floor
    Vec3 conic = Vec3::Zero();       // inverse cov2d as (a, b, c)
    Vec2 half_extent = Vec2::Zero(); // 3-sigma bounding box half size, pixels
    double depth = 0.0;              // camera-space z
    Vec3 color = Vec3::Zero();       // clamped SH color
    double alpha_eff = 0.0;          // attenuated base opacity
    std::size_t source_index = 0;

    /// Pixel bounds [x0, x1) x [y0, y1) of the 3-sigma box clipped to the image.
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Screen-space covariance of a primitive before the low-pass floor.
Mat2 projected_covariance(const GaussianPrimitive& p, const Camera& cam);

/// Perspective projection of one primitive. Returns nullopt when the center
/// is outside (near, far) or the 3-sigma box misses the image. Color is
/// evaluated with `sh_degree`; alpha_eff is set to the base opacity.
std::optional<ProjectedSplat> project_gaussian(const GaussianPrimitive& p, const Camera& cam, int sh_degree);

/// Gradients of the screen-space quantities of one splat.
struct SplatGrad {
    Vec2 mean2d = Vec2::Zero();
    Vec3 conic = Vec3::Zero();  // d/d(a, b, c)
    Vec3 color = Vec3::Zero();
    double alpha_eff = 0.0;
};

/// Chains screen-space gradients back to position, log_scale, rotation and SH
/// coefficients, accumulating into `out`. Opacity and sigma_d are handled by
/// the attenuation backward.
void project_backward(const GaussianPrimitive& p, const Camera& cam, int sh_degree, const SplatGrad& g,
                      GaussianPrimitive& out);

}  // namespace clodgs
