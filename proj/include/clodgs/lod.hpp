#pragma once

#include "clodgs/camera.hpp"
#include "clodgs/splat_model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace clodgs {

inline constexpr double kDefaultTau = 1.0 / 255.0;
inline constexpr double kDefaultEpsilon = 1e-6;

/// Continuous detail level requested at render time.
struct LodQuery {
    double s_v = 1.0;                  // virtual distance scale, >= 1
    double tau = kDefaultTau;          // base opacity threshold, in (0,1)
    double epsilon = kDefaultEpsilon;  // keeps the attenuation exponent finite
    bool attenuate = true;             // false: alpha'' = alpha (plain splatting)

    /// Throws ConfigError when s_v < 1, tau outside (0,1) or epsilon <= 0.
    void validate() const;

    /// True when tau * s_v >= 1; no primitive can pass the mask.
    bool culls_everything() const { return tau * s_v >= 1.0; }
};

/// Per-view distances. Out-of-frustum primitives keep their raw distance but
/// have normalized = 0 and do not take part in the max.
struct DistanceField {
    std::vector<double> distance;
    std::vector<double> normalized;
    std::vector<std::uint8_t> in_frustum;
    std::size_t view_count = 0;
    double max_distance = 0.0;
    std::ptrdiff_t farthest = -1;  // index attaining max_distance, lowest index on ties
};

DistanceField compute_distances(const GaussianScene& scene, const Camera& cam);

/// Same as compute_distances with the in-frustum flags already known.
DistanceField compute_distances_from_visibility(const GaussianScene& scene, const Camera& cam,
                                                std::vector<std::uint8_t> in_frustum);

/// alpha * exp(-(d' s_v)^2 / (2 relu(sigma_d)^2 + eps)).
double attenuate_opacity(double alpha, double normalized_distance, double sigma_d, const LodQuery& q);

/// Value of the attenuated opacity with its partial derivatives.
struct AttenuationDerivatives {
    double value = 0.0;
    double d_alpha = 0.0;
    double d_distance = 0.0;  // w.r.t. the normalized distance
    double d_sigma = 0.0;     // zero for sigma_d <= 0
};

AttenuationDerivatives attenuate_opacity_derivatives(double alpha, double normalized_distance, double sigma_d,
                                                     const LodQuery& q);

/// Attenuated opacity of every primitive (zero outside the frustum). With
/// q.attenuate == false this is the base opacity.
std::vector<double> attenuated_opacities(const GaussianScene& scene, const DistanceField& field, const LodQuery& q);

struct MaskResult {
    std::vector<std::uint8_t> mask;
    std::size_t rendered = 0;
    std::size_t total = 0;
    double eta_actual = 0.0;  // rendered / total, total = whole scene
};

/// M_i = in_frustum_i && alpha''_i > tau * s_v.
MaskResult compute_mask(std::span<const double> attenuated, std::span<const std::uint8_t> in_frustum,
                        const LodQuery& q);

enum class SoftRatioDomain {
    Linear,  // logistic((alpha'' - tau s_v) / T)
    Log,     // logistic(ln(alpha'' / (tau s_v)) / T)
};

/// Differentiable stand-in for eta_actual:
///   sum over in-frustum i of logistic((alpha''_i - tau s_v) / T) / N_total.
/// (Linear domain; the Log domain compares ln alpha'' with ln(tau s_v)).
/// When `grad` is non-empty it receives d(ratio)/d(alpha''_i).
double soft_rendered_ratio(std::span<const double> attenuated, std::span<const std::uint8_t> in_frustum,
                           const LodQuery& q, double temperature, std::span<double> grad = {},
                           SoftRatioDomain domain = SoftRatioDomain::Linear);

/// Chains dL/d(alpha''_i) back to opacity_logit, sigma_d and (through the
/// distance and its per-view normalization) position.
void attenuation_backward(const GaussianScene& scene, const Camera& cam, const DistanceField& field,
                          const LodQuery& q, std::span<const double> d_attenuated, ParamGradients& grads);

}  // namespace clodgs
