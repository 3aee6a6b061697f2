#pragma once

#include "clodgs/math.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace clodgs {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;

/// Default distance decay for primitives that carry no trained value. With
/// d' <= 1 and s_v = 1 the attenuation factor stays above exp(-1/50).
inline constexpr double kDefaultSigmaD = 5.0;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One Gaussian splat. Only the first sh_coeff_count(scene.sh_degree) entries
/// of `sh` are meaningful; the rest stay zero.
///
/// The same layout doubles as a gradient container (see ParamGradients).
struct GaussianPrimitive {
    Vec3 position = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4(1, 0, 0, 0);  // (w, x, y, z)
    double opacity_logit = 0.0;
    std::array<Vec3, kMaxShCoeffs> sh{};  // sh[k] = RGB coefficient of basis k
    double sigma_d = kDefaultSigmaD;

    GaussianPrimitive() { sh.fill(Vec3::Zero()); }

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 scale() const { return log_scale.array().exp(); }

    bool operator==(const GaussianPrimitive& o) const;
};

/// Zero-initialized primitive used to accumulate gradients.
GaussianPrimitive zero_primitive();

struct GaussianScene {
    std::vector<GaussianPrimitive> primitives;
    int sh_degree = 0;
    Vec3 background = Vec3::Zero();

    std::size_t size() const { return primitives.size(); }
    int coeff_count() const { return sh_coeff_count(sh_degree); }

    /// Throws ConfigError on any broken invariant (empty, bad degree,
    /// non-finite values, background outside [0,1]).
    void validate() const;

    /// Axis-aligned bounds of the primitive centers.
    std::pair<Vec3, Vec3> bounds() const;
    Vec3 centroid() const;

    bool operator==(const GaussianScene& o) const;
};

using ParamGradients = std::vector<GaussianPrimitive>;

/// Parameter classes with separate learning rates.
enum class ParamClass : int { Position, LogScale, Rotation, Opacity, ShDc, ShRest, SigmaD };
inline constexpr int kParamClassCount = 7;

/// Flat view of one parameter class inside a primitive.
std::span<double> param_block(GaussianPrimitive& p, ParamClass c, int coeff_count);
std::span<const double> param_block(const GaussianPrimitive& p, ParamClass c, int coeff_count);

const char* param_class_name(ParamClass c);

/// Rounds every parameter to float32, matching what a PLY round trip keeps.
GaussianScene quantize_float32(GaussianScene scene);

// ---------------------------------------------------------------------------
// Synthetic data

enum class SynthLayout { UniformBox, TexturedPlane, ClusterMix };

SynthLayout parse_layout(const std::string& name);
std::string layout_name(SynthLayout layout);

struct SynthSpec {
    std::size_t count = 2000;
    std::uint64_t seed = 1;
    SynthLayout layout = SynthLayout::TexturedPlane;
    int sh_degree = 1;
};

/// Deterministic scene for desk-scale experiments. Centers lie in [-1,1]^3,
/// opacities in [0.3, 0.95], sigma_d = kDefaultSigmaD.
GaussianScene generate_synthetic_scene(const SynthSpec& spec);

/// Corrupts a scene into a training initialization: jittered centers and
/// scales, colors pulled toward gray, view-dependent terms cleared, uniform
/// opacity.
struct PerturbSpec {
    double position_jitter = 0.02;    // world units, std-dev
    double log_scale_jitter = 0.3;
    double color_keep = 0.0;          // 0 = flat gray, 1 = keep colors
    double opacity = 0.5;
    std::uint64_t seed = 11;
};

GaussianScene perturb_scene(const GaussianScene& scene, const PerturbSpec& spec);

}  // namespace clodgs
