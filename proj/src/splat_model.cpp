#include "clodgs/splat_model.hpp"

#include "clodgs/error.hpp"
#include "clodgs/random.hpp"
#include "clodgs/sh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace clodgs {

bool GaussianPrimitive::operator==(const GaussianPrimitive& o) const {
    return position == o.position && log_scale == o.log_scale && rotation == o.rotation &&
           opacity_logit == o.opacity_logit && sh == o.sh && sigma_d == o.sigma_d;
}

GaussianPrimitive zero_primitive() {
    GaussianPrimitive p;
    p.rotation.setZero();
    p.sigma_d = 0.0;
    return p;
}

namespace {

bool finite(const GaussianPrimitive& p, int coeffs) {
    if (!p.position.allFinite() || !p.log_scale.allFinite() || !p.rotation.allFinite()) return false;
    if (!std::isfinite(p.opacity_logit) || !std::isfinite(p.sigma_d)) return false;
    for (int k = 0; k < coeffs; ++k) {
        if (!p.sh[k].allFinite()) return false;
    }
    return true;
}

}  // namespace

void GaussianScene::validate() const {
    if (primitives.empty()) throw ConfigError("scene has no primitives");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) {
        throw ConfigError("sh_degree " + std::to_string(sh_degree) + " outside 0..3");
    }
    if (!background.allFinite() || background.minCoeff() < 0.0 || background.maxCoeff() > 1.0) {
        throw ConfigError("background outside [0,1]");
    }
    const int coeffs = coeff_count();
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        if (!finite(primitives[i], coeffs)) {
            throw ConfigError("primitive " + std::to_string(i) + " has a non-finite parameter");
        }
        if (primitives[i].rotation.norm() == 0.0) {
            throw ConfigError("primitive " + std::to_string(i) + " has a zero quaternion");
        }
    }
}

std::pair<Vec3, Vec3> GaussianScene::bounds() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& p : primitives) {
        lo = lo.cwiseMin(p.position);
        hi = hi.cwiseMax(p.position);
    }
    return {lo, hi};
}

Vec3 GaussianScene::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : primitives) c += p.position;
    return primitives.empty() ? c : Vec3(c / static_cast<double>(primitives.size()));
}

bool GaussianScene::operator==(const GaussianScene& o) const {
    return sh_degree == o.sh_degree && background == o.background && primitives == o.primitives;
}

std::span<double> param_block(GaussianPrimitive& p, ParamClass c, int coeff_count) {
    switch (c) {
        case ParamClass::Position: return {p.position.data(), 3};
        case ParamClass::LogScale: return {p.log_scale.data(), 3};
        case ParamClass::Rotation: return {p.rotation.data(), 4};
        case ParamClass::Opacity: return {&p.opacity_logit, 1};
        case ParamClass::ShDc: return {p.sh[0].data(), 3};
        case ParamClass::ShRest:
            return {p.sh[1].data(), static_cast<std::size_t>(3 * (coeff_count - 1))};
        case ParamClass::SigmaD: return {&p.sigma_d, 1};
    }
    return {};
}

std::span<const double> param_block(const GaussianPrimitive& p, ParamClass c, int coeff_count) {
    auto block = param_block(const_cast<GaussianPrimitive&>(p), c, coeff_count);
    return {block.data(), block.size()};
}

const char* param_class_name(ParamClass c) {
    switch (c) {
        case ParamClass::Position: return "position";
        case ParamClass::LogScale: return "log_scale";
        case ParamClass::Rotation: return "rotation";
        case ParamClass::Opacity: return "opacity_logit";
        case ParamClass::ShDc: return "sh_dc";
        case ParamClass::ShRest: return "sh_rest";
        case ParamClass::SigmaD: return "sigma_d";
    }
    return "?";
}

GaussianScene quantize_float32(GaussianScene scene) {
    auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    scene.background = scene.background.unaryExpr(q);
    for (auto& p : scene.primitives) {
        for (int c = 0; c < kParamClassCount; ++c) {
            for (double& v : param_block(p, static_cast<ParamClass>(c), kMaxShCoeffs)) v = q(v);
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------

SynthLayout parse_layout(const std::string& name) {
    if (name == "uniform-box") return SynthLayout::UniformBox;
    if (name == "textured-plane") return SynthLayout::TexturedPlane;
    if (name == "cluster-mix") return SynthLayout::ClusterMix;
    throw ConfigError("unknown layout '" + name + "' (expected uniform-box, textured-plane, cluster-mix)");
}

std::string layout_name(SynthLayout layout) {
    switch (layout) {
        case SynthLayout::UniformBox: return "uniform-box";
        case SynthLayout::TexturedPlane: return "textured-plane";
        case SynthLayout::ClusterMix: return "cluster-mix";
    }
    return "?";
}

namespace {

const std::array<Vec3, 8> kPalette = {
    Vec3(0.85, 0.20, 0.15), Vec3(0.95, 0.75, 0.20), Vec3(0.20, 0.55, 0.25), Vec3(0.15, 0.35, 0.80),
    Vec3(0.90, 0.90, 0.85), Vec3(0.10, 0.10, 0.12), Vec3(0.60, 0.30, 0.70), Vec3(0.30, 0.75, 0.80),
};

Vec4 random_quaternion(Rng& rng) {
    Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return q / q.norm();
}

Vec4 z_rotation(double angle) {
    return Vec4(std::cos(angle / 2), 0.0, 0.0, std::sin(angle / 2));
}

void set_color(GaussianPrimitive& p, const Vec3& rgb, int coeffs, Rng& rng) {
    p.sh[0] = (rgb.array() - 0.5) / kShC0;
    for (int k = 1; k < coeffs; ++k) {
        p.sh[k] = Vec3(rng.normal(0, 0.04), rng.normal(0, 0.04), rng.normal(0, 0.04));
    }
}

// Two-level texture on the plane: a 4x4 checker of palette colors modulated
// by a finer stripe pattern and a smooth gradient.
Vec3 plane_texture(double x, double y) {
    const int cx = std::clamp(static_cast<int>((x + 1.0) * 2.0), 0, 3);
    const int cy = std::clamp(static_cast<int>((y + 1.0) * 2.0), 0, 3);
    Vec3 base = kPalette[(cx + 3 * cy) % kPalette.size()];
    const double stripe = 0.5 + 0.5 * std::sin(9.0 * std::numbers::pi * (x + 0.5 * y));
    const double shade = 0.75 + 0.25 * stripe;
    Vec3 grad(0.5 + 0.25 * x, 0.5, 0.5 + 0.25 * y);
    return (0.8 * shade * base + 0.2 * grad).cwiseMax(0.02).cwiseMin(0.98);
}

}  // namespace

GaussianScene generate_synthetic_scene(const SynthSpec& spec) {
    if (spec.count == 0) throw ConfigError("synthetic scene needs count >= 1");
    if (spec.sh_degree < 0 || spec.sh_degree > kMaxShDegree) throw ConfigError("sh_degree outside 0..3");
    Rng rng(spec.seed);
    GaussianScene scene;
    scene.sh_degree = spec.sh_degree;
    scene.background = Vec3::Zero();
    const int coeffs = scene.coeff_count();
    const std::size_t n = spec.count;
    scene.primitives.resize(n);

    switch (spec.layout) {
        case SynthLayout::TexturedPlane: {
            // Stratified jittered grid so the plane is covered without holes;
            // a share of the primitives is coarse and carries the local mean.
            const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
            const double spacing = 2.0 / static_cast<double>(side);
            for (std::size_t i = 0; i < n; ++i) {
                auto& p = scene.primitives[i];
                const std::size_t gx = i % side, gy = (i / side) % side;
                const double x = -1.0 + spacing * (static_cast<double>(gx) + rng.uniform());
                const double y = -1.0 + spacing * (static_cast<double>(gy) + rng.uniform());
                const bool coarse = rng.uniform() < 0.15;
                p.position = Vec3(x, y, rng.normal(0.0, 0.01));
                const double s = spacing * (coarse ? rng.uniform(1.5, 2.5) : rng.uniform(0.45, 0.9));
                p.log_scale = Vec3(std::log(s * rng.uniform(0.7, 1.3)), std::log(s * rng.uniform(0.7, 1.3)),
                                   std::log(0.1 * s));
                p.rotation = z_rotation(rng.uniform(0.0, std::numbers::pi));
                p.opacity_logit = logit(rng.uniform(0.3, 0.95));
                Vec3 color = plane_texture(x, y);
                if (coarse) color = 0.5 * color + 0.5 * plane_texture(std::round(x * 2) / 2, std::round(y * 2) / 2);
                set_color(p, color, coeffs, rng);
            }
            break;
        }
        case SynthLayout::UniformBox: {
            const double spacing = 1.6 / std::cbrt(static_cast<double>(n));
            for (auto& p : scene.primitives) {
                p.position = Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
                const double s = spacing * rng.uniform(0.3, 0.8);
                p.log_scale = Vec3(std::log(s * rng.uniform(0.5, 1.5)), std::log(s * rng.uniform(0.5, 1.5)),
                                   std::log(s * rng.uniform(0.5, 1.5)));
                p.rotation = random_quaternion(rng);
                p.opacity_logit = logit(rng.uniform(0.3, 0.95));
                set_color(p, kPalette[rng.next() % kPalette.size()], coeffs, rng);
            }
            break;
        }
        case SynthLayout::ClusterMix: {
            constexpr int kClusters = 8;
            std::array<Vec3, kClusters> centers;
            std::array<double, kClusters> radii;
            for (int c = 0; c < kClusters; ++c) {
                centers[c] = Vec3(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(-0.3, 0.3));
                radii[c] = rng.uniform(0.1, 0.3);
            }
            const double spacing = 1.6 / std::cbrt(static_cast<double>(n));
            for (auto& p : scene.primitives) {
                const bool scattered = rng.uniform() < 0.2;
                const int c = static_cast<int>(rng.next() % kClusters);
                if (scattered) {
                    p.position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5));
                } else {
                    p.position = centers[c] + radii[c] * Vec3(rng.normal(), rng.normal(), rng.normal());
                    p.position = p.position.cwiseMax(-1.0).cwiseMin(1.0);
                }
                const double s = spacing * (scattered ? rng.uniform(0.6, 1.4) : rng.uniform(0.15, 0.5));
                p.log_scale = Vec3(std::log(s * rng.uniform(0.6, 1.4)), std::log(s * rng.uniform(0.6, 1.4)),
                                   std::log(s * rng.uniform(0.6, 1.4)));
                p.rotation = random_quaternion(rng);
                p.opacity_logit = logit(rng.uniform(0.3, 0.95));
                Vec3 color = kPalette[c];
                color += Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
                set_color(p, color.cwiseMax(0.02).cwiseMin(0.98), coeffs, rng);
            }
            break;
        }
    }
    for (auto& p : scene.primitives) p.sigma_d = kDefaultSigmaD;
    return scene;
}

GaussianScene perturb_scene(const GaussianScene& scene, const PerturbSpec& spec) {
    if (spec.opacity <= 0.0 || spec.opacity >= 1.0) throw ConfigError("perturb opacity outside (0,1)");
    Rng rng(spec.seed);
    GaussianScene out = scene;
    const Vec3 gray_dc = Vec3::Zero();  // 0.5 after the SH offset
    for (auto& p : out.primitives) {
        p.position += Vec3(rng.normal(0, spec.position_jitter), rng.normal(0, spec.position_jitter),
                           rng.normal(0, spec.position_jitter));
        p.log_scale += Vec3(rng.normal(0, spec.log_scale_jitter), rng.normal(0, spec.log_scale_jitter),
                            rng.normal(0, spec.log_scale_jitter));
        p.opacity_logit = logit(spec.opacity);
        p.sh[0] = spec.color_keep * p.sh[0] + (1.0 - spec.color_keep) * gray_dc;
        for (int k = 1; k < kMaxShCoeffs; ++k) p.sh[k].setZero();
        p.sigma_d = kDefaultSigmaD;
    }
    return out;
}

}  // namespace clodgs
