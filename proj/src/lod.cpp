#include "clodgs/lod.hpp"

#include "clodgs/error.hpp"
#include "clodgs/projection.hpp"

#include <cmath>

namespace clodgs {

void LodQuery::validate() const {
    if (!(s_v >= 1.0) || !std::isfinite(s_v)) throw ConfigError("s_v must be a finite value >= 1");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

namespace {

DistanceField normalize(const GaussianScene& scene, const Camera& cam, std::vector<std::uint8_t> in_frustum) {
    DistanceField f;
    const std::size_t n = scene.size();
    f.distance.resize(n);
    f.normalized.assign(n, 0.0);
    f.in_frustum = std::move(in_frustum);
    const Vec3 c = cam.center();
    for (std::size_t i = 0; i < n; ++i) {
        f.distance[i] = (scene.primitives[i].position - c).norm();
        if (!f.in_frustum[i]) continue;
        ++f.view_count;
        if (f.distance[i] > f.max_distance || f.farthest < 0) {
            f.max_distance = f.distance[i];
            f.farthest = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (f.view_count == 0 || !(f.max_distance > 0.0)) return f;
    for (std::size_t i = 0; i < n; ++i) {
        if (f.in_frustum[i]) f.normalized[i] = f.distance[i] / f.max_distance;
    }
    f.normalized[static_cast<std::size_t>(f.farthest)] = 1.0;
    return f;
}

}  // namespace

DistanceField compute_distances(const GaussianScene& scene, const Camera& cam) {
    std::vector<std::uint8_t> visible(scene.size(), 0);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        visible[i] = project_gaussian(scene.primitives[i], cam, 0).has_value() ? 1 : 0;
    }
    return normalize(scene, cam, std::move(visible));
}

DistanceField compute_distances_from_visibility(const GaussianScene& scene, const Camera& cam,
                                                std::vector<std::uint8_t> in_frustum) {
    return normalize(scene, cam, std::move(in_frustum));
}

double attenuate_opacity(double alpha, double normalized_distance, double sigma_d, const LodQuery& q) {
    const double x = normalized_distance * q.s_v;
    const double r = relu(sigma_d);
    return alpha * std::exp(-(x * x) / (2.0 * r * r + q.epsilon));
}

AttenuationDerivatives attenuate_opacity_derivatives(double alpha, double normalized_distance, double sigma_d,
                                                     const LodQuery& q) {
    const double x = normalized_distance * q.s_v;
    const double r = relu(sigma_d);
    const double denom = 2.0 * r * r + q.epsilon;
    const double falloff = std::exp(-(x * x) / denom);
    AttenuationDerivatives d;
    d.value = alpha * falloff;
    d.d_alpha = falloff;
    d.d_distance = d.value * (-2.0 * x * q.s_v / denom);
    d.d_sigma = sigma_d > 0.0 ? d.value * (x * x) / (denom * denom) * 4.0 * r : 0.0;
    return d;
}

std::vector<double> attenuated_opacities(const GaussianScene& scene, const DistanceField& field, const LodQuery& q) {
    std::vector<double> out(scene.size(), 0.0);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (!field.in_frustum[i]) continue;
        const auto& p = scene.primitives[i];
        out[i] = q.attenuate ? attenuate_opacity(p.opacity(), field.normalized[i], p.sigma_d, q) : p.opacity();
    }
    return out;
}

MaskResult compute_mask(std::span<const double> attenuated, std::span<const std::uint8_t> in_frustum,
                        const LodQuery& q) {
    MaskResult r;
    r.total = attenuated.size();
    r.mask.assign(attenuated.size(), 0);
    const double threshold = q.tau * q.s_v;
    for (std::size_t i = 0; i < attenuated.size(); ++i) {
        if (in_frustum[i] && attenuated[i] > threshold) {
            r.mask[i] = 1;
            ++r.rendered;
        }
    }
    r.eta_actual = r.total == 0 ? 0.0 : static_cast<double>(r.rendered) / static_cast<double>(r.total);
    return r;
}

double soft_rendered_ratio(std::span<const double> attenuated, std::span<const std::uint8_t> in_frustum,
                           const LodQuery& q, double temperature, std::span<double> grad, SoftRatioDomain domain) {
    if (!(temperature > 0.0)) throw ConfigError("soft ratio temperature must be positive");
    const std::size_t n = attenuated.size();
    if (n == 0) return 0.0;
    const double threshold = q.tau * q.s_v;
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!grad.empty()) grad[i] = 0.0;
        if (!in_frustum[i]) continue;
        const double a = attenuated[i];
        if (domain == SoftRatioDomain::Log) {
            if (!(a > 0.0)) continue;
            const double s = sigmoid(std::log(a / threshold) / temperature);
            sum += s;
            if (!grad.empty()) grad[i] = s * (1.0 - s) / (temperature * a) * inv_n;
        } else {
            const double s = sigmoid((a - threshold) / temperature);
            sum += s;
            if (!grad.empty()) grad[i] = s * (1.0 - s) / temperature * inv_n;
        }
    }
    return sum * inv_n;
}

void attenuation_backward(const GaussianScene& scene, const Camera& cam, const DistanceField& field,
                          const LodQuery& q, std::span<const double> d_attenuated, ParamGradients& grads) {
    const Vec3 c = cam.center();
    double d_max = 0.0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const double g = d_attenuated[i];
        if (g == 0.0 || !field.in_frustum[i]) continue;
        const auto& p = scene.primitives[i];
        const double alpha = p.opacity();
        if (!q.attenuate) {
            grads[i].opacity_logit += g * alpha * (1.0 - alpha);
            continue;
        }
        const auto d = attenuate_opacity_derivatives(alpha, field.normalized[i], p.sigma_d, q);
        grads[i].opacity_logit += g * d.d_alpha * alpha * (1.0 - alpha);
        grads[i].sigma_d += g * d.d_sigma;
        // d'_i = d_i / d_max, both depending on positions.
        const double g_norm = g * d.d_distance;
        const double dist = field.distance[i];
        if (dist > 0.0) {
            grads[i].position += (g_norm / field.max_distance) * (p.position - c) / dist;
        }
        d_max -= g_norm * dist / (field.max_distance * field.max_distance);
    }
    if (d_max != 0.0 && field.farthest >= 0) {
        const auto k = static_cast<std::size_t>(field.farthest);
        const Vec3 v = scene.primitives[k].position - c;
        grads[k].position += d_max * v / v.norm();
    }
}

}  // namespace clodgs
