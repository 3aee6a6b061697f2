#include "clodgs/rasterizer.hpp"

#include "clodgs/error.hpp"
#include "clodgs/sh.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clodgs {

namespace {

constexpr double kSupportPower = -0.5 * kFootprintSigmas * kFootprintSigmas;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h * 0xff51afd7ed558ccdULL;
}

void check_finite(const GaussianScene& scene) {
    const int coeffs = scene.coeff_count();
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto& p = scene.primitives[i];
        bool ok = p.position.allFinite() && p.log_scale.allFinite() && p.rotation.allFinite() &&
                  std::isfinite(p.opacity_logit) && std::isfinite(p.sigma_d) && p.rotation.norm() > 0.0;
        for (int k = 0; ok && k < coeffs; ++k) ok = p.sh[k].allFinite();
        if (!ok) throw RenderError("primitive " + std::to_string(i) + " has a non-finite parameter");
    }
}

std::vector<std::uint8_t> top_k_mask(const std::vector<double>& attenuated, const std::vector<std::uint8_t>& in_frustum,
                                     std::size_t k) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < attenuated.size(); ++i) {
        if (in_frustum[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return attenuated[a] > attenuated[b]; });
    std::vector<std::uint8_t> mask(attenuated.size(), 0);
    for (std::size_t j = 0; j < std::min(k, order.size()); ++j) mask[order[j]] = 1;
    return mask;
}

double pixel_power(const ProjectedSplat& s, double px, double py) {
    const double dx = px - s.mean2d.x();
    const double dy = py - s.mean2d.y();
    return -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
}

}  // namespace

RenderArtifacts render(const GaussianScene& scene, const Camera& cam, const LodQuery& lod,
                       const RenderOptions& options) {
    lod.validate();
    cam.validate();
    if (scene.sh_degree < 0 || scene.sh_degree > kMaxShDegree) throw RenderError("invalid sh_degree");
    check_finite(scene);

    RenderArtifacts a;
    a.lod = lod;
    const std::size_t n = scene.size();
    a.total = n;

    std::vector<std::optional<ProjectedSplat>> projected(n);
    std::vector<std::uint8_t> in_frustum(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        projected[i] = project_gaussian(scene.primitives[i], cam, scene.sh_degree);
        in_frustum[i] = projected[i].has_value() ? 1 : 0;
    }
    a.distances = compute_distances_from_visibility(scene, cam, std::move(in_frustum));
    a.attenuated = attenuated_opacities(scene, a.distances, lod);
    if (options.top_k) {
        a.mask = top_k_mask(a.attenuated, a.distances.in_frustum, *options.top_k);
        a.rendered_count = static_cast<std::size_t>(std::count(a.mask.begin(), a.mask.end(), 1));
        a.eta_actual = n == 0 ? 0.0 : static_cast<double>(a.rendered_count) / static_cast<double>(n);
    } else {
        auto m = compute_mask(a.attenuated, a.distances.in_frustum, lod);
        a.mask = std::move(m.mask);
        a.rendered_count = m.rendered;
        a.eta_actual = m.eta_actual;
    }

    std::uint64_t fp = mix(0, a.rendered_count);
    fp = mix(fp, static_cast<std::uint64_t>(a.distances.farthest + 1));
    for (std::size_t i = 0; i < n; ++i) {
        if (!a.mask[i]) continue;
        ProjectedSplat s = *projected[i];
        s.alpha_eff = a.attenuated[i];
        s.source_index = i;
        a.splats.push_back(s);
        fp = mix(fp, i);
    }
    std::sort(a.splats.begin(), a.splats.end(), [](const ProjectedSplat& l, const ProjectedSplat& r) {
        return l.depth != r.depth ? l.depth < r.depth : l.source_index < r.source_index;
    });

    a.tiles_x = (cam.width + kTileSize - 1) / kTileSize;
    a.tiles_y = (cam.height + kTileSize - 1) / kTileSize;
    a.tile_lists.assign(static_cast<std::size_t>(a.tiles_x) * a.tiles_y, {});
    for (std::uint32_t k = 0; k < a.splats.size(); ++k) {
        const auto& s = a.splats[k];
        const int tx0 = s.x0 / kTileSize, tx1 = (s.x1 - 1) / kTileSize;
        const int ty0 = s.y0 / kTileSize, ty1 = (s.y1 - 1) / kTileSize;
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) a.tile_lists[static_cast<std::size_t>(ty) * a.tiles_x + tx].push_back(k);
        }
    }

    a.image = Image(cam.width, cam.height);
    const std::size_t pixels = static_cast<std::size_t>(cam.width) * cam.height;
    a.final_transmittance.assign(pixels, 1.0);
    a.pixel_stop.assign(pixels, 0);
    std::vector<std::uint64_t> tile_hash(a.tile_lists.size(), 0);

    detail::parallel_for(a.tile_lists.size(), options.workers, [&](std::size_t t) {
        const auto& list = a.tile_lists[t];
        const int tx = static_cast<int>(t % a.tiles_x), ty = static_cast<int>(t / a.tiles_x);
        std::uint64_t h = 0;
        for (int y = ty * kTileSize; y < std::min(cam.height, (ty + 1) * kTileSize); ++y) {
            for (int x = tx * kTileSize; x < std::min(cam.width, (tx + 1) * kTileSize); ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double T = 1.0;
                Vec3 color = Vec3::Zero();
                std::uint32_t stop = static_cast<std::uint32_t>(list.size());
                std::uint64_t contributors = 0, clamped = 0;
                for (std::uint32_t j = 0; j < list.size(); ++j) {
                    const auto& s = a.splats[list[j]];
                    const double power = pixel_power(s, px, py);
                    if (power < kSupportPower) continue;
                    double alpha = s.alpha_eff * std::exp(power);
                    if (alpha > kMaxAlpha) {
                        alpha = kMaxAlpha;
                        ++clamped;
                    }
                    const double next_t = T * (1.0 - alpha);
                    if (next_t < kMinTransmittance) {
                        stop = j;
                        break;
                    }
                    color += s.color * (alpha * T);
                    T = next_t;
                    ++contributors;
                }
                const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
                a.final_transmittance[pix] = T;
                a.pixel_stop[pix] = stop;
                a.image.set_pixel(x, y, color + T * scene.background);
                h = mix(h, (contributors << 40) ^ (clamped << 20) ^ stop);
            }
        }
        tile_hash[t] = h;
    });
    for (auto h : tile_hash) fp = mix(fp, h);
    for (const auto& s : a.splats) {
        const Vec3 raw = evaluate_sh_raw(std::span<const Vec3>(scene.primitives[s.source_index].sh.data(), kMaxShCoeffs),
                                         (scene.primitives[s.source_index].position - cam.center()).normalized(),
                                         scene.sh_degree);
        for (int c = 0; c < 3; ++c) fp = mix(fp, (raw[c] < 0.0 ? 1u : 0u) | (raw[c] > 1.0 ? 2u : 0u));
    }
    a.fingerprint = fp;
    return a;
}

ParamGradients render_backward(const GaussianScene& scene, const Camera& cam, const RenderArtifacts& fwd,
                               const Image& loss_grad, std::span<const double> attenuated_grad,
                               const RenderOptions& options) {
    if (loss_grad.width() != cam.width || loss_grad.height() != cam.height ||
        loss_grad.width() != fwd.image.width() || loss_grad.height() != fwd.image.height()) {
        throw RenderError("loss gradient buffer shape does not match the rendered image");
    }
    const std::size_t n = scene.size();
    if (fwd.total != n) throw RenderError("render artifacts belong to a different scene");
    if (!attenuated_grad.empty() && attenuated_grad.size() != n) {
        throw RenderError("attenuated-opacity gradient has the wrong length");
    }

    // Per-tile accumulation, merged in tile order so the sum is independent of
    // the worker count.
    std::vector<std::vector<SplatGrad>> tile_grads(fwd.tile_lists.size());
    detail::parallel_for(fwd.tile_lists.size(), options.workers, [&](std::size_t t) {
        const auto& list = fwd.tile_lists[t];
        auto& grads = tile_grads[t];
        grads.assign(list.size(), SplatGrad{});
        const int tx = static_cast<int>(t % fwd.tiles_x), ty = static_cast<int>(t / fwd.tiles_x);
        for (int y = ty * kTileSize; y < std::min(cam.height, (ty + 1) * kTileSize); ++y) {
            for (int x = tx * kTileSize; x < std::min(cam.width, (tx + 1) * kTileSize); ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
                const Vec3 dpix = loss_grad.pixel(x, y);
                const double px = x + 0.5, py = y + 0.5;
                const double t_final = fwd.final_transmittance[pix];
                const double bg_dot = scene.background.dot(dpix);
                double T = t_final;
                Vec3 accum = Vec3::Zero();
                double last_alpha = 0.0;
                Vec3 last_color = Vec3::Zero();
                for (std::uint32_t j = fwd.pixel_stop[pix]; j-- > 0;) {
                    const auto& s = fwd.splats[list[j]];
                    const double power = pixel_power(s, px, py);
                    if (power < kSupportPower) continue;
                    const double g = std::exp(power);
                    const double raw_alpha = s.alpha_eff * g;
                    const double alpha = std::min(kMaxAlpha, raw_alpha);
                    T /= (1.0 - alpha);
                    auto& out = grads[j];
                    out.color += (alpha * T) * dpix;
                    accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
                    last_alpha = alpha;
                    last_color = s.color;
                    double d_alpha = T * (s.color - accum).dot(dpix);
                    d_alpha += -t_final / (1.0 - alpha) * bg_dot;
                    if (raw_alpha > kMaxAlpha) continue;
                    out.alpha_eff += g * d_alpha;
                    const double d_power = alpha * d_alpha;
                    const double dx = px - s.mean2d.x(), dy = py - s.mean2d.y();
                    out.mean2d += d_power * Vec2(s.conic[0] * dx + s.conic[1] * dy, s.conic[1] * dx + s.conic[2] * dy);
                    out.conic += d_power * Vec3(-0.5 * dx * dx, -dx * dy, -0.5 * dy * dy);
                }
            }
        }
    });

    std::vector<SplatGrad> splat_grads(fwd.splats.size());
    for (std::size_t t = 0; t < fwd.tile_lists.size(); ++t) {
        const auto& list = fwd.tile_lists[t];
        for (std::size_t j = 0; j < list.size(); ++j) {
            auto& dst = splat_grads[list[j]];
            const auto& src = tile_grads[t][j];
            dst.mean2d += src.mean2d;
            dst.conic += src.conic;
            dst.color += src.color;
            dst.alpha_eff += src.alpha_eff;
        }
    }

    ParamGradients grads(n, zero_primitive());
    std::vector<double> d_att(n, 0.0);
    if (!attenuated_grad.empty()) std::copy(attenuated_grad.begin(), attenuated_grad.end(), d_att.begin());
    for (std::size_t k = 0; k < fwd.splats.size(); ++k) {
        const std::size_t i = fwd.splats[k].source_index;
        project_backward(scene.primitives[i], cam, scene.sh_degree, splat_grads[k], grads[i]);
        d_att[i] += splat_grads[k].alpha_eff;
    }
    attenuation_backward(scene, cam, fwd.distances, fwd.lod, d_att, grads);
    return grads;
}

ParamGradients render_with_gradients(const GaussianScene& scene, const Camera& cam, const LodQuery& lod,
                                     const Image& loss_grad, const RenderOptions& options) {
    const RenderArtifacts fwd = render(scene, cam, lod, options);
    return render_backward(scene, cam, fwd, loss_grad, {}, options);
}

std::string render_summary_json(const RenderArtifacts& a) {
    nlohmann::ordered_json j;
    j["rendered_count"] = a.rendered_count;
    j["total"] = a.total;
    j["eta_actual"] = a.eta_actual;
    j["s_v"] = a.lod.s_v;
    j["tau"] = a.lod.tau;
    return j.dump();
}

}  // namespace clodgs
