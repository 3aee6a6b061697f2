#include "clodgs/trainer.hpp"

#include "clodgs/error.hpp"
#include "clodgs/lod.hpp"
#include "clodgs/metrics.hpp"
#include "clodgs/ply_io.hpp"
#include "clodgs/rasterizer.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace clodgs {

TrainConfig TrainConfig::full_scale() {
    TrainConfig c;
    c.iterations = 30000;
    c.mechanism_start_iter = 5000;
    return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
    if (iterations == 0) throw ConfigError("iterations must be positive");
    if (!(s_max >= 1.0)) throw ConfigError("s_max must be >= 1");
    if (lambda_reg < 0.0 || lambda_dssim < 0.0 || lambda_dssim > 1.0) throw ConfigError("loss weights out of range");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
    for (double v : {lr.position, lr.position_final, lr.opacity, lr.scale, lr.rotation, lr.sh_dc, lr.sh_rest,
                     lr.sigma_d}) {
        if (!(v > 0.0)) throw ConfigError("learning rates must be positive");
    }
}

namespace {

using Json = nlohmann::ordered_json;

Json lr_json(const LearningRates& lr) {
    return Json{{"position", lr.position}, {"position_final", lr.position_final}, {"opacity", lr.opacity},
                {"scale", lr.scale},       {"rotation", lr.rotation},             {"sh_dc", lr.sh_dc},
                {"sh_rest", lr.sh_rest},   {"sigma_d", lr.sigma_d}};
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError("unknown " + where + " key '" + it.key() + "'");
    }
}

}  // namespace

std::string TrainConfig::to_json() const {
    Json j;
    j["iterations"] = iterations;
    j["mechanism_start_iter"] = mechanism_start_iter;
    j["s_max"] = s_max;
    j["lambda_reg"] = lambda_reg;
    j["lambda_dssim"] = lambda_dssim;
    j["adaptive_weight"] = adaptive_weight;
    j["tau"] = tau;
    j["soft_domain"] = soft_domain == SoftRatioDomain::Log ? "log" : "linear";
    j["temperature"] = temperature;
    j["reg_sigma_only"] = reg_sigma_only;
    j["lr"] = lr_json(lr);
    j["adam"] = Json{{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
    j["spatial_lr_scale"] = spatial_lr_scale;
    j["seed"] = seed;
    j["checkpoint_every"] = checkpoint_every;
    j["workers"] = workers;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    TrainConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        reject_unknown(j,
                       {"iterations", "mechanism_start_iter", "s_max", "lambda_reg", "lambda_dssim",
                        "adaptive_weight", "tau", "soft_domain", "temperature", "reg_sigma_only", "lr", "adam", "spatial_lr_scale", "seed",
                        "checkpoint_every", "workers", "preset"},
                       "train config");
        if (j.value("preset", "desk") == "full") c = full_scale();
        read_key(j, "iterations", c.iterations);
        read_key(j, "mechanism_start_iter", c.mechanism_start_iter);
        read_key(j, "s_max", c.s_max);
        read_key(j, "lambda_reg", c.lambda_reg);
        read_key(j, "lambda_dssim", c.lambda_dssim);
        read_key(j, "adaptive_weight", c.adaptive_weight);
        read_key(j, "tau", c.tau);
        read_key(j, "temperature", c.temperature);
        read_key(j, "reg_sigma_only", c.reg_sigma_only);
        if (j.contains("soft_domain")) {
            const auto d = j.at("soft_domain").get<std::string>();
            if (d == "log") c.soft_domain = SoftRatioDomain::Log;
            else if (d == "linear") c.soft_domain = SoftRatioDomain::Linear;
            else throw ConfigError("soft_domain must be 'log' or 'linear'");
        }
        read_key(j, "spatial_lr_scale", c.spatial_lr_scale);
        read_key(j, "seed", c.seed);
        read_key(j, "checkpoint_every", c.checkpoint_every);
        read_key(j, "workers", c.workers);
        if (j.contains("lr")) {
            const auto& l = j.at("lr");
            reject_unknown(l, {"position", "position_final", "opacity", "scale", "rotation", "sh_dc", "sh_rest", "sigma_d"},
                           "lr");
            read_key(l, "position", c.lr.position);
            read_key(l, "position_final", c.lr.position_final);
            read_key(l, "opacity", c.lr.opacity);
            read_key(l, "scale", c.lr.scale);
            read_key(l, "rotation", c.lr.rotation);
            read_key(l, "sh_dc", c.lr.sh_dc);
            read_key(l, "sh_rest", c.lr.sh_rest);
            read_key(l, "sigma_d", c.lr.sigma_d);
        }
        if (j.contains("adam")) {
            const auto& a = j.at("adam");
            reject_unknown(a, {"beta1", "beta2", "eps"}, "adam");
            read_key(a, "beta1", c.adam.beta1);
            read_key(a, "beta2", c.adam.beta2);
            read_key(a, "eps", c.adam.eps);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad train config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

double bounding_radius(const GaussianScene& scene) {
    const Vec3 c = scene.centroid();
    double r = 0.0;
    for (const auto& p : scene.primitives) r = std::max(r, (p.position - c).norm());
    return r > 0.0 ? r : 1.0;
}

std::string rng_state_string(const Rng& rng) {
    std::ostringstream s;
    s << rng.engine();
    return s.str();
}

}  // namespace

TrainState::TrainState(GaussianScene initial, const TrainConfig& cfg)
    : scene(std::move(initial)),
      optimizer(scene.size(), scene.coeff_count(), cfg.adam),
      rng(cfg.seed),
      spatial_scale(cfg.spatial_lr_scale > 0.0 ? cfg.spatial_lr_scale : bounding_radius(scene)) {
    scene.validate();
    for (auto& p : scene.primitives) p.rotation.normalize();
}

double sample_scale(TrainState& state, const TrainConfig& cfg) {
    if (state.iteration < cfg.mechanism_start_iter) return 1.0;
    return state.rng.uniform(1.0, cfg.s_max);
}

std::string StepRecord::to_json() const {
    auto j = nlohmann::ordered_json::parse(loss.to_json());
    nlohmann::ordered_json out;
    out["iter"] = iteration;
    out["camera"] = camera;
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
    out["rendered"] = rendered;
    out["total"] = total;
    return out.dump();
}

namespace {

struct StepGradients {
    ParamGradients grads;
    LossBreakdown loss;
    std::size_t rendered = 0;
};

StepGradients compute_step(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v,
                           const TrainConfig& cfg, bool mechanism_active) {
    LodQuery lod;
    lod.s_v = mechanism_active ? s_v : 1.0;
    lod.tau = cfg.tau;
    lod.attenuate = mechanism_active;
    RenderOptions opts;
    opts.workers = cfg.workers;
    const RenderArtifacts fwd = render(scene, cam, lod, opts);

    std::vector<double> soft_grad(scene.size(), 0.0);
    double eta_soft = 0.0;
    if (mechanism_active) {
        const double temp = cfg.temperature > 0.0 ? cfg.temperature : cfg.tau;
        eta_soft = soft_rendered_ratio(fwd.attenuated, fwd.distances.in_frustum, lod, temp, soft_grad, cfg.soft_domain);
    }
    LossSettings settings;
    settings.lambda_reg = cfg.lambda_reg;
    settings.lambda_dssim = cfg.lambda_dssim;
    settings.adaptive_weight = cfg.adaptive_weight;
    LossGradients lg;
    StepGradients out;
    out.loss = total_loss(fwd.image, gt, lod.s_v, cfg.s_max, eta_soft, settings, &lg);
    out.loss.eta_actual = fwd.eta_actual;
    out.rendered = fwd.rendered_count;
    for (auto& g : soft_grad) g *= lg.d_eta;
    if (cfg.reg_sigma_only && mechanism_active) {
        out.grads = render_backward(scene, cam, fwd, lg.d_image, {}, opts);
        ParamGradients reg(scene.size(), zero_primitive());
        attenuation_backward(scene, cam, fwd.distances, lod, soft_grad, reg);
        for (std::size_t i = 0; i < scene.size(); ++i) out.grads[i].sigma_d += reg[i].sigma_d;
    } else {
        out.grads = render_backward(scene, cam, fwd, lg.d_image, soft_grad, opts);
    }
    return out;
}

std::array<double, kParamClassCount> learning_rates(const TrainConfig& cfg, std::size_t iteration, double scale) {
    const double t = cfg.iterations > 1 ? std::min(1.0, static_cast<double>(iteration) / (cfg.iterations - 1)) : 1.0;
    const double pos = std::exp((1.0 - t) * std::log(cfg.lr.position) + t * std::log(cfg.lr.position_final));
    std::array<double, kParamClassCount> lrs{};
    lrs[static_cast<int>(ParamClass::Position)] = pos * scale;
    lrs[static_cast<int>(ParamClass::LogScale)] = cfg.lr.scale;
    lrs[static_cast<int>(ParamClass::Rotation)] = cfg.lr.rotation;
    lrs[static_cast<int>(ParamClass::Opacity)] = cfg.lr.opacity;
    lrs[static_cast<int>(ParamClass::ShDc)] = cfg.lr.sh_dc;
    lrs[static_cast<int>(ParamClass::ShRest)] = cfg.lr.sh_rest;
    lrs[static_cast<int>(ParamClass::SigmaD)] = cfg.lr.sigma_d;
    return lrs;
}

}  // namespace

ParamGradients loss_gradients(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v,
                              const TrainConfig& cfg, bool mechanism_active, LossBreakdown* breakdown) {
    auto step = compute_step(scene, cam, gt, s_v, cfg, mechanism_active);
    if (breakdown) *breakdown = step.loss;
    return std::move(step.grads);
}

StepRecord train_step(TrainState& state, const Camera& cam, const Image& gt, const TrainConfig& cfg) {
    const bool active = state.iteration >= cfg.mechanism_start_iter;
    const double s_v = sample_scale(state, cfg);
    auto step = compute_step(state.scene, cam, gt, s_v, cfg, active);
    if (!std::isfinite(step.loss.total)) {
        throw TrainError("non-finite loss at iteration " + std::to_string(state.iteration) + " (s_v=" +
                         std::to_string(s_v) + ", l_render=" + std::to_string(step.loss.render) +
                         ", l_reg=" + std::to_string(step.loss.reg) + ")");
    }
    for (std::size_t i = 0; i < step.grads.size(); ++i) {
        for (int c = 0; c < kParamClassCount; ++c) {
            const auto cls = static_cast<ParamClass>(c);
            for (double g : param_block(step.grads[i], cls, state.scene.coeff_count())) {
                if (!std::isfinite(g)) {
                    throw TrainError("non-finite " + std::string(param_class_name(cls)) + " gradient for primitive " +
                                     std::to_string(i) + " at iteration " + std::to_string(state.iteration) +
                                     " (s_v=" + std::to_string(s_v) + ")");
                }
            }
        }
    }
    state.optimizer.step(state.scene, step.grads, learning_rates(cfg, state.iteration, state.spatial_scale));
    StepRecord rec;
    rec.iteration = state.iteration;
    rec.loss = step.loss;
    rec.rendered = step.rendered;
    rec.total = state.scene.size();
    ++state.iteration;
    return rec;
}

double mean_psnr(const GaussianScene& scene, const CameraSet& cameras, double s_v, double tau, unsigned workers) {
    if (cameras.size() == 0) throw ConfigError("empty camera set");
    LodQuery lod;
    lod.s_v = s_v;
    lod.tau = tau;
    RenderOptions opts;
    opts.workers = workers;
    double sum = 0.0;
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        sum += psnr(render(scene, cameras.cameras[i], lod, opts).image, cameras.images[i]);
    }
    return sum / static_cast<double>(cameras.size());
}

TrainResult train(const GaussianScene& initial, const CameraSet& cameras, const TrainConfig& cfg,
                  const TrainOutputs& outputs, const std::function<void(const StepRecord&)>& on_step) {
    cfg.validate();
    cameras.validate();
    if (cameras.size() < 2) throw ConfigError("training needs at least 2 cameras");
    TrainState state(initial, cfg);

    std::ofstream log;
    if (outputs.log_path) {
        if (outputs.log_path->has_parent_path()) std::filesystem::create_directories(outputs.log_path->parent_path());
        log.open(*outputs.log_path);
        if (!log) throw IoError("cannot open training log " + outputs.log_path->string());
    }
    if (outputs.checkpoint_dir) std::filesystem::create_directories(*outputs.checkpoint_dir);
    auto checkpoint = [&](const std::string& tag) {
        if (!outputs.checkpoint_dir) return;
        save_ply(state.scene, *outputs.checkpoint_dir / (tag + ".ply"));
        state.optimizer.save(*outputs.checkpoint_dir / (tag + ".optim"), state.iteration, rng_state_string(state.rng));
    };

    TrainResult result;
    result.log.reserve(cfg.iterations);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const std::size_t cam_index = it % cameras.size();
        StepRecord rec = train_step(state, cameras.cameras[cam_index], cameras.images[cam_index], cfg);
        rec.camera = cam_index;
        if (log) log << rec.to_json() << "\n";
        if (on_step) on_step(rec);
        result.log.push_back(rec);
        if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.iterations) {
            char tag[32];
            std::snprintf(tag, sizeof tag, "iter_%06zu", it + 1);
            checkpoint(tag);
        }
    }
    checkpoint("final");
    result.final_train_psnr = mean_psnr(state.scene, cameras, 1.0, cfg.tau, cfg.workers);
    if (log) {
        nlohmann::ordered_json summary;
        summary["final"] = true;
        summary["iterations"] = cfg.iterations;
        summary["train_psnr_sv1"] = result.final_train_psnr;
        log << summary.dump() << "\n";
    }
    result.scene = std::move(state.scene);
    return result;
}

}  // namespace clodgs
