#include "support.hpp"

#include "clodgs/rasterizer.hpp"
#include "clodgs/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace clodgs::test {

Camera front_camera(int width, int height) {
    return look_at(Vec3(0.0, 0.0, -3.0), Vec3::Zero(), Vec3(0.0, -1.0, 0.0), width, height, 50.0);
}

GaussianScene random_scene(std::size_t n, std::uint64_t seed, int sh_degree) {
    Rng rng(seed);
    GaussianScene scene;
    scene.sh_degree = sh_degree;
    scene.background = Vec3(0.1, 0.15, 0.2);
    for (std::size_t i = 0; i < n; ++i) {
        GaussianPrimitive p;
        p.position = Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.3, 0.3));
        p.log_scale = Vec3(std::log(rng.uniform(0.06, 0.2)), std::log(rng.uniform(0.06, 0.2)),
                           std::log(rng.uniform(0.06, 0.2)));
        Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        p.rotation = q.normalized();
        p.opacity_logit = logit(rng.uniform(0.2, 0.8));
        p.sh[0] = Vec3(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
        for (int k = 1; k < sh_coeff_count(sh_degree); ++k) {
            p.sh[k] = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
        }
        p.sigma_d = rng.uniform(0.5, 3.0);
        scene.primitives.push_back(p);
    }
    return scene;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::ostringstream name;
    name << "clodgs_" << tag << "_" << ::getpid() << "_" << counter++;
    path_ = std::filesystem::temp_directory_path() / name.str();
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

double objective(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v, const TrainConfig& cfg,
                 bool mechanism_active, std::uint64_t* fingerprint) {
    LodQuery q;
    q.s_v = mechanism_active ? s_v : 1.0;
    q.tau = cfg.tau;
    q.attenuate = mechanism_active;
    const auto fwd = render(scene, cam, q);
    double eta = 0.0;
    if (mechanism_active) {
        const double temp = cfg.temperature > 0.0 ? cfg.temperature : cfg.tau;
        eta = soft_rendered_ratio(fwd.attenuated, fwd.distances.in_frustum, q, temp, {}, cfg.soft_domain);
    }
    if (fingerprint) {
        // The L1 residual signs and the regularizer hinge are kinks too.
        std::uint64_t h = fwd.fingerprint ^ 0x9e3779b97f4a7c15ULL;
        auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ULL; };
        for (std::size_t i = 0; i < gt.size(); ++i) {
            const double r = fwd.image.data()[i] - gt.data()[i];
            mix(r > 0.0 ? 1 : (r < 0.0 ? 2 : 3));
        }
        mix(eta > target_ratio(q.s_v) ? 5 : 7);
        *fingerprint = h;
    }
    LossSettings settings;
    settings.lambda_reg = cfg.lambda_reg;
    settings.lambda_dssim = cfg.lambda_dssim;
    settings.adaptive_weight = cfg.adaptive_weight;
    return total_loss(fwd.image, gt, q.s_v, cfg.s_max, eta, settings).total;
}

TrainConfig exact_gradient_config(double lambda_reg) {
    TrainConfig cfg = TrainConfig::desk();
    cfg.lambda_reg = lambda_reg;
    cfg.reg_sigma_only = false;
    return cfg;
}

FdReport finite_difference_check(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v,
                                 const TrainConfig& cfg, bool mechanism_active, double floor) {
    const ParamGradients grads = loss_gradients(scene, cam, gt, s_v, cfg, mechanism_active);
    std::uint64_t base_fp = 0;
    objective(scene, cam, gt, s_v, cfg, mechanism_active, &base_fp);

    FdReport report;
    GaussianScene probe = scene;
    const int coeffs = scene.coeff_count();
    for (std::size_t i = 0; i < scene.size(); ++i) {
        for (int c = 0; c < kParamClassCount; ++c) {
            const auto cls = static_cast<ParamClass>(c);
            auto block = param_block(probe.primitives[i], cls, coeffs);
            const auto analytic = param_block(grads[i], cls, coeffs);
            for (std::size_t k = 0; k < block.size(); ++k) {
                const double x0 = block[k];
                double fd = 0.0;
                bool ok = false;
                for (double h = 1e-4; h >= 1e-8 && !ok; h *= 0.1) {
                    double f[4];
                    const double offsets[4] = {-2 * h, -h, h, 2 * h};
                    bool same_piece = true;
                    for (int s = 0; s < 4 && same_piece; ++s) {
                        block[k] = x0 + offsets[s];
                        std::uint64_t fp = 0;
                        f[s] = objective(probe, cam, gt, s_v, cfg, mechanism_active, &fp);
                        same_piece = fp == base_fp;
                    }
                    block[k] = x0;
                    if (!same_piece) continue;
                    fd = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
                    ok = true;
                }
                if (!ok) {
                    ++report.skipped;
                    continue;
                }
                const double a = analytic[k];
                const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
                ++report.checked;
                ++report.per_class[c];
                if (rel > report.max_rel_error) {
                    report.max_rel_error = rel;
                    std::ostringstream w;
                    w << param_class_name(cls) << "[" << i << "]." << k << " analytic=" << a << " fd=" << fd;
                    report.worst = w.str();
                }
            }
        }
    }
    return report;
}

DeskData make_desk_data(std::size_t count, std::size_t train_views, int size, std::uint64_t seed) {
    DeskData d;
    SynthSpec spec;
    spec.count = count;
    spec.seed = seed;
    d.gt = generate_synthetic_scene(spec);
    CameraSetSpec cams;
    cams.count = train_views;
    cams.width = size;
    cams.height = size;
    d.train = generate_camera_set(d.gt, cams);
    cams.count = 8;
    cams.seed = 99;
    d.test = generate_camera_set(d.gt, cams);
    d.init = perturb_scene(d.gt, PerturbSpec{});
    return d;
}

}  // namespace clodgs::test
