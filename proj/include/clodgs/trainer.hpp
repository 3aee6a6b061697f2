#pragma once

#include "clodgs/camera_set.hpp"
#include "clodgs/lod.hpp"
#include "clodgs/losses.hpp"
#include "clodgs/optimizer.hpp"
#include "clodgs/random.hpp"
#include "clodgs/splat_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace clodgs {

struct LearningRates {
    double position = 1.6e-4;        // times the spatial scale, decays exponentially
    double position_final = 1.6e-6;
    double opacity = 0.05;
    double scale = 5e-3;
    double rotation = 1e-3;
    double sh_dc = 2.5e-3;
    double sh_rest = 2.5e-3 / 20.0;
    double sigma_d = 1e-2;
};

struct TrainConfig {
    std::size_t iterations = 2000;
    std::size_t mechanism_start_iter = 200;
    double s_max = 5.0;
    double lambda_reg = kDefaultLambdaReg;
    double lambda_dssim = kDefaultLambdaDssim;
    bool adaptive_weight = true;
    double tau = 1.0 / 255.0;
    SoftRatioDomain soft_domain = SoftRatioDomain::Log;
    double temperature = 1.0;        // soft-ratio temperature; 0 means tau
    bool reg_sigma_only = true;      // regularizer gradient reaches sigma_d only
    LearningRates lr;
    AdamSettings adam;
    double spatial_lr_scale = 0.0;   // 0: scene bounding radius
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    unsigned workers = 1;

    /// Full-scale schedule (30000 iterations, mechanism from 5000).
    static TrainConfig full_scale();
    /// The same schedule scaled by 1/15 (2000 iterations, mechanism from 200).
    static TrainConfig desk();

    /// Throws ConfigError on broken invariants.
    void validate() const;

    std::string to_json() const;
    /// Unknown keys are rejected; missing keys keep the desk defaults.
    static TrainConfig from_json(const std::string& text);
};

/// Optimization state: parameters, optimizer moments, RNG and counters.
struct TrainState {
    GaussianScene scene;
    AdamOptimizer optimizer;
    Rng rng;
    std::size_t iteration = 0;
    double spatial_scale = 1.0;

    TrainState(GaussianScene initial, const TrainConfig& cfg);
};

/// Virtual distance scale for the current iteration: exactly 1 before the
/// mechanism starts, U(1, s_max) afterwards.
double sample_scale(TrainState& state, const TrainConfig& cfg);

struct StepRecord {
    std::size_t iteration = 0;
    std::size_t camera = 0;
    LossBreakdown loss;
    std::size_t rendered = 0;
    std::size_t total = 0;

    std::string to_json() const;
};

/// One optimization step on (cam, gt). Throws TrainError when the loss is
/// not finite.
StepRecord train_step(TrainState& state, const Camera& cam, const Image& gt, const TrainConfig& cfg);

/// Gradient of the total loss for one view at a fixed s_v, without updating.
/// Used by tests and probes.
ParamGradients loss_gradients(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v,
                              const TrainConfig& cfg, bool mechanism_active, LossBreakdown* breakdown = nullptr);

struct TrainOutputs {
    std::optional<std::filesystem::path> log_path;        // JSON lines
    std::optional<std::filesystem::path> checkpoint_dir;  // PLY + optimizer sidecars
};

struct TrainResult {
    GaussianScene scene;
    std::vector<StepRecord> log;
    double final_train_psnr = 0.0;  // mean over training views at s_v = 1
};

/// Runs cfg.iterations steps with cameras drawn round-robin.
TrainResult train(const GaussianScene& initial, const CameraSet& cameras, const TrainConfig& cfg,
                  const TrainOutputs& outputs = {},
                  const std::function<void(const StepRecord&)>& on_step = {});

/// Mean PSNR of the model over a camera set at the given detail level.
double mean_psnr(const GaussianScene& scene, const CameraSet& cameras, double s_v, double tau = 1.0 / 255.0,
                 unsigned workers = 1);

}  // namespace clodgs
