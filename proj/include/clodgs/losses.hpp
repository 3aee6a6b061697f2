#pragma once

#include "clodgs/image.hpp"

#include <string>

namespace clodgs {

inline constexpr double kTargetRatioExponent = 1.5;
inline constexpr double kDefaultLambdaReg = 1.0;
inline constexpr double kDefaultLambdaDssim = 0.2;

/// Fraction of primitives a view at virtual scale s_v should keep: s_v^-1.5.
double target_ratio(double s_v);

/// (s_v - 1)^2 * relu(eta - eta_target)^2.
double reg_loss(double s_v, double eta, double eta_target);

/// d(reg_loss)/d(eta).
double reg_loss_grad(double s_v, double eta, double eta_target);

/// (1 - 0.5 s_v / s_max)^2 where s_max is the upper bound of the sampled range.
double adaptive_weight(double s_v, double s_max);

struct LossBreakdown {
    double s_v = 1.0;
    double l1 = 0.0;
    double dssim = 0.0;
    double render = 0.0;       // (1 - lambda_dssim) l1 + lambda_dssim dssim
    double eta_target = 1.0;
    double eta_soft = 0.0;     // ratio fed to the regularizer
    double eta_actual = 0.0;   // hard ratio, logged only
    double reg = 0.0;
    double weight = 1.0;       // w_s
    double total = 0.0;        // weight * (render + lambda_reg * reg)

    std::string to_json() const;
};

struct LossSettings {
    double lambda_reg = kDefaultLambdaReg;
    double lambda_dssim = kDefaultLambdaDssim;
    bool adaptive_weight = true;  // false pins w_s to 1
};

struct LossGradients {
    Image d_image;       // dL_total / d(render)
    double d_eta = 0.0;  // dL_total / d(eta_soft)
};

/// Assembles the training objective for one view. When `grads` is non-null
/// it receives the gradient w.r.t. the rendered image and the soft ratio.
LossBreakdown total_loss(const Image& render, const Image& gt, double s_v, double s_max, double eta_soft,
                         const LossSettings& settings, LossGradients* grads = nullptr);

}  // namespace clodgs
