#include "clodgs/losses.hpp"

#include "clodgs/error.hpp"
#include "clodgs/math.hpp"
#include "clodgs/metrics.hpp"

#include <json.hpp>

#include <cmath>

namespace clodgs {

double target_ratio(double s_v) { return 1.0 / std::pow(s_v, kTargetRatioExponent); }

double reg_loss(double s_v, double eta, double eta_target) {
    const double w = s_v - 1.0;
    const double excess = relu(eta - eta_target);
    return w * w * excess * excess;
}

double reg_loss_grad(double s_v, double eta, double eta_target) {
    const double w = s_v - 1.0;
    return 2.0 * w * w * relu(eta - eta_target);
}

double adaptive_weight(double s_v, double s_max) {
    const double f = 1.0 - 0.5 * s_v / s_max;
    return f * f;
}

std::string LossBreakdown::to_json() const {
    nlohmann::ordered_json j;
    j["s_v"] = s_v;
    j["l1"] = l1;
    j["dssim"] = dssim;
    j["l_render"] = render;
    j["eta_target"] = eta_target;
    j["eta_soft"] = eta_soft;
    j["eta_actual"] = eta_actual;
    j["l_reg"] = reg;
    j["w_s"] = weight;
    j["l_total"] = total;
    return j.dump();
}

LossBreakdown total_loss(const Image& render, const Image& gt, double s_v, double s_max, double eta_soft,
                         const LossSettings& settings, LossGradients* grads) {
    if (!render.same_shape(gt)) throw ConfigError("render and ground truth shapes differ");
    if (!(s_v >= 1.0) || !(s_max >= s_v)) throw ConfigError("total_loss needs 1 <= s_v <= s_max");
    LossBreakdown b;
    b.s_v = s_v;
    Image g_l1, g_ssim;
    b.l1 = l1_loss(render, gt, grads ? &g_l1 : nullptr);
    b.dssim = dssim(render, gt, grads ? &g_ssim : nullptr);
    const double ld = settings.lambda_dssim;
    b.render = (1.0 - ld) * b.l1 + ld * b.dssim;
    b.eta_target = target_ratio(s_v);
    b.eta_soft = eta_soft;
    b.reg = reg_loss(s_v, eta_soft, b.eta_target);
    b.weight = settings.adaptive_weight ? adaptive_weight(s_v, s_max) : 1.0;
    b.total = b.weight * (b.render + settings.lambda_reg * b.reg);
    if (grads) {
        grads->d_image = Image(render.width(), render.height());
        for (std::size_t i = 0; i < render.size(); ++i) {
            grads->d_image.data()[i] = b.weight * ((1.0 - ld) * g_l1.data()[i] + ld * g_ssim.data()[i]);
        }
        grads->d_eta = b.weight * settings.lambda_reg * reg_loss_grad(s_v, eta_soft, b.eta_target);
    }
    return b;
}

}  // namespace clodgs
