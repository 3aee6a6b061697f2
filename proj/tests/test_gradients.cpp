#include "clodgs/rasterizer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace clodgs;

namespace {

struct GradCase {
    double s_v;
    double lambda_reg;
    int sh_degree;
};

void PrintTo(const GradCase& c, std::ostream* os) {
    *os << "s_v=" << c.s_v << " lambda_reg=" << c.lambda_reg << " sh=" << c.sh_degree;
}

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

Image target_image(const Camera& cam) {
    LodQuery q;
    q.attenuate = false;
    return render(test::random_scene(25, 1234, 0), cam, q).image;
}

}  // namespace

TEST_P(GradientCheck, AnalyticMatchesFiniteDifferences) {
    const auto c = GetParam();
    const auto cam = test::front_camera(32, 32);
    const auto scene = test::random_scene(12, 42 + c.sh_degree, c.sh_degree);
    const auto gt = target_image(cam);
    const auto cfg = test::exact_gradient_config(c.lambda_reg);
    const auto r = test::finite_difference_check(scene, cam, gt, c.s_v, cfg, true);
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
    EXPECT_GT(r.checked, 10 * r.skipped);
    for (int k = 0; k < kParamClassCount; ++k) {
        if (static_cast<ParamClass>(k) == ParamClass::ShRest && c.sh_degree == 0) continue;
        EXPECT_GT(r.per_class[k], 0u) << param_class_name(static_cast<ParamClass>(k));
    }
}

INSTANTIATE_TEST_SUITE_P(Scales, GradientCheck,
                         ::testing::Values(GradCase{1.0, 0.0, 1}, GradCase{1.0, 1.0, 2}, GradCase{3.0, 0.0, 3},
                                           GradCase{3.0, 1.0, 1}, GradCase{2.2, 1.0, 0}),
                         [](const ::testing::TestParamInfo<GradCase>& info) {
                             const auto& c = info.param;
                             return "sv" + std::to_string(static_cast<int>(c.s_v * 10)) + "_lambda" +
                                    std::to_string(static_cast<int>(c.lambda_reg)) + "_sh" +
                                    std::to_string(c.sh_degree);
                         });

TEST(GradientCheckInactive, PlainSplattingBeforeMechanism) {
    const auto cam = test::front_camera(32, 32);
    const auto scene = test::random_scene(10, 77, 1);
    const auto gt = target_image(cam);
    const auto cfg = test::exact_gradient_config(1.0);
    const auto r = test::finite_difference_check(scene, cam, gt, 3.0, cfg, false);
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
    for (const auto& g : loss_gradients(scene, cam, gt, 3.0, cfg, false)) EXPECT_EQ(g.sigma_d, 0.0);
}

TEST(RegularizerRouting, SigmaOnlyKeepsImageGradientElsewhere) {
    const auto cam = test::front_camera(32, 32);
    const auto scene = test::random_scene(15, 5, 1);
    const auto gt = target_image(cam);
    auto exact = test::exact_gradient_config(1.0);
    auto routed = exact;
    routed.reg_sigma_only = true;
    auto image_only = exact;
    image_only.lambda_reg = 0.0;
    const auto ge = loss_gradients(scene, cam, gt, 3.0, exact, true);
    const auto gr = loss_gradients(scene, cam, gt, 3.0, routed, true);
    const auto gi = loss_gradients(scene, cam, gt, 3.0, image_only, true);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        EXPECT_DOUBLE_EQ(gr[i].sigma_d, ge[i].sigma_d);
        EXPECT_EQ(gr[i].position, gi[i].position);
        EXPECT_EQ(gr[i].opacity_logit, gi[i].opacity_logit);
    }
}
