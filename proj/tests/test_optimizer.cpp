#include "clodgs/error.hpp"
#include "clodgs/optimizer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace clodgs;

namespace {

std::array<double, kParamClassCount> uniform_lrs(double lr) {
    std::array<double, kParamClassCount> l;
    l.fill(lr);
    return l;
}

}  // namespace

TEST(Adam, TwoStepsMatchHandComputation) {
    GaussianScene scene;
    scene.sh_degree = 0;
    scene.primitives.resize(1);
    scene.primitives[0].opacity_logit = 0.3;
    AdamOptimizer opt(1, 1);
    ParamGradients g(1, zero_primitive());
    const double lr = 0.01, g1 = 0.5, g2 = -0.2;
    g[0].opacity_logit = g1;
    opt.step(scene, g, uniform_lrs(lr));
    double m = 0.1 * g1, v = 0.001 * g1 * g1;
    double x = 0.3 - lr * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-15);
    EXPECT_NEAR(scene.primitives[0].opacity_logit, x, 1e-15);
    g[0].opacity_logit = g2;
    opt.step(scene, g, uniform_lrs(lr));
    m = 0.9 * m + 0.1 * g2;
    v = 0.999 * v + 0.001 * g2 * g2;
    x -= lr * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-15);
    EXPECT_NEAR(scene.primitives[0].opacity_logit, x, 1e-15);
    EXPECT_EQ(opt.steps(), 2u);
}

TEST(Adam, ZeroGradientLeavesParametersUntouched) {
    auto scene = test::random_scene(3, 1, 1);
    const auto before = scene;
    AdamOptimizer opt(3, scene.coeff_count());
    opt.step(scene, ParamGradients(3, zero_primitive()), uniform_lrs(0.1));
    for (std::size_t i = 0; i < 3; ++i) {
        const auto &a = scene.primitives[i], &b = before.primitives[i];
        EXPECT_EQ(a.position, b.position);
        EXPECT_EQ(a.log_scale, b.log_scale);
        EXPECT_EQ(a.opacity_logit, b.opacity_logit);
        EXPECT_EQ(a.sh, b.sh);
        EXPECT_EQ(a.sigma_d, b.sigma_d);
        // Rotations are renormalized after every step.
        EXPECT_LT((a.rotation - b.rotation).norm(), 1e-15);
    }
}

TEST(Adam, PerClassLearningRates) {
    auto scene = test::random_scene(1, 2, 1);
    const auto before = scene;
    AdamOptimizer opt(1, scene.coeff_count());
    ParamGradients g(1, zero_primitive());
    g[0].position = Vec3(1, 1, 1);
    g[0].sigma_d = 1.0;
    auto lrs = uniform_lrs(0.0);
    lrs[static_cast<int>(ParamClass::SigmaD)] = 0.05;
    opt.step(scene, g, lrs);
    EXPECT_EQ(scene.primitives[0].position, before.primitives[0].position);
    EXPECT_NEAR(scene.primitives[0].sigma_d, before.primitives[0].sigma_d - 0.05, 1e-12);
}

TEST(Adam, SidecarRoundTrip) {
    test::TempDir dir("adam");
    auto scene = test::random_scene(4, 3, 2);
    AdamOptimizer opt(4, scene.coeff_count());
    ParamGradients g(4, zero_primitive());
    for (std::size_t i = 0; i < 4; ++i) {
        g[i].position = Vec3(0.1 * i, -0.2, 0.3);
        g[i].sh[5] = Vec3(0.01, 0.02, 0.03);
    }
    opt.step(scene, g, uniform_lrs(1e-3));
    opt.step(scene, g, uniform_lrs(1e-3));
    opt.save(dir.path() / "s.optim", 17, "rng-state-text");
    std::uint64_t iter = 0;
    std::string rng;
    const auto loaded = AdamOptimizer::load(dir.path() / "s.optim", &iter, &rng);
    EXPECT_EQ(iter, 17u);
    EXPECT_EQ(rng, "rng-state-text");
    EXPECT_EQ(loaded.steps(), 2u);
    EXPECT_EQ(loaded.first_moment(), opt.first_moment());
    EXPECT_EQ(loaded.second_moment(), opt.second_moment());
}

TEST(Adam, Errors) {
    test::TempDir dir("adam_bad");
    auto scene = test::random_scene(2, 4, 0);
    AdamOptimizer opt(3, 1);
    EXPECT_THROW(opt.step(scene, ParamGradients(2, zero_primitive()), uniform_lrs(0.1)), TrainError);
    EXPECT_THROW(AdamOptimizer::load(dir.path() / "none.optim"), IoError);
    std::ofstream(dir.path() / "bad.optim") << "{\"format\": \"other\"}\n";
    EXPECT_THROW(AdamOptimizer::load(dir.path() / "bad.optim"), IoError);
}
