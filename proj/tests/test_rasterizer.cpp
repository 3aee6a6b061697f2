#include "clodgs/error.hpp"
#include "clodgs/projection.hpp"
#include "clodgs/rasterizer.hpp"
#include "clodgs/sh.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

using namespace clodgs;

namespace {

GaussianPrimitive flat_primitive(const Vec3& pos, double opacity, const Vec3& rgb, double scale = 0.1) {
    GaussianPrimitive p;
    p.position = pos;
    p.log_scale = Vec3::Constant(std::log(scale));
    p.opacity_logit = logit(opacity);
    p.sh[0] = (rgb - Vec3::Constant(0.5)) / kShC0;
    return p;
}

LodQuery plain() {
    LodQuery q;
    q.attenuate = false;
    return q;
}

}  // namespace

TEST(Rasterizer, EmptySceneIsBackground) {
    GaussianScene scene;
    scene.background = Vec3(0.2, 0.4, 0.6);
    const auto r = render(scene, test::front_camera(), plain());
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) EXPECT_EQ(r.image.pixel(x, y), scene.background);
    }
    EXPECT_EQ(r.rendered_count, 0u);
}

TEST(Rasterizer, SingleSplatMatchesCompositingOracle) {
    GaussianScene scene;
    scene.background = Vec3(0.1, 0.1, 0.1);
    const Vec3 rgb(0.9, 0.3, 0.5);
    scene.primitives.push_back(flat_primitive(Vec3(0.05, -0.03, 0.0), 0.7, rgb));
    const auto cam = test::front_camera(32, 32);
    const auto r = render(scene, cam, plain());
    const auto s = project_gaussian(scene.primitives[0], cam, 0);
    ASSERT_TRUE(s);
    Mat2 k = s->cov2d.inverse();
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const Vec2 d = Vec2(x + 0.5, y + 0.5) - s->mean2d;
            const double power = -0.5 * d.dot(k * d);
            const double alpha = power < -4.5 ? 0.0 : std::min(0.99, 0.7 * std::exp(power));
            const Vec3 want = alpha * rgb + (1.0 - alpha) * scene.background;
            EXPECT_LT((r.image.pixel(x, y) - want).norm(), 1e-12) << x << "," << y;
        }
    }
}

TEST(Rasterizer, OpacityClampAtCenter) {
    GaussianScene scene;
    scene.primitives.push_back(flat_primitive(Vec3::Zero(), 0.99999, Vec3(1, 1, 1), 1.5));
    scene.background = Vec3::Zero();
    const auto r = render(scene, test::front_camera(32, 32), plain());
    EXPECT_NEAR(r.image.at(16, 16, 0), kMaxAlpha, 1e-12);
}

TEST(Rasterizer, DepthOrderIndependentOfStorageOrder) {
    GaussianScene a;
    a.primitives.push_back(flat_primitive(Vec3(0, 0, -0.5), 0.8, Vec3(1, 0, 0)));
    a.primitives.push_back(flat_primitive(Vec3(0.02, 0, 0.5), 0.8, Vec3(0, 0, 1)));
    GaussianScene b = a;
    std::swap(b.primitives[0], b.primitives[1]);
    const auto cam = test::front_camera();
    const auto ra = render(a, cam, plain()), rb = render(b, cam, plain());
    EXPECT_EQ(ra.image, rb.image);
    EXPECT_GT(ra.image.at(16, 16, 0), ra.image.at(16, 16, 2));
}

TEST(Rasterizer, EarlyTerminationKeepsTransmittanceFloor) {
    GaussianScene scene;
    for (int i = 0; i < 30; ++i) scene.primitives.push_back(flat_primitive(Vec3(0, 0, 0.02 * i), 0.95, Vec3(0.5, 0.5, 0.5), 0.4));
    const auto r = render(scene, test::front_camera(), plain());
    for (double t : r.final_transmittance) EXPECT_GE(t, kMinTransmittance);
    EXPECT_LT(r.pixel_stop[16 * 32 + 16], 30u);
}

TEST(Rasterizer, WorkerCountDoesNotChangeOutput) {
    const auto scene = test::random_scene(200, 21, 2);
    const auto cam = test::front_camera(80, 48);
    LodQuery q;
    q.s_v = 2.0;
    RenderOptions one, many;
    many.workers = 4;
    const auto a = render(scene, cam, q, one), b = render(scene, cam, q, many);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.fingerprint, b.fingerprint);
    Image g(80, 48, 0.01);
    const auto ga = render_backward(scene, cam, a, g, {}, one), gb = render_backward(scene, cam, b, g, {}, many);
    EXPECT_EQ(ga, gb);
}

TEST(Rasterizer, MaskShrinksWithScale) {
    const auto scene = test::random_scene(150, 22);
    const auto cam = test::front_camera();
    std::vector<std::uint8_t> prev;
    std::size_t prev_count = scene.size() + 1;
    for (double s = 1.0; s <= 10.0; s += 0.5) {
        LodQuery q;
        q.s_v = s;
        const auto r = render(scene, cam, q);
        EXPECT_LE(r.rendered_count, prev_count);
        for (std::size_t i = 0; i < prev.size(); ++i) EXPECT_LE(r.mask[i], prev[i]);
        EXPECT_DOUBLE_EQ(r.eta_actual, static_cast<double>(r.rendered_count) / scene.size());
        prev = r.mask;
        prev_count = r.rendered_count;
    }
}

TEST(Rasterizer, TopKKeepsHighestAttenuatedOpacity) {
    const auto scene = test::random_scene(60, 23);
    const auto cam = test::front_camera();
    LodQuery q;
    q.s_v = 3.0;
    RenderOptions opts;
    opts.top_k = 10;
    const auto r = render(scene, cam, q, opts);
    EXPECT_EQ(r.rendered_count, 10u);
    double kept_min = 1.0, dropped_max = 0.0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (!r.distances.in_frustum[i]) continue;
        if (r.mask[i]) kept_min = std::min(kept_min, r.attenuated[i]);
        else dropped_max = std::max(dropped_max, r.attenuated[i]);
    }
    EXPECT_GE(kept_min, dropped_max);
}

TEST(Rasterizer, NonFiniteParameterNamesPrimitive) {
    auto scene = test::random_scene(5, 24);
    scene.primitives[3].position.x() = std::nan("");
    try {
        render(scene, test::front_camera(), LodQuery{});
        FAIL() << "expected RenderError";
    } catch (const RenderError& e) {
        EXPECT_NE(std::string(e.what()).find("primitive 3"), std::string::npos);
    }
}

TEST(Rasterizer, InvalidQueryOrCamera) {
    const auto scene = test::random_scene(5, 25);
    LodQuery q;
    q.s_v = 0.9;
    EXPECT_THROW(render(scene, test::front_camera(), q), ConfigError);
    Camera cam = test::front_camera();
    cam.fx = -1.0;
    EXPECT_THROW(render(scene, cam, LodQuery{}), ConfigError);
}

TEST(Rasterizer, BackwardRejectsMismatchedBuffers) {
    const auto scene = test::random_scene(5, 26);
    const auto cam = test::front_camera();
    const auto fwd = render(scene, cam, LodQuery{});
    EXPECT_THROW(render_backward(scene, cam, fwd, Image(8, 8)), RenderError);
    const std::vector<double> bad(2, 0.0);
    EXPECT_THROW(render_backward(scene, cam, fwd, Image(32, 32), bad), RenderError);
}

TEST(Rasterizer, SummaryJson) {
    const auto scene = test::random_scene(20, 27);
    const auto r = render(scene, test::front_camera(), LodQuery{});
    const auto j = nlohmann::json::parse(render_summary_json(r));
    EXPECT_EQ(j.at("rendered_count").get<std::size_t>(), r.rendered_count);
    EXPECT_EQ(j.at("total").get<std::size_t>(), 20u);
    EXPECT_DOUBLE_EQ(j.at("s_v").get<double>(), 1.0);
}
