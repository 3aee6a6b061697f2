#include "clodgs/error.hpp"
#include "clodgs/frame_service.hpp"
#include "clodgs/ply_io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <thread>

using namespace clodgs;
using nlohmann::json;

namespace {

class ServiceFixture : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::make_unique<test::TempDir>("service");
        SynthSpec spec;
        spec.count = 300;
        scene_ = generate_synthetic_scene(spec);
        save_ply(scene_, dir_->path() / "desk.ply");
        auto lod = scene_;
        for (std::size_t i = 0; i < lod.size(); ++i) lod.primitives[i].sigma_d = 0.3 + 0.01 * static_cast<double>(i % 100);
        save_ply(lod, dir_->path() / "lod.ply");
        std::ofstream(dir_->path() / "broken.ply") << "ply\nformat ascii 1.0\nend_header\n";
        std::ofstream(dir_->path() / "notes.txt") << "ignored";
        service_ = std::make_unique<FrameService>(dir_->path(), 256);
    }

    RenderRequest request(const std::string& scene, double s_v = 1.0) const {
        RenderRequest r;
        r.scene = scene;
        r.width = 48;
        r.height = 40;
        r.s_v = s_v;
        return r;
    }

    std::unique_ptr<test::TempDir> dir_;
    GaussianScene scene_;
    std::unique_ptr<FrameService> service_;
};

int error_status(const std::function<void()>& fn, std::string* code = nullptr) {
    try {
        fn();
    } catch (const ServiceError& e) {
        if (code) *code = e.code();
        return e.status();
    }
    return 0;
}

}  // namespace

TEST(FrameServiceStartup, EmptyDirectoryListsNothing) {
    test::TempDir dir("service_empty");
    FrameService svc(dir.path());
    EXPECT_EQ(svc.list_scenes_json(), "[]");
    EXPECT_EQ(json::parse(svc.health_json()).at("version"), kVersion);
}

TEST(FrameServiceStartup, MissingDirectoryFails) {
    EXPECT_THROW(FrameService("/nonexistent/scenes/dir"), IoError);
}

TEST_F(ServiceFixture, ListsScenesWithErrorNotes) {
    const auto list = json::parse(service_->list_scenes_json());
    ASSERT_EQ(list.size(), 3u);
    EXPECT_EQ(list[0].at("id"), "broken");
    EXPECT_TRUE(list[0].contains("error"));
    EXPECT_EQ(list[1].at("id"), "desk");
    EXPECT_EQ(list[1].at("num_gaussians"), 300);
    const auto bytes = std::filesystem::file_size(dir_->path() / "desk.ply");
    EXPECT_EQ(list[1].at("file_bytes").get<std::size_t>(), bytes);
    EXPECT_DOUBLE_EQ(list[1].at("file_mb").get<double>(), static_cast<double>(bytes) / 1e6);
    EXPECT_EQ(list[1].at("bounds").at("min").size(), 3u);
}

TEST_F(ServiceFixture, SameRequestSameBytes) {
    const auto a = service_->render_frame(request("lod", 2.0));
    const auto b = service_->render_frame(request("lod", 2.0));
    EXPECT_EQ(encode_png(a.image), encode_png(b.image));
    EXPECT_EQ(a.rendered_count, b.rendered_count);
    EXPECT_EQ(a.image.width(), 48);
    EXPECT_EQ(a.image.height(), 40);
}

TEST_F(ServiceFixture, CountNonIncreasingInScale) {
    std::size_t prev = SIZE_MAX;
    for (double s : {1.0, 2.0, 4.0, 8.0}) {
        const auto f = service_->render_frame(request("lod", s));
        EXPECT_LE(f.rendered_count, prev);
        EXPECT_EQ(f.total, 300u);
        EXPECT_DOUBLE_EQ(f.eta_actual, static_cast<double>(f.rendered_count) / 300.0);
        prev = f.rendered_count;
    }
    EXPECT_LT(prev, service_->render_frame(request("lod", 1.0)).rendered_count);
}

TEST_F(ServiceFixture, DefaultDecayBarelyChangesUnitScaleFrame) {
    auto clod = request("desk");
    auto off = clod;
    off.mode = FrameMode::Off;
    const auto a = service_->render_frame(clod), b = service_->render_frame(off);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.image.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(a.image.data()[i] - b.image.data()[i]));
    }
    EXPECT_LE(max_diff, 0.05);
}

TEST_F(ServiceFixture, TopKMode) {
    auto r = request("lod");
    r.mode = FrameMode::TopK;
    r.topk = 40;
    EXPECT_EQ(service_->render_frame(r).rendered_count, 40u);
}

TEST_F(ServiceFixture, ExplicitPoseMatchesOrbit) {
    auto orbit = request("desk");
    orbit.azimuth_deg = 30.0;
    orbit.elevation_deg = 50.0;
    orbit.radius = 3.0;
    const auto f1 = service_->render_frame(orbit);
    OrbitParams o{30.0, 50.0, 3.0, load_ply(dir_->path() / "desk.ply").centroid()};
    const Camera cam = orbit_camera(o, 48, 40, orbit.fov_y_deg);
    auto posed = request("desk");
    posed.pose = cam.world_to_camera;
    posed.fx = cam.fx;
    posed.fy = cam.fy;
    posed.cx = cam.cx;
    posed.cy = cam.cy;
    EXPECT_EQ(service_->render_frame(posed).image, f1.image);
}

TEST_F(ServiceFixture, StructuredErrors) {
    std::string code;
    EXPECT_EQ(error_status([&] { service_->render_frame(request("nope")); }, &code), 404);
    EXPECT_EQ(code, "unknown_scene");
    EXPECT_EQ(error_status([&] { service_->render_frame(request("broken")); }, &code), 409);
    EXPECT_EQ(code, "scene_unloadable");
    auto big = request("desk");
    big.width = 4096;
    EXPECT_EQ(error_status([&] { service_->render_frame(big); }, &code), 413);
    EXPECT_EQ(code, "oversize");
    EXPECT_EQ(error_status([&] { service_->render_frame(request("desk", 0.5)); }, &code), 400);
    auto skew = request("desk");
    skew.pose = Eigen::Matrix4d::Identity();
    (*skew.pose)(0, 1) = 0.5;
    skew.fx = skew.fy = 40.0;
    EXPECT_EQ(error_status([&] { service_->render_frame(skew); }, &code), 400);
    EXPECT_EQ(code, "bad_request");
    EXPECT_EQ(error_status([] { RenderRequest::from_json("{"); }), 400);
    EXPECT_EQ(error_status([] { RenderRequest::from_json(R"({"width": 3})"); }), 400);
    EXPECT_EQ(error_status([] { RenderRequest::from_json(R"({"scene": "a", "mode": "topk:x"})"); }), 400);
    EXPECT_EQ(error_status([] { RenderRequest::from_json(R"({"scene": "a", "pose": [1, 2]})"); }), 400);
}

TEST_F(ServiceFixture, RequestJsonRoundTrip) {
    const auto r = RenderRequest::from_json(
        R"({"scene": "desk", "width": 64, "height": 32, "s_v": 3.5, "mode": "topk:12",
            "orbit": {"azimuth": 10, "elevation": 20, "radius": 4, "target": [0, 1, 2], "fov": 40}})");
    EXPECT_EQ(r.mode, FrameMode::TopK);
    EXPECT_EQ(r.topk, 12u);
    EXPECT_EQ(RenderRequest::from_json(r.to_json()).to_json(), r.to_json());
    EXPECT_EQ(mode_string(FrameMode::Off, 0), "off");
}

TEST_F(ServiceFixture, HttpEndpoints) {
    HttpFrontend frontend(*service_);
    const int port = frontend.bind("127.0.0.1", 0);
    std::thread server([&] { frontend.run(); });
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(30, 0);
    for (int i = 0; i < 200 && !cli.Get("/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

    const auto health = cli.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(json::parse(health->body).at("status"), "ok");
    EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

    const auto scenes = cli.Get("/scenes");
    ASSERT_TRUE(scenes);
    EXPECT_EQ(json::parse(scenes->body).size(), 3u);

    const std::string body = R"({"scene": "lod", "width": 32, "height": 32, "s_v": 2})";
    const auto as_json = cli.Post("/render", body, "application/json");
    ASSERT_TRUE(as_json);
    EXPECT_EQ(as_json->status, 200);
    const auto j = json::parse(as_json->body);
    EXPECT_EQ(j.at("format"), "png");
    EXPECT_EQ(j.at("total"), 300);

    const auto as_png = cli.Post("/render", httplib::Headers{{"Accept", "image/png"}}, body, "application/json");
    ASSERT_TRUE(as_png);
    EXPECT_EQ(as_png->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(as_png->body.substr(1, 3), "PNG");
    EXPECT_EQ(as_png->get_header_value("X-Rendered-Count"), std::to_string(j.at("rendered_count").get<int>()));
    EXPECT_EQ(base64_encode(std::vector<std::uint8_t>(as_png->body.begin(), as_png->body.end())),
              j.at("image").get<std::string>());

    const auto missing = cli.Post("/render", R"({"scene": "nope"})", "application/json");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body).at("error").at("code"), "unknown_scene");

    const auto preflight = cli.Options("/render");
    ASSERT_TRUE(preflight);
    EXPECT_EQ(preflight->status, 204);

    frontend.stop();
    server.join();
}
