#include "clodgs/camera_set.hpp"
#include "clodgs/error.hpp"
#include "clodgs/image.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace clodgs;

TEST(Camera, LookAtCentersTarget) {
    const Camera cam = look_at(Vec3(1, 2, 3), Vec3(0.5, -0.5, 0.2), Vec3(0, 0, 1), 40, 30, 60.0);
    EXPECT_NO_THROW(cam.validate());
    const Vec3 t = cam.to_camera(Vec3(0.5, -0.5, 0.2));
    EXPECT_NEAR(t.x(), 0.0, 1e-12);
    EXPECT_NEAR(t.y(), 0.0, 1e-12);
    EXPECT_GT(t.z(), 0.0);
    EXPECT_LT((cam.center() - Vec3(1, 2, 3)).norm(), 1e-12);
    EXPECT_NEAR(cam.fy, 15.0 / std::tan(30.0 * std::numbers::pi / 180.0), 1e-9);
}

TEST(Camera, ValidateRejectsBrokenPose) {
    Camera cam = test::front_camera();
    cam.world_to_camera(0, 0) = 2.0;
    EXPECT_THROW(cam.validate(), ConfigError);
    cam = test::front_camera();
    cam.near = 0.0;
    EXPECT_THROW(cam.validate(), ConfigError);
    cam = test::front_camera();
    cam.world_to_camera(3, 0) = 1.0;
    EXPECT_THROW(cam.validate(), ConfigError);
}

TEST(CameraSet, GenerationIsDeterministic) {
    const auto scene = generate_synthetic_scene(SynthSpec{300, 4, SynthLayout::ClusterMix, 1});
    CameraSetSpec spec;
    spec.count = 6;
    spec.width = 24;
    spec.height = 20;
    const auto a = generate_camera_set(scene, spec), b = generate_camera_set(scene, spec);
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.cameras[i], b.cameras[i]);
        EXPECT_EQ(a.images[i], b.images[i]);
        EXPECT_EQ(a.cameras[i].width, 24);
    }
    spec.seed = 4;
    EXPECT_NE(generate_camera_set(scene, spec).cameras[0], a.cameras[0]);
}

TEST(CameraSet, SaveLoadRoundTrip) {
    test::TempDir dir("cams");
    const auto scene = generate_synthetic_scene(SynthSpec{200, 5, SynthLayout::UniformBox, 0});
    CameraSetSpec spec;
    spec.count = 3;
    const auto set = generate_camera_set(scene, spec);
    save_camera_set(set, dir.path(), "train");
    const auto loaded = load_camera_set(dir.path() / "train.json");
    ASSERT_EQ(loaded.size(), set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        EXPECT_EQ(loaded.cameras[i], set.cameras[i]);
        EXPECT_EQ(loaded.images[i], from_rgb8(to_rgb8(set.images[i]), 64, 64));
    }
}

TEST(CameraSet, Errors) {
    test::TempDir dir("cams_bad");
    const auto scene = generate_synthetic_scene(SynthSpec{50, 5, SynthLayout::UniformBox, 0});
    CameraSetSpec spec;
    spec.count = 1;
    EXPECT_THROW(generate_camera_set(scene, spec), ConfigError);
    EXPECT_THROW(load_camera_set(dir.path() / "none.json"), IoError);
    std::ofstream(dir.path() / "bad.json") << R"({"width": 4, "height": 4, "fx": 4, "fy": 4, "cx": 2, "cy": 2,
        "frames": [{"world_to_camera": [1, 0, 0], "image": "x.ppm"}]})";
    EXPECT_THROW(load_camera_set(dir.path() / "bad.json"), IoError);
    std::ofstream(dir.path() / "broken.json") << "{";
    EXPECT_THROW(load_camera_set(dir.path() / "broken.json"), IoError);
}

TEST(Image, PpmAndPngEncoding) {
    test::TempDir dir("img");
    Image img(5, 3);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i % 7) / 6.0;
    write_ppm(img, dir.path() / "a.ppm");
    EXPECT_EQ(read_ppm(dir.path() / "a.ppm"), from_rgb8(to_rgb8(img), 5, 3));
    const auto png = encode_png(img);
    ASSERT_GT(png.size(), 8u);
    EXPECT_EQ(png[1], 'P');
    EXPECT_EQ(png[2], 'N');
    EXPECT_EQ(png, encode_png(img));
    EXPECT_EQ(base64_encode({'M', 'a', 'n'}), "TWFu");
    EXPECT_EQ(base64_encode({'M', 'a'}), "TWE=");
    EXPECT_EQ(base64_encode({'M'}), "TQ==");
}
