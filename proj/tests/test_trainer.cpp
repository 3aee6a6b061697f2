#include "clodgs/error.hpp"
#include "clodgs/ply_io.hpp"
#include "clodgs/trainer.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <fstream>
#include <iterator>

using namespace clodgs;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

TrainConfig short_config(std::size_t iterations = 40) {
    TrainConfig cfg = TrainConfig::desk();
    cfg.iterations = iterations;
    cfg.mechanism_start_iter = 10;
    return cfg;
}

const test::DeskData& small_data() {
    static const auto d = test::make_desk_data(300, 6, 32, 3);
    return d;
}

}  // namespace

TEST(TrainConfig, Presets) {
    const auto full = TrainConfig::full_scale(), desk = TrainConfig::desk();
    EXPECT_EQ(full.iterations, 30000u);
    EXPECT_EQ(full.mechanism_start_iter, 5000u);
    EXPECT_EQ(desk.iterations, 2000u);
    EXPECT_EQ(desk.mechanism_start_iter, 200u);
    EXPECT_EQ(desk.s_max, 5.0);
    EXPECT_EQ(desk.lambda_reg, 1.0);
    EXPECT_EQ(desk.lambda_dssim, 0.2);
    EXPECT_NO_THROW(desk.validate());
}

TEST(TrainConfig, JsonRoundTrip) {
    TrainConfig cfg = TrainConfig::desk();
    cfg.s_max = 3.5;
    cfg.adaptive_weight = false;
    cfg.soft_domain = SoftRatioDomain::Linear;
    cfg.lr.sigma_d = 0.02;
    cfg.seed = 9;
    const auto back = TrainConfig::from_json(cfg.to_json());
    EXPECT_EQ(back.to_json(), cfg.to_json());
    EXPECT_EQ(back.s_max, 3.5);
    EXPECT_FALSE(back.adaptive_weight);
    EXPECT_EQ(back.soft_domain, SoftRatioDomain::Linear);
}

TEST(TrainConfig, PartialJsonKeepsDefaultsAndRejectsUnknownKeys) {
    const auto cfg = TrainConfig::from_json(R"({"iterations": 5})");
    EXPECT_EQ(cfg.iterations, 5u);
    EXPECT_EQ(cfg.s_max, 5.0);
    EXPECT_THROW(TrainConfig::from_json(R"({"iteratons": 5})"), ConfigError);
    EXPECT_THROW(TrainConfig::from_json(R"({"soft_domain": "cubic"})"), ConfigError);
    EXPECT_THROW(TrainConfig::from_json("[1,2"), ConfigError);
}

TEST(TrainConfig, ValidateRejectsBrokenValues) {
    auto cfg = TrainConfig::desk();
    cfg.s_max = 0.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig::desk();
    cfg.iterations = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig::desk();
    cfg.lr.opacity = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = TrainConfig::desk();
    cfg.tau = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SampleScale, UnitBeforeMechanismUniformAfter) {
    auto cfg = TrainConfig::desk();
    TrainState state(test::random_scene(3, 1), cfg);
    state.iteration = cfg.mechanism_start_iter - 1;
    for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_scale(state, cfg), 1.0);
    state.iteration = cfg.mechanism_start_iter;
    double sum = 0.0, lo = 10.0, hi = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double s = sample_scale(state, cfg);
        sum += s;
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    EXPECT_GE(lo, 1.0);
    EXPECT_LE(hi, cfg.s_max);
    EXPECT_NEAR(sum / n, 0.5 * (1.0 + cfg.s_max), 0.03);
    EXPECT_LT(lo, 1.01);
    EXPECT_GT(hi, cfg.s_max - 0.01);
}

TEST(Trainer, LossDecreasesOnSmallScene) {
    const auto& d = small_data();
    auto cfg = short_config(120);
    LodQuery q;
    const double before = mean_psnr(d.init, d.train, 1.0);
    const auto result = train(d.init, d.train, cfg);
    EXPECT_GT(result.final_train_psnr, before + 1.0);
    ASSERT_EQ(result.log.size(), 120u);
    EXPECT_EQ(result.log[5].loss.s_v, 1.0);
    EXPECT_EQ(result.log[5].loss.reg, 0.0);
    EXPECT_EQ(result.log[3].camera, 3u);
    EXPECT_EQ(result.log[7].camera, 1u);
}

TEST(Trainer, DeterministicAndWorkerIndependent) {
    const auto& d = small_data();
    test::TempDir a("train_a"), b("train_b");
    auto cfg = short_config(30);
    cfg.checkpoint_every = 10;
    TrainOutputs oa{a.path() / "log.jsonl", a.path() / "ckpt"};
    TrainOutputs ob{b.path() / "log.jsonl", b.path() / "ckpt"};
    const auto ra = train(d.init, d.train, cfg, oa);
    cfg.workers = 3;
    const auto rb = train(d.init, d.train, cfg, ob);
    EXPECT_EQ(ra.scene, rb.scene);
    for (const char* f : {"iter_000010.ply", "iter_000020.ply", "final.ply", "final.optim", "iter_000010.optim"}) {
        ASSERT_TRUE(std::filesystem::exists(a.path() / "ckpt" / f)) << f;
        EXPECT_EQ(slurp(a.path() / "ckpt" / f), slurp(b.path() / "ckpt" / f)) << f;
    }
    EXPECT_EQ(slurp(a.path() / "log.jsonl"), slurp(b.path() / "log.jsonl"));
}

TEST(Trainer, LogLinesAreJson) {
    const auto& d = small_data();
    test::TempDir dir("train_log");
    auto cfg = short_config(15);
    train(d.init, d.train, cfg, TrainOutputs{dir.path() / "log.jsonl", std::nullopt});
    std::ifstream in(dir.path() / "log.jsonl");
    std::string line;
    std::size_t lines = 0;
    nlohmann::json last;
    while (std::getline(in, line)) {
        last = nlohmann::json::parse(line);
        ++lines;
    }
    EXPECT_EQ(lines, 16u);
    EXPECT_TRUE(last.at("final").get<bool>());
}

TEST(Trainer, CheckpointSidecarCarriesIteration) {
    const auto& d = small_data();
    test::TempDir dir("train_ckpt");
    auto cfg = short_config(12);
    const auto r = train(d.init, d.train, cfg, TrainOutputs{std::nullopt, dir.path()});
    std::uint64_t iter = 0;
    std::string rng;
    const auto opt = AdamOptimizer::load(dir.path() / "final.optim", &iter, &rng);
    EXPECT_EQ(iter, 12u);
    EXPECT_EQ(opt.steps(), 12u);
    EXPECT_FALSE(rng.empty());
    EXPECT_EQ(load_ply(dir.path() / "final.ply"), quantize_float32(r.scene));
}

TEST(Trainer, RejectsTooFewCamerasOrBadConfig) {
    const auto& d = small_data();
    CameraSet one;
    one.cameras.push_back(d.train.cameras[0]);
    one.images.push_back(d.train.images[0]);
    EXPECT_THROW(train(d.init, one, short_config()), ConfigError);
    auto cfg = short_config();
    cfg.s_max = 0.0;
    EXPECT_THROW(train(d.init, d.train, cfg), ConfigError);
}

TEST(Trainer, NonFiniteSceneFailsLoudly) {
    const auto& d = small_data();
    auto bad = d.init;
    bad.primitives[4].log_scale.x() = std::numeric_limits<double>::infinity();
    EXPECT_THROW(train(bad, d.train, short_config(3)), Error);
}

TEST(Trainer, LambdaZeroIgnoresRatio) {
    const auto& d = small_data();
    auto cfg = short_config();
    cfg.lambda_reg = 0.0;
    LossBreakdown b;
    const auto g = loss_gradients(d.init, d.train.cameras[0], d.train.images[0], 4.0, cfg, true, &b);
    EXPECT_EQ(b.total, b.weight * b.render);
    EXPECT_EQ(g.size(), d.init.size());
}
