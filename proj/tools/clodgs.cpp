// Command line front end: scene synthesis, training, rendering, evaluation
// protocols and the frame service.

#include "clodgs/camera_set.hpp"
#include "clodgs/error.hpp"
#include "clodgs/eval.hpp"
#include "clodgs/frame_service.hpp"
#include "clodgs/image.hpp"
#include "clodgs/ply_io.hpp"
#include "clodgs/rasterizer.hpp"
#include "clodgs/splat_model.hpp"
#include "clodgs/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace clodgs;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

/// Collects inputs/outputs/parameters and writes <run>/manifest.json.
class Manifest {
public:
    Manifest(std::string command, fs::path run_dir) : command_(std::move(command)), run_dir_(std::move(run_dir)) {
        fs::create_directories(run_dir_);
        j_["command"] = command_;
        j_["version"] = kVersion;
        j_["parameters"] = Json::object();
        j_["inputs"] = Json::object();
        j_["outputs"] = Json::array();
        j_["results"] = Json::object();
    }
    template <typename T>
    void param(const std::string& key, const T& v) { j_["parameters"][key] = v; }
    void input(const std::string& key, const fs::path& p) { j_["inputs"][key] = p.string(); }
    fs::path output(const std::string& name) {
        j_["outputs"].push_back(name);
        const fs::path p = run_dir_ / name;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        return p;
    }
    void result(const std::string& key, const Json& v) { j_["results"][key] = v; }
    void write() const { write_text(run_dir_ / "manifest.json", j_.dump(2) + "\n"); }
    const fs::path& dir() const { return run_dir_; }

private:
    std::string command_;
    fs::path run_dir_;
    Json j_;
};

struct Common {
    std::string run_dir;
    unsigned workers = 1;
    double tau = kDefaultTau;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_run) {
    c.run_dir = default_run;
    sub->add_option("--run-dir", c.run_dir, "Output directory")->capture_default_str();
    sub->add_option("--workers", c.workers, "Render workers (0 = all cores)")->capture_default_str();
    sub->add_option("--tau", c.tau, "Base opacity threshold")->capture_default_str();
}

FrameMode parse_mode(const std::string& s, std::size_t& topk) {
    if (s == "clod") return FrameMode::Clod;
    if (s == "off") return FrameMode::Off;
    if (s.rfind("topk:", 0) == 0) {
        topk = std::stoull(s.substr(5));
        return FrameMode::TopK;
    }
    throw ConfigError("mode must be clod, off or topk:N");
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
    Common common;
    SynthSpec scene;
    std::string layout = "textured-plane";
    CameraSetSpec train_cams;
    std::size_t test_count = 8;
    std::uint64_t test_seed = 99;
    PerturbSpec perturb;
};

void run_synth(SynthArgs& a) {
    a.scene.layout = parse_layout(a.layout);
    Manifest m("synth", a.common.run_dir);
    const GaussianScene gt = generate_synthetic_scene(a.scene);
    save_ply(gt, m.output("scene_gt.ply"));
    const CameraSet train = generate_camera_set(gt, a.train_cams);
    CameraSetSpec test_spec = a.train_cams;
    test_spec.count = a.test_count;
    test_spec.seed = a.test_seed;
    const CameraSet test = generate_camera_set(gt, test_spec);
    save_camera_set(train, m.dir() / "cameras", "train");
    save_camera_set(test, m.dir() / "cameras", "test");
    m.output("cameras/train.json");
    m.output("cameras/test.json");
    save_ply(perturb_scene(gt, a.perturb), m.output("scene_init.ply"));
    m.param("count", a.scene.count);
    m.param("seed", a.scene.seed);
    m.param("layout", a.layout);
    m.param("sh_degree", a.scene.sh_degree);
    m.param("cameras", a.train_cams.count);
    m.param("camera_seed", a.train_cams.seed);
    m.param("width", a.train_cams.width);
    m.param("height", a.train_cams.height);
    m.param("test_cameras", a.test_count);
    m.param("test_seed", a.test_seed);
    m.param("perturb_seed", a.perturb.seed);
    m.write();
    std::cout << "wrote " << gt.size() << " primitives, " << train.size() << " train and " << test.size()
              << " test cameras to " << m.dir() << "\n";
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string scene, cameras, test_cameras, train_config, preset = "desk";
    std::optional<std::size_t> iterations, mechanism_start, checkpoint_every;
    std::optional<double> s_max, lambda_reg, lambda_dssim, temperature;
    std::optional<std::uint64_t> seed;
    bool no_adaptive_weight = false;
    bool quiet = false;
};

void run_train(TrainArgs& a) {
    TrainConfig cfg = a.preset == "full" ? TrainConfig::full_scale() : TrainConfig::desk();
    if (a.preset != "full" && a.preset != "desk") throw ConfigError("preset must be desk or full");
    if (!a.train_config.empty()) {
        std::ifstream in(a.train_config);
        if (!in) throw IoError("cannot open " + a.train_config);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = TrainConfig::from_json(ss.str());
    }
    if (a.iterations) cfg.iterations = *a.iterations;
    if (a.mechanism_start) cfg.mechanism_start_iter = *a.mechanism_start;
    if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
    if (a.s_max) cfg.s_max = *a.s_max;
    if (a.lambda_reg) cfg.lambda_reg = *a.lambda_reg;
    if (a.lambda_dssim) cfg.lambda_dssim = *a.lambda_dssim;
    if (a.temperature) cfg.temperature = *a.temperature;
    if (a.seed) cfg.seed = *a.seed;
    if (a.no_adaptive_weight) cfg.adaptive_weight = false;
    cfg.tau = a.common.tau;
    cfg.workers = a.common.workers;
    cfg.validate();

    Manifest m("train", a.common.run_dir);
    m.input("scene", a.scene);
    m.input("cameras", a.cameras);
    const GaussianScene init = load_ply(a.scene);
    const CameraSet cams = load_camera_set(a.cameras);
    write_text(m.output("train_config.json"), cfg.to_json() + "\n");
    m.param("config", Json::parse(cfg.to_json()));
    TrainOutputs outs;
    outs.log_path = m.output("train_log.jsonl");
    outs.checkpoint_dir = m.dir() / "checkpoints";
    const auto result = train(init, cams, cfg, outs, [&](const StepRecord& r) {
        if (!a.quiet && (r.iteration % 100 == 0 || r.iteration + 1 == cfg.iterations)) {
            std::printf("iter %5zu  s_v %.3f  loss %.5f  rendered %zu/%zu\n", r.iteration, r.loss.s_v, r.loss.total,
                        r.rendered, r.total);
        }
    });
    m.output("checkpoints/final.ply");
    save_ply(result.scene, m.output("model.ply"));
    m.result("train_psnr_sv1", result.final_train_psnr);
    if (!a.test_cameras.empty()) {
        m.input("test_cameras", a.test_cameras);
        const CameraSet test = load_camera_set(a.test_cameras);
        const double p = mean_psnr(result.scene, test, 1.0, cfg.tau, cfg.workers);
        m.result("test_psnr_sv1", p);
        std::printf("held-out PSNR at s_v=1: %.3f dB\n", p);
    }
    std::printf("train PSNR at s_v=1: %.3f dB\n", result.final_train_psnr);
    m.write();
}

// ---- render --------------------------------------------------------------

struct RenderArgs {
    Common common;
    std::string scene, cameras, mode = "clod", out = "frame.png";
    std::size_t camera = 0;
    double s_v = 1.0;
    std::vector<double> orbit;  // azimuth, elevation, radius
    int width = 256, height = 256;
};

void run_render(RenderArgs& a) {
    Manifest m("render", a.common.run_dir);
    m.input("scene", a.scene);
    const GaussianScene scene = load_ply(a.scene);
    Camera cam;
    if (!a.orbit.empty()) {
        if (a.orbit.size() != 3) throw ConfigError("--orbit needs azimuth,elevation,radius");
        OrbitParams o{a.orbit[0], a.orbit[1], a.orbit[2], scene.centroid()};
        cam = orbit_camera(o, a.width, a.height);
    } else {
        if (a.cameras.empty()) throw ConfigError("render needs --cameras with --camera, or --orbit");
        m.input("cameras", a.cameras);
        const CameraSet cams = load_camera_set(a.cameras);
        if (a.camera >= cams.size()) throw ConfigError("camera index out of range");
        cam = cams.cameras[a.camera];
    }
    std::size_t topk = 0;
    const FrameMode mode = parse_mode(a.mode, topk);
    LodQuery q;
    q.s_v = a.s_v;
    q.tau = a.common.tau;
    RenderOptions opts;
    opts.workers = a.common.workers;
    if (mode == FrameMode::Off) q.attenuate = false;
    if (mode == FrameMode::TopK) opts.top_k = topk;
    const auto r = render(scene, cam, q, opts);
    write_png(r.image, m.output(a.out));
    const std::string summary = render_summary_json(r);
    write_text(m.output("render.json"), summary + "\n");
    m.param("s_v", a.s_v);
    m.param("tau", a.common.tau);
    m.param("mode", a.mode);
    m.param("camera", a.camera);
    m.result("render", Json::parse(summary));
    m.write();
    std::cout << summary << "\n";
}

// ---- curve ---------------------------------------------------------------

struct CurveArgs {
    Common common;
    std::string scene, cameras, grid = "1:5:0.5", baseline, baseline_kind = "topk";
};

void run_curve(CurveArgs& a) {
    Manifest m("curve", a.common.run_dir);
    m.input("scene", a.scene);
    m.input("cameras", a.cameras);
    const GaussianScene scene = load_ply(a.scene);
    const CameraSet cams = load_camera_set(a.cameras);
    const auto grid = parse_grid(a.grid);
    const auto points = quality_curve(scene, cams, grid, a.common.tau, a.common.workers);
    write_text(m.output("curve.csv"), curve_csv(points));
    write_text(m.output("curve.json"), curve_json(points) + "\n");
    if (!a.baseline.empty()) {
        m.input("baseline", a.baseline);
        BaselineKind kind;
        if (a.baseline_kind == "topk") kind = BaselineKind::TopK;
        else if (a.baseline_kind == "scale") kind = BaselineKind::ScaleMatched;
        else throw ConfigError("--baseline-kind must be topk or scale");
        const GaussianScene base = load_ply(a.baseline);
        const auto matched = matched_curve(scene, base, kind, cams, grid, a.common.tau, a.common.workers);
        write_text(m.output("matched.csv"), matched_curve_csv(matched));
    }
    m.param("grid", a.grid);
    m.param("tau", a.common.tau);
    m.write();
    std::cout << curve_csv(points);
}

// ---- dlod-compare --------------------------------------------------------

struct CompareArgs {
    Common common;
    std::string high, low, clod, cameras;
    std::size_t camera = 0;
    double low_fraction = 0.2;
    std::vector<double> schedule{4.0, 3.0, 2.0, 1.0};
    bool no_match = false;
};

void run_compare(CompareArgs& a) {
    Manifest m("dlod-compare", a.common.run_dir);
    m.input("high", a.high);
    m.input("cameras", a.cameras);
    const GaussianScene high = load_ply(a.high);
    const GaussianScene clod = a.clod.empty() ? high : load_ply(a.clod);
    const CameraSet cams = load_camera_set(a.cameras);
    if (a.camera >= cams.size()) throw ConfigError("camera index out of range");
    const Camera& cam = cams.cameras[a.camera];
    GaussianScene low;
    if (!a.low.empty()) {
        m.input("low", a.low);
        low = load_ply(a.low);
    } else {
        LodQuery plain;
        plain.tau = a.common.tau;
        plain.attenuate = false;
        const std::size_t n_high = render(high, cam, plain).rendered_count;
        const auto k = static_cast<std::size_t>(std::llround(a.low_fraction * static_cast<double>(n_high)));
        low = topk_prune(high, cam, k, plain);
        save_ply(low, m.output("low_topk.ply"));
    }
    CompareOptions opts;
    opts.schedule = a.schedule;
    opts.match_budget = !a.no_match;
    opts.tau = a.common.tau;
    opts.workers = a.common.workers;
    const auto res = dlod_clod_compare(high, low, clod, cam, cams.images[a.camera], opts);
    write_png(res.dlod, m.output("dlod.png"));
    write_png(res.clod, m.output("clod.png"));
    Json report;
    report["dlod"] = Json::parse(res.dlod_report.to_json());
    report["clod"] = Json::parse(res.clod_report.to_json());
    report["budget_ratio"] = res.budget_ratio;
    report["jump_ratio"] = res.clod_report.max_jump > 0.0 ? res.dlod_report.max_jump / res.clod_report.max_jump
                                                          : std::numeric_limits<double>::infinity();
    write_text(m.output("report.json"), report.dump(2) + "\n");
    m.param("camera", a.camera);
    m.param("schedule", a.schedule);
    m.param("match_budget", !a.no_match);
    m.result("dlod_max_jump", res.dlod_report.max_jump);
    m.result("clod_max_jump", res.clod_report.max_jump);
    m.result("budget_ratio", res.budget_ratio);
    m.write();
    std::cout << report.dump(2) << "\n";
}

// ---- summarize / info ----------------------------------------------------

struct SummarizeArgs {
    Common common;
    std::string scene, cameras;
};

void run_summarize(SummarizeArgs& a) {
    Manifest m("summarize", a.common.run_dir);
    m.input("scene", a.scene);
    m.input("cameras", a.cameras);
    const GaussianScene scene = load_ply(a.scene);
    const CameraSet cams = load_camera_set(a.cameras);
    const auto s = summarize(scene, cams, fs::path(a.scene), a.common.tau, a.common.workers);
    write_text(m.output("summary.json"), s.to_json() + "\n");
    m.result("summary", Json::parse(s.to_json()));
    m.write();
    std::cout << s.to_json() << "\n";
}

void run_info(const std::string& path) {
    const GaussianScene scene = load_ply(path);
    const auto [lo, hi] = scene.bounds();
    std::vector<double> sigma;
    double opacity = 0.0;
    for (const auto& p : scene.primitives) {
        sigma.push_back(p.sigma_d);
        opacity += p.opacity();
    }
    std::sort(sigma.begin(), sigma.end());
    Json j;
    j["path"] = path;
    j["num_gaussians"] = scene.size();
    j["sh_degree"] = scene.sh_degree;
    j["record_bytes"] = ply_record_size(scene.sh_degree);
    j["file_bytes"] = fs::file_size(path);
    j["bounds"] = {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}};
    j["background"] = {scene.background.x(), scene.background.y(), scene.background.z()};
    if (!sigma.empty()) {
        j["mean_opacity"] = opacity / static_cast<double>(scene.size());
        j["sigma_d"] = {{"min", sigma.front()}, {"median", sigma[sigma.size() / 2]}, {"max", sigma.back()}};
    }
    std::cout << j.dump(2) << "\n";
}

// ---- serve ---------------------------------------------------------------

HttpFrontend* g_frontend = nullptr;

void on_signal(int) {
    if (g_frontend) g_frontend->stop();
}

void run_serve(const std::string& dir, const std::string& host, int port, int max_size) {
    FrameService service(dir, max_size);
    for (const auto& e : service.scenes()) {
        if (!e.error.empty()) std::cerr << "warning: " << e.path << ": " << e.error << "\n";
    }
    HttpFrontend frontend(service);
    const int bound = frontend.bind(host, port);
    g_frontend = &frontend;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "serving " << service.scenes().size() << " scene(s) from " << dir << " on http://" << host << ":"
              << bound << std::endl;
    frontend.run();
    g_frontend = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous level-of-detail Gaussian splatting"};
    app.set_config("--config", "", "TOML/INI file with option values; command line flags override it");
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic scene, cameras and a training init");
    add_common(s, synth.common, "runs/synth");
    s->add_option("--count", synth.scene.count, "Number of primitives")->capture_default_str();
    s->add_option("--seed", synth.scene.seed, "Scene seed")->capture_default_str();
    s->add_option("--layout", synth.layout, "uniform-box, textured-plane or cluster-mix")->capture_default_str();
    s->add_option("--sh-degree", synth.scene.sh_degree, "SH degree 0..3")->capture_default_str();
    s->add_option("--cameras", synth.train_cams.count, "Training cameras")->capture_default_str();
    s->add_option("--camera-seed", synth.train_cams.seed, "Training camera seed")->capture_default_str();
    s->add_option("--width", synth.train_cams.width, "Image width")->capture_default_str();
    s->add_option("--height", synth.train_cams.height, "Image height")->capture_default_str();
    s->add_option("--test-cameras", synth.test_count, "Held-out cameras")->capture_default_str();
    s->add_option("--test-seed", synth.test_seed, "Held-out camera seed")->capture_default_str();
    s->add_option("--perturb-seed", synth.perturb.seed, "Seed of the training initialization")->capture_default_str();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model");
    add_common(t, tr.common, "runs/train");
    t->add_option("--scene", tr.scene, "Initial PLY")->required();
    t->add_option("--cameras", tr.cameras, "Training camera set JSON")->required();
    t->add_option("--test-cameras", tr.test_cameras, "Held-out camera set JSON");
    t->add_option("--train-config", tr.train_config, "TrainConfig JSON");
    t->add_option("--preset", tr.preset, "desk or full")->capture_default_str();
    t->add_option("--iterations", tr.iterations);
    t->add_option("--mechanism-start", tr.mechanism_start);
    t->add_option("--checkpoint-every", tr.checkpoint_every);
    t->add_option("--s-max", tr.s_max);
    t->add_option("--lambda-reg", tr.lambda_reg);
    t->add_option("--lambda-dssim", tr.lambda_dssim);
    t->add_option("--temperature", tr.temperature);
    t->add_option("--seed", tr.seed);
    t->add_flag("--no-adaptive-weight", tr.no_adaptive_weight, "Pin w_s to 1");
    t->add_flag("--quiet", tr.quiet);

    RenderArgs rd;
    auto* r = app.add_subcommand("render", "Render one frame");
    add_common(r, rd.common, "runs/render");
    r->add_option("--scene", rd.scene, "PLY")->required();
    r->add_option("--cameras", rd.cameras, "Camera set JSON");
    r->add_option("--camera", rd.camera, "Camera index")->capture_default_str();
    r->add_option("--orbit", rd.orbit, "azimuth,elevation,radius (degrees, world units)")->delimiter(',');
    r->add_option("--width", rd.width)->capture_default_str();
    r->add_option("--height", rd.height)->capture_default_str();
    r->add_option("--sv", rd.s_v, "Virtual distance scale")->capture_default_str();
    r->add_option("--mode", rd.mode, "clod, off or topk:N")->capture_default_str();
    r->add_option("--out", rd.out, "PNG name inside the run directory")->capture_default_str();

    CurveArgs cv;
    auto* c = app.add_subcommand("curve", "Quality vs rendered primitives over an s_v grid");
    add_common(c, cv.common, "runs/curve");
    c->add_option("--scene", cv.scene, "PLY")->required();
    c->add_option("--cameras", cv.cameras, "Camera set JSON")->required();
    c->add_option("--grid", cv.grid, "lo:hi:step or a comma list")->capture_default_str();
    c->add_option("--baseline", cv.baseline, "Baseline PLY evaluated at matched counts");
    c->add_option("--baseline-kind", cv.baseline_kind, "topk or scale")->capture_default_str();

    CompareArgs cmp;
    auto* d = app.add_subcommand("dlod-compare", "Four-strip discrete vs continuous LoD comparison");
    add_common(d, cmp.common, "runs/dlod");
    d->add_option("--high", cmp.high, "High quality PLY")->required();
    d->add_option("--low", cmp.low, "Low quality PLY (default: top-K pruned high)");
    d->add_option("--clod", cmp.clod, "CLoD PLY (default: high)");
    d->add_option("--cameras", cmp.cameras, "Camera set JSON")->required();
    d->add_option("--camera", cmp.camera)->capture_default_str();
    d->add_option("--low-fraction", cmp.low_fraction, "Top-K fraction for the default low model")->capture_default_str();
    d->add_option("--schedule", cmp.schedule, "CLoD s_v per strip, left to right")->delimiter(',');
    d->add_flag("--no-match", cmp.no_match, "Use the schedule as given");

    SummarizeArgs sm;
    auto* su = app.add_subcommand("summarize", "PSNR, SSIM, primitive count and file size");
    add_common(su, sm.common, "runs/summary");
    su->add_option("--scene", sm.scene, "PLY")->required();
    su->add_option("--cameras", sm.cameras, "Camera set JSON")->required();

    std::string info_path;
    auto* in = app.add_subcommand("info", "Inspect a PLY");
    in->add_option("scene", info_path, "PLY")->required();

    std::string scenes_dir = ".", host = "127.0.0.1";
    int port = kDefaultPort, max_size = kDefaultMaxSize;
    auto* sv = app.add_subcommand("serve", "HTTP frame service");
    sv->add_option("--scenes-dir", scenes_dir, "Directory of PLY files")->capture_default_str();
    sv->add_option("--host", host)->capture_default_str();
    sv->add_option("--port", port)->capture_default_str();
    sv->add_option("--max-size", max_size, "Largest accepted width/height")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*s) run_synth(synth);
        else if (*t) run_train(tr);
        else if (*r) run_render(rd);
        else if (*c) run_curve(cv);
        else if (*d) run_compare(cmp);
        else if (*su) run_summarize(sm);
        else if (*in) run_info(info_path);
        else if (*sv) run_serve(scenes_dir, host, port, max_size);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
