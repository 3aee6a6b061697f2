#include "clodgs/frame_service.hpp"

#include "clodgs/eval.hpp"
#include "clodgs/ply_io.hpp"
#include "clodgs/rasterizer.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace clodgs {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void bad_request(const std::string& msg) { throw ServiceError("bad_request", 400, msg); }

double bounding_radius(const GaussianScene& scene) {
    const Vec3 c = scene.centroid();
    double r = 0.0;
    for (const auto& p : scene.primitives) r = std::max(r, (p.position - c).norm());
    return r > 0.0 ? r : 1.0;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string SceneEntry::to_json() const {
    Json j;
    j["id"] = id;
    j["file_mb"] = static_cast<double>(file_bytes) / 1e6;
    j["file_bytes"] = file_bytes;
    if (scene) {
        const auto [lo, hi] = scene->bounds();
        j["num_gaussians"] = scene->size();
        j["sh_degree"] = scene->sh_degree;
        j["bounds"] = {{"min", vec_json(lo)}, {"max", vec_json(hi)}};
        j["centroid"] = vec_json(scene->centroid());
        j["radius"] = bounding_radius(*scene);
    } else {
        j["error"] = error;
    }
    return j.dump();
}

std::string mode_string(FrameMode mode, std::size_t topk) {
    switch (mode) {
        case FrameMode::Clod: return "clod";
        case FrameMode::Off: return "off";
        case FrameMode::TopK: return "topk:" + std::to_string(topk);
    }
    return "clod";
}

RenderRequest RenderRequest::from_json(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        bad_request(std::string("request body is not JSON: ") + e.what());
    }
    if (!j.is_object()) bad_request("request body must be a JSON object");
    RenderRequest r;
    try {
        r.scene = j.at("scene").get<std::string>();
        r.width = j.value("width", r.width);
        r.height = j.value("height", r.height);
        r.s_v = j.value("s_v", r.s_v);
        r.tau = j.value("tau", r.tau);
        const std::string mode = j.value("mode", std::string("clod"));
        if (mode == "clod") {
            r.mode = FrameMode::Clod;
        } else if (mode == "off") {
            r.mode = FrameMode::Off;
        } else if (mode.rfind("topk:", 0) == 0) {
            r.mode = FrameMode::TopK;
            const std::string n = mode.substr(5);
            if (n.empty() || !std::all_of(n.begin(), n.end(), ::isdigit)) bad_request("mode topk needs a count, e.g. topk:500");
            r.topk = std::stoull(n);
        } else {
            bad_request("unknown mode '" + mode + "' (expected clod, off or topk:N)");
        }
        if (j.contains("pose")) {
            const auto pose = j.at("pose").get<std::vector<double>>();
            if (pose.size() != 16) bad_request("pose needs 16 row-major values");
            Eigen::Matrix4d m;
            for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = pose[i];
            if (!m.allFinite()) bad_request("pose has non-finite values");
            r.pose = m;
            const auto& intr = j.at("intrinsics");
            r.fx = intr.at("fx").get<double>();
            r.fy = intr.at("fy").get<double>();
            r.cx = intr.value("cx", 0.5 * r.width);
            r.cy = intr.value("cy", 0.5 * r.height);
        } else if (j.contains("orbit")) {
            const auto& o = j.at("orbit");
            r.azimuth_deg = o.value("azimuth", r.azimuth_deg);
            r.elevation_deg = o.value("elevation", r.elevation_deg);
            if (o.contains("radius")) r.radius = o.at("radius").get<double>();
            if (o.contains("target")) {
                const auto t = o.at("target").get<std::vector<double>>();
                if (t.size() != 3) bad_request("orbit target needs 3 values");
                r.target = Vec3(t[0], t[1], t[2]);
            }
            r.fov_y_deg = o.value("fov", r.fov_y_deg);
        }
    } catch (const nlohmann::json::exception& e) {
        bad_request(std::string("malformed request: ") + e.what());
    }
    return r;
}

std::string RenderRequest::to_json() const {
    Json j;
    j["scene"] = scene;
    j["width"] = width;
    j["height"] = height;
    j["s_v"] = s_v;
    j["tau"] = tau;
    j["mode"] = mode_string(mode, topk);
    if (pose) {
        std::vector<double> p(16);
        for (int i = 0; i < 16; ++i) p[i] = (*pose)(i / 4, i % 4);
        j["pose"] = p;
        j["intrinsics"] = {{"fx", fx}, {"fy", fy}, {"cx", cx}, {"cy", cy}};
    } else {
        Json o;
        o["azimuth"] = azimuth_deg;
        o["elevation"] = elevation_deg;
        if (radius) o["radius"] = *radius;
        if (target) o["target"] = vec_json(*target);
        o["fov"] = fov_y_deg;
        j["orbit"] = o;
    }
    return j.dump();
}

std::string FrameResponse::to_json(bool embed_image) const {
    Json j;
    j["rendered_count"] = rendered_count;
    j["total"] = total;
    j["eta_actual"] = eta_actual;
    j["render_ms"] = render_ms;
    j["width"] = image.width();
    j["height"] = image.height();
    j["request"] = Json::parse(request.to_json());
    if (embed_image) {
        j["format"] = "png";
        j["image"] = base64_encode(encode_png(image));
    }
    return j.dump();
}

std::string error_json(const std::string& code, const std::string& message) {
    return Json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

FrameService::FrameService(const std::filesystem::path& scenes_dir, int max_size) : max_size_(max_size) {
    if (max_size <= 0) throw ConfigError("max size must be positive");
    std::error_code ec;
    std::filesystem::directory_iterator it(scenes_dir, ec);
    if (ec) throw IoError("cannot read scenes directory " + scenes_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : it) {
        if (entry.is_regular_file() && entry.path().extension() == ".ply") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        SceneEntry e;
        e.id = f.stem().string();
        e.path = f;
        e.file_bytes = std::filesystem::file_size(f);
        try {
            e.scene = std::make_shared<const GaussianScene>(load_ply(f));
        } catch (const Error& err) {
            e.error = err.what();
        }
        scenes_.push_back(std::move(e));
    }
}

std::string FrameService::list_scenes_json() const {
    std::string s = "[";
    for (std::size_t i = 0; i < scenes_.size(); ++i) {
        if (i) s += ",";
        s += scenes_[i].to_json();
    }
    return s + "]";
}

std::string FrameService::health_json() const {
    return Json{{"status", "ok"}, {"version", kVersion}}.dump();
}

const SceneEntry& FrameService::find(const std::string& id) const {
    for (const auto& e : scenes_) {
        if (e.id == id) {
            if (!e.scene) throw ServiceError("scene_unloadable", 409, "scene '" + id + "' failed to load: " + e.error);
            return e;
        }
    }
    throw ServiceError("unknown_scene", 404, "unknown scene '" + id + "'");
}

FrameResponse FrameService::render_frame(const RenderRequest& req) const {
    const SceneEntry& entry = find(req.scene);
    const GaussianScene& scene = *entry.scene;
    if (req.width <= 0 || req.height <= 0) bad_request("image size must be positive");
    if (req.width > max_size_ || req.height > max_size_) {
        throw ServiceError("oversize", 413,
                           "image size " + std::to_string(req.width) + "x" + std::to_string(req.height) +
                               " exceeds the limit " + std::to_string(max_size_));
    }
    if (!(req.s_v >= 1.0) || !std::isfinite(req.s_v)) bad_request("s_v must be >= 1");
    if (!(req.tau > 0.0 && req.tau < 1.0)) bad_request("tau must lie in (0,1)");

    Camera cam;
    if (req.pose) {
        const Eigen::Matrix4d& m = *req.pose;
        const Mat3 r = m.topLeftCorner<3, 3>();
        if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
            (m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
            bad_request("pose is not a rigid world_to_camera transform");
        }
        cam.width = req.width;
        cam.height = req.height;
        cam.fx = req.fx;
        cam.fy = req.fy;
        cam.cx = req.cx;
        cam.cy = req.cy;
        cam.world_to_camera = m;
    } else {
        OrbitParams o;
        o.azimuth_deg = req.azimuth_deg;
        o.elevation_deg = req.elevation_deg;
        o.radius = req.radius.value_or(2.0 * bounding_radius(scene));
        o.target = req.target.value_or(scene.centroid());
        if (!(o.radius > 0.0)) bad_request("orbit radius must be positive");
        cam = orbit_camera(o, req.width, req.height, req.fov_y_deg);
    }
    try {
        cam.validate();
    } catch (const ConfigError& e) {
        bad_request(e.what());
    }

    LodQuery q;
    q.s_v = req.s_v;
    q.tau = req.tau;
    const auto t0 = std::chrono::steady_clock::now();
    RenderArtifacts a;
    switch (req.mode) {
        case FrameMode::Clod: a = render(scene, cam, q); break;
        case FrameMode::Off:
            q.attenuate = false;
            a = render(scene, cam, q);
            break;
        case FrameMode::TopK: a = topk_opacity_render(scene, cam, req.topk, q); break;
    }
    const auto t1 = std::chrono::steady_clock::now();
    FrameResponse resp;
    resp.image = std::move(a.image);
    resp.rendered_count = a.rendered_count;
    resp.total = a.total;
    resp.eta_actual = a.eta_actual;
    resp.render_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    resp.request = req;
    return resp;
}

struct HttpFrontend::Impl {
    const FrameService& service;
    httplib::Server server;
    explicit Impl(const FrameService& s) : service(s) {}
};

HttpFrontend::HttpFrontend(const FrameService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    const FrameService& svc = service;
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type, Accept"},
                             {"Access-Control-Expose-Headers",
                              "X-Rendered-Count, X-Total, X-Eta-Actual, X-Render-Ms"}});
    srv.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    srv.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) {
        res.set_content(svc.health_json(), "application/json");
    });
    srv.Get("/scenes", [&svc](const httplib::Request&, httplib::Response& res) {
        res.set_content(svc.list_scenes_json(), "application/json");
    });
    srv.Post("/render", [&svc](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto frame = svc.render_frame(RenderRequest::from_json(req.body));
            const std::string accept = req.get_header_value("Accept");
            if (accept.find("image/png") != std::string::npos) {
                const auto png = encode_png(frame.image);
                res.set_header("X-Rendered-Count", std::to_string(frame.rendered_count));
                res.set_header("X-Total", std::to_string(frame.total));
                res.set_header("X-Eta-Actual", std::to_string(frame.eta_actual));
                res.set_header("X-Render-Ms", std::to_string(frame.render_ms));
                res.set_content(std::string(png.begin(), png.end()), "image/png");
            } else {
                res.set_content(frame.to_json(true), "application/json");
            }
        } catch (const ServiceError& e) {
            res.status = e.status();
            res.set_content(error_json(e.code(), e.what()), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(error_json("render_failed", e.what()), "application/json");
        }
    });
}

HttpFrontend::~HttpFrontend() = default;

int HttpFrontend::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p <= 0) throw IoError("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpFrontend::run() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() { impl_->server.stop(); }

}  // namespace clodgs
