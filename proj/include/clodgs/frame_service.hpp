#pragma once

#include "clodgs/camera.hpp"
#include "clodgs/error.hpp"
#include "clodgs/image.hpp"
#include "clodgs/splat_model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clodgs {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kDefaultPort = 7878;
inline constexpr int kDefaultMaxSize = 1024;

/// Request failure with a stable machine-readable code and an HTTP status.
class ServiceError : public Error {
public:
    ServiceError(std::string code, int status, const std::string& message)
        : Error(message), code_(std::move(code)), status_(status) {}
    const std::string& code() const { return code_; }
    int status() const { return status_; }

private:
    std::string code_;
    int status_;
};

struct SceneEntry {
    std::string id;  // file stem
    std::filesystem::path path;
    std::size_t file_bytes = 0;
    std::string error;  // non-empty when the file could not be loaded
    std::shared_ptr<const GaussianScene> scene;

    std::string to_json() const;
};

enum class FrameMode { Clod, TopK, Off };

struct RenderRequest {
    std::string scene;
    int width = 256;
    int height = 256;
    double s_v = 1.0;
    double tau = 1.0 / 255.0;
    FrameMode mode = FrameMode::Clod;
    std::size_t topk = 0;
    // Either a pose with intrinsics or an orbit around the scene.
    std::optional<Eigen::Matrix4d> pose;  // world_to_camera, row-major on the wire
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    double azimuth_deg = 45.0, elevation_deg = 45.0;
    std::optional<double> radius;  // default: twice the scene bounding radius
    std::optional<Vec3> target;    // default: scene centroid
    double fov_y_deg = 50.0;

    /// Parses the JSON body. Throws ServiceError("bad_request") on malformed input.
    static RenderRequest from_json(const std::string& body);
    std::string to_json() const;
};

/// "clod", "off" or "topk:N".
std::string mode_string(FrameMode mode, std::size_t topk);

struct FrameResponse {
    Image image;
    std::size_t rendered_count = 0;
    std::size_t total = 0;
    double eta_actual = 0.0;
    double render_ms = 0.0;
    RenderRequest request;

    /// Stats plus the request echo; `embed_image` adds the frame as base64 PNG.
    std::string to_json(bool embed_image) const;
};

/// Read-only scene cache over a directory of PLY files, loaded once at start.
class FrameService {
public:
    /// Throws IoError when the directory cannot be read.
    explicit FrameService(const std::filesystem::path& scenes_dir, int max_size = kDefaultMaxSize);

    const std::vector<SceneEntry>& scenes() const { return scenes_; }
    std::string list_scenes_json() const;
    std::string health_json() const;

    /// Throws ServiceError with codes unknown_scene, bad_request, oversize.
    FrameResponse render_frame(const RenderRequest& req) const;

    int max_size() const { return max_size_; }

private:
    const SceneEntry& find(const std::string& id) const;

    std::vector<SceneEntry> scenes_;
    int max_size_;
};

/// JSON error body {"error": {"code", "message"}}.
std::string error_json(const std::string& code, const std::string& message);

/// HTTP front end: GET /health, GET /scenes, POST /render, CORS on every
/// route. POST /render answers image/png when the Accept header asks for it,
/// JSON with an embedded base64 PNG otherwise.
class HttpFrontend {
public:
    explicit HttpFrontend(const FrameService& service);
    ~HttpFrontend();
    HttpFrontend(const HttpFrontend&) = delete;
    HttpFrontend& operator=(const HttpFrontend&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace clodgs
