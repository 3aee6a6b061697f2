#pragma once

#include "clodgs/camera.hpp"
#include "clodgs/image.hpp"
#include "clodgs/splat_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace clodgs {

/// Cameras with their ground-truth images. All frames share one resolution
/// and one set of intrinsics.
struct CameraSet {
    std::vector<Camera> cameras;
    std::vector<Image> images;
    std::vector<std::string> image_paths;  // relative to the JSON document

    std::size_t size() const { return cameras.size(); }
    void validate() const;
};

struct CameraSetSpec {
    std::size_t count = 20;
    std::uint64_t seed = 3;
    int width = 64;
    int height = 64;
    double fov_y_deg = 50.0;
    double min_radius_factor = 1.6;  // times the scene bounding radius
    double max_radius_factor = 2.2;
    double min_elevation_deg = 35.0;
    double max_elevation_deg = 75.0;
};

/// Orbit cameras around the scene centroid with ground truth rendered at
/// s_v = 1 with attenuation disabled. Throws ConfigError for count < 2 or a
/// degenerate scene extent.
CameraSet generate_camera_set(const GaussianScene& scene, const CameraSetSpec& spec);

/// Writes `<dir>/<name>.json` plus one PPM per frame under `<dir>/<name>/`.
void save_camera_set(const CameraSet& set, const std::filesystem::path& dir, const std::string& name);

/// Reads the JSON document and the referenced images.
CameraSet load_camera_set(const std::filesystem::path& json_path);

}  // namespace clodgs
