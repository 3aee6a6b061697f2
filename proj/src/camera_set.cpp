#include "clodgs/camera_set.hpp"

#include "clodgs/error.hpp"
#include "clodgs/rasterizer.hpp"
#include "clodgs/random.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace clodgs {

void CameraSet::validate() const {
    if (cameras.empty()) throw ConfigError("camera set is empty");
    if (images.size() != cameras.size()) throw ConfigError("camera set has a different number of images and poses");
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        cameras[i].validate();
        if (cameras[i].width != cameras[0].width || cameras[i].height != cameras[0].height) {
            throw ConfigError("camera " + std::to_string(i) + " has a different resolution");
        }
        if (images[i].width() != cameras[i].width || images[i].height() != cameras[i].height) {
            throw ConfigError("image " + std::to_string(i) + " does not match its camera resolution");
        }
    }
}

CameraSet generate_camera_set(const GaussianScene& scene, const CameraSetSpec& spec) {
    if (spec.count < 2) throw ConfigError("camera set needs at least 2 cameras");
    scene.validate();
    const Vec3 centroid = scene.centroid();
    const auto [lo, hi] = scene.bounds();
    if ((hi - lo).maxCoeff() <= 0.0) throw ConfigError("scene extent is degenerate (zero bounding box)");
    double radius = 0.0;
    for (const auto& p : scene.primitives) radius = std::max(radius, (p.position - centroid).norm());

    Rng rng(spec.seed);
    CameraSet set;
    LodQuery plain;
    plain.attenuate = false;
    for (std::size_t i = 0; i < spec.count; ++i) {
        OrbitParams orbit;
        orbit.target = centroid;
        // Stratified azimuth keeps the views spread around the scene.
        orbit.azimuth_deg = 360.0 * (static_cast<double>(i) + rng.uniform()) / static_cast<double>(spec.count);
        orbit.elevation_deg = rng.uniform(spec.min_elevation_deg, spec.max_elevation_deg);
        orbit.radius = radius * rng.uniform(spec.min_radius_factor, spec.max_radius_factor);
        Camera cam = orbit_camera(orbit, spec.width, spec.height, spec.fov_y_deg);
        set.images.push_back(render(scene, cam, plain).image);
        set.cameras.push_back(cam);
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.ppm", i);
        set.image_paths.emplace_back(name);
    }
    return set;
}

void save_camera_set(const CameraSet& set, const std::filesystem::path& dir, const std::string& name) {
    set.validate();
    std::filesystem::create_directories(dir / name);
    const Camera& c0 = set.cameras.front();
    nlohmann::ordered_json j;
    j["width"] = c0.width;
    j["height"] = c0.height;
    j["fx"] = c0.fx;
    j["fy"] = c0.fy;
    j["cx"] = c0.cx;
    j["cy"] = c0.cy;
    j["near"] = c0.near;
    j["far"] = c0.far;
    j["frames"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
        std::vector<double> pose(16);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) pose[r * 4 + c] = set.cameras[i].world_to_camera(r, c);
        }
        const std::string rel = name + "/" + std::filesystem::path(set.image_paths[i]).filename().string();
        write_ppm(set.images[i], dir / rel);
        j["frames"].push_back({{"world_to_camera", pose}, {"image", rel}});
    }
    std::ofstream out(dir / (name + ".json"));
    if (!out) throw IoError("cannot write camera set to " + dir.string());
    out << j.dump(2) << "\n";
}

CameraSet load_camera_set(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open " + json_path.string());
    nlohmann::json j;
    try {
        in >> j;
        CameraSet set;
        Camera base;
        base.width = j.at("width").get<int>();
        base.height = j.at("height").get<int>();
        base.fx = j.at("fx").get<double>();
        base.fy = j.at("fy").get<double>();
        base.cx = j.at("cx").get<double>();
        base.cy = j.at("cy").get<double>();
        base.near = j.value("near", base.near);
        base.far = j.value("far", base.far);
        for (const auto& f : j.at("frames")) {
            const auto pose = f.at("world_to_camera").get<std::vector<double>>();
            if (pose.size() != 16) throw IoError(json_path.string() + ": world_to_camera needs 16 values");
            Camera cam = base;
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = pose[r * 4 + c];
            }
            const std::string rel = f.at("image").get<std::string>();
            set.images.push_back(read_ppm(json_path.parent_path() / rel));
            set.image_paths.push_back(rel);
            set.cameras.push_back(cam);
        }
        set.validate();
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(json_path.string() + ": " + e.what());
    }
}

}  // namespace clodgs
