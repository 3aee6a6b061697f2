#include "clodgs/camera.hpp"
#include "clodgs/camera_set.hpp"
#include "clodgs/error.hpp"
#include "clodgs/eval.hpp"
#include "clodgs/lod.hpp"
#include "clodgs/losses.hpp"
#include "clodgs/metrics.hpp"
#include "clodgs/ply_io.hpp"
#include "clodgs/rasterizer.hpp"
#include "clodgs/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace clodgs;

namespace {

py::array_t<double> to_numpy(const Image& img) {
    py::array_t<double> out({img.height(), img.width(), 3});
    std::memcpy(out.mutable_data(), img.data().data(), img.size() * sizeof(double));
    return out;
}

Image from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ConfigError("image arrays must have shape (H, W, 3)");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.data().data(), a.data(), img.size() * sizeof(double));
    return img;
}

LodQuery make_query(double s_v, double tau, bool attenuate) {
    LodQuery q;
    q.s_v = s_v;
    q.tau = tau;
    q.attenuate = attenuate;
    q.validate();
    return q;
}

py::dict render_result(const RenderArtifacts& a) {
    py::dict d;
    d["image"] = to_numpy(a.image);
    d["rendered_count"] = a.rendered_count;
    d["total"] = a.total;
    d["eta_actual"] = a.eta_actual;
    d["mask"] = py::array_t<std::uint8_t>(static_cast<py::ssize_t>(a.mask.size()), a.mask.data());
    return d;
}

py::dict curve_point(const CurvePoint& p) {
    py::dict d;
    d["s_v"] = p.s_v;
    d["ratio"] = p.ratio;
    d["count"] = p.count;
    d["psnr"] = p.psnr;
    d["ssim"] = p.ssim;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Continuous level-of-detail Gaussian splatting core";

    auto base = py::register_exception<Error>(m, "ClodgsError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<RenderError>(m, "RenderError", base.ptr());
    py::register_exception<TrainError>(m, "TrainError", base.ptr());

    m.attr("DEFAULT_TAU") = kDefaultTau;

    py::class_<GaussianScene>(m, "Scene")
        .def_property_readonly("size", &GaussianScene::size)
        .def_readonly("sh_degree", &GaussianScene::sh_degree)
        .def_property_readonly("background", [](const GaussianScene& s) { return s.background; })
        .def("__len__", &GaussianScene::size)
        .def("bounds", &GaussianScene::bounds)
        .def("centroid", &GaussianScene::centroid)
        .def_property(
            "sigma_d",
            [](const GaussianScene& s) {
                py::array_t<double> out(static_cast<py::ssize_t>(s.size()));
                for (std::size_t i = 0; i < s.size(); ++i) out.mutable_at(i) = s.primitives[i].sigma_d;
                return out;
            },
            [](GaussianScene& s, const py::array_t<double>& v) {
                if (static_cast<std::size_t>(v.size()) != s.size()) throw ConfigError("sigma_d length mismatch");
                for (std::size_t i = 0; i < s.size(); ++i) s.primitives[i].sigma_d = v.at(i);
            })
        .def_property_readonly("positions",
                               [](const GaussianScene& s) {
                                   py::array_t<double> out({static_cast<py::ssize_t>(s.size()), py::ssize_t{3}});
                                   for (std::size_t i = 0; i < s.size(); ++i) {
                                       for (int k = 0; k < 3; ++k) out.mutable_at(i, k) = s.primitives[i].position[k];
                                   }
                                   return out;
                               })
        .def(py::self == py::self);

    py::class_<Camera>(m, "Camera")
        .def_readonly("width", &Camera::width)
        .def_readonly("height", &Camera::height)
        .def_readonly("fx", &Camera::fx)
        .def_readonly("fy", &Camera::fy)
        .def_readonly("cx", &Camera::cx)
        .def_readonly("cy", &Camera::cy)
        .def_readonly("world_to_camera", &Camera::world_to_camera)
        .def("center", &Camera::center);

    py::class_<CameraSet>(m, "CameraSet")
        .def("__len__", &CameraSet::size)
        .def_readonly("cameras", &CameraSet::cameras)
        .def("image", [](const CameraSet& s, std::size_t i) { return to_numpy(s.images.at(i)); }, py::arg("index"));

    m.def("load_ply", &load_ply, py::arg("path"));
    m.def("save_ply", &save_ply, py::arg("scene"), py::arg("path"));
    m.def(
        "synthetic_scene",
        [](std::size_t count, std::uint64_t seed, const std::string& layout, int sh_degree) {
            return generate_synthetic_scene(SynthSpec{count, seed, parse_layout(layout), sh_degree});
        },
        py::arg("count") = 2000, py::arg("seed") = 1, py::arg("layout") = "textured-plane", py::arg("sh_degree") = 1);
    m.def(
        "perturb_scene",
        [](const GaussianScene& s, std::uint64_t seed) {
            PerturbSpec p;
            p.seed = seed;
            return perturb_scene(s, p);
        },
        py::arg("scene"), py::arg("seed") = 11);

    m.def("look_at", &look_at, py::arg("eye"), py::arg("target"), py::arg("up"), py::arg("width"), py::arg("height"),
          py::arg("fov_y_deg") = 50.0);
    m.def(
        "orbit_camera",
        [](double az, double el, double radius, const Vec3& target, int width, int height, double fov) {
            return orbit_camera(OrbitParams{az, el, radius, target}, width, height, fov);
        },
        py::arg("azimuth_deg"), py::arg("elevation_deg"), py::arg("radius"), py::arg("target") = Vec3::Zero(),
        py::arg("width") = 64, py::arg("height") = 64, py::arg("fov_y_deg") = 50.0);
    m.def(
        "camera_set",
        [](const GaussianScene& scene, std::size_t count, std::uint64_t seed, int width, int height) {
            CameraSetSpec spec;
            spec.count = count;
            spec.seed = seed;
            spec.width = width;
            spec.height = height;
            return generate_camera_set(scene, spec);
        },
        py::arg("scene"), py::arg("count") = 20, py::arg("seed") = 3, py::arg("width") = 64, py::arg("height") = 64);
    m.def("load_camera_set", &load_camera_set, py::arg("path"));

    m.def(
        "render",
        [](const GaussianScene& scene, const Camera& cam, double s_v, double tau, bool attenuate,
           std::optional<std::size_t> top_k, unsigned workers) {
            RenderOptions opt;
            opt.workers = workers;
            opt.top_k = top_k;
            RenderArtifacts a;
            {
                py::gil_scoped_release release;
                a = render(scene, cam, make_query(s_v, tau, attenuate), opt);
            }
            return render_result(a);
        },
        py::arg("scene"), py::arg("camera"), py::arg("s_v") = 1.0, py::arg("tau") = kDefaultTau,
        py::arg("attenuate") = true, py::arg("top_k") = py::none(), py::arg("workers") = 1);

    m.def(
        "attenuate_opacity",
        [](double alpha, double d, double sigma_d, double s_v, double tau) {
            return attenuate_opacity(alpha, d, sigma_d, make_query(s_v, tau, true));
        },
        py::arg("alpha"), py::arg("normalized_distance"), py::arg("sigma_d"), py::arg("s_v"),
        py::arg("tau") = kDefaultTau);
    m.def("target_ratio", &target_ratio, py::arg("s_v"));
    m.def("reg_loss", &reg_loss, py::arg("s_v"), py::arg("eta"), py::arg("eta_target"));
    m.def("adaptive_weight", &adaptive_weight, py::arg("s_v"), py::arg("s_max"));

    m.def("psnr", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return psnr(from_numpy(a), from_numpy(b));
    });
    m.def("ssim", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return ssim(from_numpy(a), from_numpy(b));
    });

    m.def(
        "train",
        [](const GaussianScene& initial, const CameraSet& cameras, const std::string& config_json) {
            const TrainConfig cfg = TrainConfig::from_json(config_json.empty() ? "{}" : config_json);
            py::gil_scoped_release release;
            return train(initial, cameras, cfg).scene;
        },
        py::arg("initial"), py::arg("cameras"), py::arg("config_json") = "{}");
    m.def("default_train_config", [] { return TrainConfig::desk().to_json(); });

    m.def(
        "quality_curve",
        [](const GaussianScene& scene, const CameraSet& cameras, const std::vector<double>& grid, double tau,
           unsigned workers) {
            std::vector<CurvePoint> pts;
            {
                py::gil_scoped_release release;
                pts = quality_curve(scene, cameras, grid, tau, workers);
            }
            py::list out;
            for (const auto& p : pts) out.append(curve_point(p));
            return out;
        },
        py::arg("scene"), py::arg("cameras"), py::arg("grid"), py::arg("tau") = kDefaultTau, py::arg("workers") = 1);
    m.def("make_grid", &make_grid, py::arg("lo"), py::arg("hi"), py::arg("step"));
    m.def(
        "summarize",
        [](const GaussianScene& scene, const CameraSet& cameras) { return summarize(scene, cameras).to_json(); },
        py::arg("scene"), py::arg("cameras"));
}
