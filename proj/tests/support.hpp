#pragma once

#include "clodgs/camera.hpp"
#include "clodgs/camera_set.hpp"
#include "clodgs/image.hpp"
#include "clodgs/lod.hpp"
#include "clodgs/losses.hpp"
#include "clodgs/splat_model.hpp"
#include "clodgs/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace clodgs::test {

/// Camera on the -z side of the origin looking at it.
Camera front_camera(int width = 32, int height = 32);

/// n random primitives in a slab in front of front_camera(); sigma_d in
/// [0.5, 3], opacities in [0.2, 0.8], visible footprints of a few pixels.
GaussianScene random_scene(std::size_t n, std::uint64_t seed, int sh_degree = 1);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Scalar training objective rebuilt from the public pieces: render, soft
/// ratio and total_loss. Also returns the render fingerprint.
double objective(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v, const TrainConfig& cfg,
                 bool mechanism_active, std::uint64_t* fingerprint = nullptr);

struct FdReport {
    double max_rel_error = 0.0;
    std::string worst;           // "<class>[prim].k"
    std::size_t checked = 0;
    std::size_t skipped = 0;     // no step size kept the render on one smooth piece
    std::size_t per_class[kParamClassCount] = {};
};

/// Compares loss_gradients against a 5-point central difference of
/// objective() for every parameter. The step shrinks until all four probes
/// share the base fingerprint. Relative error uses max(|a|, |f|, floor).
FdReport finite_difference_check(const GaussianScene& scene, const Camera& cam, const Image& gt, double s_v,
                                 const TrainConfig& cfg, bool mechanism_active, double floor = 1e-7);

/// Training config whose gradient is the exact gradient of objective().
TrainConfig exact_gradient_config(double lambda_reg);

/// Small synthetic scene with train and held-out camera sets.
struct DeskData {
    GaussianScene gt;
    GaussianScene init;
    CameraSet train;
    CameraSet test;
};
DeskData make_desk_data(std::size_t count = 2000, std::size_t train_views = 20, int size = 64,
                        std::uint64_t seed = 1);

}  // namespace clodgs::test
