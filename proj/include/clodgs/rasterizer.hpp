#pragma once

#include "clodgs/camera.hpp"
#include "clodgs/image.hpp"
#include "clodgs/lod.hpp"
#include "clodgs/projection.hpp"
#include "clodgs/splat_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clodgs {

inline constexpr int kTileSize = 16;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinTransmittance = 1e-4;

struct RenderOptions {
    /// Tile workers; 0 selects std::thread::hardware_concurrency(). The output
    /// does not depend on this value.
    unsigned workers = 1;
    /// Keep the k primitives with the highest attenuated opacity instead of
    /// applying the tau * s_v threshold.
    std::optional<std::size_t> top_k;
};

/// Forward render output plus the state the backward pass needs.
struct RenderArtifacts {
    Image image;
    std::vector<std::uint8_t> mask;     // M_i per primitive
    std::size_t rendered_count = 0;
    std::size_t total = 0;
    double eta_actual = 0.0;            // rendered_count / total
    std::vector<double> final_transmittance;  // per pixel
    DistanceField distances;
    std::vector<double> attenuated;     // alpha'' per primitive (0 outside the frustum)
    LodQuery lod;

    // Backward state.
    std::vector<ProjectedSplat> splats;                 // depth sorted
    std::vector<std::vector<std::uint32_t>> tile_lists; // indices into splats
    std::vector<std::uint32_t> pixel_stop;              // list position where compositing ended
    int tiles_x = 0, tiles_y = 0;

    /// Hash of the discrete rendering decisions (mask, per-pixel contributor
    /// sets, clamps). Equal fingerprints mean the render is on one smooth piece.
    std::uint64_t fingerprint = 0;
};

/// Full pipeline: attenuation and mask, culling, projection, global depth
/// sort, tile binning, front-to-back compositing over scene.background.
/// Throws RenderError naming the primitive when a parameter is non-finite.
RenderArtifacts render(const GaussianScene& scene, const Camera& cam, const LodQuery& lod,
                       const RenderOptions& options = {});

/// Backward pass for a previous render(scene, cam, ...) call. `loss_grad` is
/// dL/d(image); `attenuated_grad`, when non-empty, is an extra dL/d(alpha'')
/// per primitive (used for the rendered-ratio regularizer). Primitives outside
/// the mask get no gradient from the image term.
ParamGradients render_backward(const GaussianScene& scene, const Camera& cam, const RenderArtifacts& fwd,
                               const Image& loss_grad, std::span<const double> attenuated_grad = {},
                               const RenderOptions& options = {});

/// Convenience: render followed by render_backward.
ParamGradients render_with_gradients(const GaussianScene& scene, const Camera& cam, const LodQuery& lod,
                                     const Image& loss_grad, const RenderOptions& options = {});

/// {rendered_count, total, eta_actual, s_v, tau} as a JSON string.
std::string render_summary_json(const RenderArtifacts& a);

}  // namespace clodgs
