#pragma once

#include "clodgs/camera_set.hpp"
#include "clodgs/image.hpp"
#include "clodgs/lod.hpp"
#include "clodgs/rasterizer.hpp"
#include "clodgs/splat_model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace clodgs {

struct CurvePoint {
    double s_v = 1.0;
    double ratio = 0.0;  // mean rendered_count / N_total
    double count = 0.0;  // mean rendered_count
    double psnr = 0.0;
    double ssim = 0.0;
};

/// Ascending grid lo, lo + step, ... up to hi (inclusive within 1e-9).
std::vector<double> make_grid(double lo, double hi, double step);
/// "lo:hi:step" or a comma separated list. Throws ConfigError.
std::vector<double> parse_grid(const std::string& text);

/// Renders every camera at every grid value and averages per grid point.
/// Throws ConfigError for an empty camera set or an unsorted grid / min < 1.
std::vector<CurvePoint> quality_curve(const GaussianScene& scene, const CameraSet& cameras,
                                      const std::vector<double>& grid, double tau = kDefaultTau,
                                      unsigned workers = 1);

/// CSV with header s_v,ratio,count,psnr,ssim; fixed %.17g formatting.
std::string curve_csv(const std::vector<CurvePoint>& points);
std::string curve_json(const std::vector<CurvePoint>& points);

/// Rendered count of the CLoD mask for one view, without rasterizing.
std::size_t mask_count(const GaussianScene& scene, const Camera& cam, const LodQuery& q);

/// Smallest-error s_v in [1, 1/tau) whose CLoD mask count is closest to
/// `target` (bisection on the non-increasing count).
double match_scale(const GaussianScene& scene, const Camera& cam, std::size_t target, double tau = kDefaultTau);

/// Render keeping the k primitives with the highest attenuated opacity at
/// q.s_v, ignoring the tau * s_v threshold.
RenderArtifacts topk_opacity_render(const GaussianScene& scene, const Camera& cam, std::size_t k, const LodQuery& q,
                                    unsigned workers = 1);

/// Sub-scene made of the k primitives topk_opacity_render would keep.
GaussianScene topk_prune(const GaussianScene& scene, const Camera& cam, std::size_t k, const LodQuery& q);

enum class BaselineKind { TopK, ScaleMatched };

/// A CLoD grid point with a baseline evaluated at the same per-view counts.
struct MatchedPoint {
    CurvePoint clod;
    CurvePoint baseline;           // baseline.s_v is the mean matched scale
    double max_count_error = 0.0;  // max over views of |count_b - count_c| / max(count_c, 1)
};

/// For every grid value and camera, renders `model` with the CLoD mask and
/// `baseline` at the same rendered count: top-K ranking (TopK) or the
/// baseline's own CLoD mask at a bisected scale (ScaleMatched).
std::vector<MatchedPoint> matched_curve(const GaussianScene& model, const GaussianScene& baseline,
                                        BaselineKind kind, const CameraSet& cameras,
                                        const std::vector<double>& grid, double tau = kDefaultTau,
                                        unsigned workers = 1);

std::string matched_curve_csv(const std::vector<MatchedPoint>& points);

/// Column ranges [x0, x1) splitting `width` into `regions` strips whose
/// widths differ by at most one pixel (largest remainder).
std::vector<std::pair<int, int>> split_strips(int width, int regions = 4);

struct RegionStats {
    int x0 = 0, x1 = 0;
    double psnr = 0.0;   // strip vs ground truth
    double ssim = 0.0;
    std::size_t count = 0;  // rendered primitives of the configuration used
    double s_v = 1.0;
    std::string source;  // "low", "high" or "clod"
};

struct RegionReport {
    std::string mode;  // "dlod" or "clod"
    std::vector<RegionStats> regions;
    /// Jump at boundary r: |PSNR(config r) - PSNR(config r+1)| on the pixels
    /// of strips r and r+1, so identical configurations give exactly zero.
    std::vector<double> boundary_jumps;
    /// |PSNR(strip r) - PSNR(strip r+1)| with each strip scored on itself.
    std::vector<double> strip_deltas;
    double max_jump = 0.0;
    double mean_count = 0.0;  // primitive budget: mean count over strips

    std::string to_json() const;
};

struct CompareOptions {
    std::vector<double> schedule{4.0, 3.0, 2.0, 1.0};  // CLoD s_v per strip, left to right
    bool match_budget = true;  // rescale a linear schedule so the CLoD budget matches DLoD
    double tau = kDefaultTau;
    unsigned workers = 1;
    int regions = 4;
};

struct CompareResult {
    Image dlod;
    Image clod;
    RegionReport dlod_report;
    RegionReport clod_report;
    double budget_ratio = 1.0;  // clod mean count / dlod mean count
};

/// DLoD composite: left half of the strips from `low`, right half from `high`,
/// both rendered without attenuation. CLoD composite: `clod` rendered once
/// per strip at the schedule's s_v.
CompareResult dlod_clod_compare(const GaussianScene& high, const GaussianScene& low, const GaussianScene& clod,
                                const Camera& cam, const Image& gt, const CompareOptions& options = {});

struct SceneSummary {
    double psnr = 0.0;
    double ssim = 0.0;
    std::size_t primitives = 0;
    std::size_t file_bytes = 0;
    double file_mb = 0.0;  // bytes / 1e6

    std::string to_json() const;
};

/// Metrics at s_v = 1 over the camera set plus the serialized PLY size
/// (`ply_path` when given, otherwise a temporary serialization).
SceneSummary summarize(const GaussianScene& scene, const CameraSet& cameras,
                       const std::optional<std::filesystem::path>& ply_path = std::nullopt,
                       double tau = kDefaultTau, unsigned workers = 1);

}  // namespace clodgs
