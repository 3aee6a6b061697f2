#include "clodgs/eval.hpp"

#include "clodgs/error.hpp"
#include "clodgs/metrics.hpp"
#include "clodgs/ply_io.hpp"
#include "parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unistd.h>

namespace clodgs {

std::vector<double> make_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("grid needs step > 0 and hi >= lo");
    std::vector<double> grid;
    for (std::size_t i = 0;; ++i) {
        const double v = lo + step * static_cast<double>(i);
        if (v > hi + 1e-9) break;
        grid.push_back(v);
    }
    return grid;
}

std::vector<double> parse_grid(const std::string& text) {
    try {
        if (text.find(':') != std::string::npos) {
            double lo, hi, step;
            char c1, c2;
            std::istringstream in(text);
            if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':') {
                throw ConfigError("grid '" + text + "' is not lo:hi:step");
            }
            return make_grid(lo, hi, step);
        }
        std::vector<double> grid;
        std::stringstream in(text);
        std::string item;
        while (std::getline(in, item, ',')) grid.push_back(std::stod(item));
        if (grid.empty()) throw ConfigError("empty grid");
        return grid;
    } catch (const std::invalid_argument&) {
        throw ConfigError("grid '" + text + "' is not numeric");
    }
}

namespace {

void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("empty s_v grid");
    if (grid.front() < 1.0) throw ConfigError("s_v grid must start at >= 1");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("s_v grid must be sorted ascending");
}

LodQuery query(double s_v, double tau) {
    LodQuery q;
    q.s_v = s_v;
    q.tau = tau;
    return q;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::size_t> topk_order(const GaussianScene& scene, const Camera& cam, const LodQuery& q) {
    const DistanceField field = compute_distances(scene, cam);
    const auto att = attenuated_opacities(scene, field, q);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (field.in_frustum[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return att[a] > att[b]; });
    return order;
}

double psnr_jump(double a, double b) {
    if (a == b) return 0.0;
    return std::abs(a - b);
}

}  // namespace

std::vector<CurvePoint> quality_curve(const GaussianScene& scene, const CameraSet& cameras,
                                      const std::vector<double>& grid, double tau, unsigned workers) {
    if (cameras.size() == 0) throw ConfigError("empty camera set");
    check_grid(grid);
    cameras.validate();
    const std::size_t n_cam = cameras.size();
    struct Cell {
        double count, psnr, ssim;
    };
    std::vector<Cell> cells(grid.size() * n_cam);
    detail::parallel_for(cells.size(), workers, [&](std::size_t idx) {
        const std::size_t g = idx / n_cam, c = idx % n_cam;
        const auto a = render(scene, cameras.cameras[c], query(grid[g], tau));
        cells[idx] = {static_cast<double>(a.rendered_count), psnr(a.image, cameras.images[c]),
                      ssim(a.image, cameras.images[c])};
    });
    std::vector<CurvePoint> out;
    const double n_total = static_cast<double>(std::max<std::size_t>(scene.size(), 1));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        CurvePoint p;
        p.s_v = grid[g];
        for (std::size_t c = 0; c < n_cam; ++c) {
            const Cell& cell = cells[g * n_cam + c];
            p.count += cell.count;
            p.psnr += cell.psnr;
            p.ssim += cell.ssim;
        }
        p.count /= static_cast<double>(n_cam);
        p.psnr /= static_cast<double>(n_cam);
        p.ssim /= static_cast<double>(n_cam);
        p.ratio = p.count / n_total;
        out.push_back(p);
    }
    return out;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
    std::string s = "s_v,ratio,count,psnr,ssim\n";
    for (const auto& p : points) {
        s += fmt(p.s_v) + "," + fmt(p.ratio) + "," + fmt(p.count) + "," + fmt(p.psnr) + "," + fmt(p.ssim) + "\n";
    }
    return s;
}

std::string curve_json(const std::vector<CurvePoint>& points) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& p : points) {
        j.push_back({{"s_v", p.s_v}, {"ratio", p.ratio}, {"count", p.count}, {"psnr", p.psnr}, {"ssim", p.ssim}});
    }
    return j.dump(2);
}

std::size_t mask_count(const GaussianScene& scene, const Camera& cam, const LodQuery& q) {
    const DistanceField field = compute_distances(scene, cam);
    const auto att = attenuated_opacities(scene, field, q);
    return compute_mask(att, field.in_frustum, q).rendered;
}

double match_scale(const GaussianScene& scene, const Camera& cam, std::size_t target, double tau) {
    const DistanceField field = compute_distances(scene, cam);
    auto count_at = [&](double s) {
        const LodQuery q = query(s, tau);
        return compute_mask(attenuated_opacities(scene, field, q), field.in_frustum, q).rendered;
    };
    double lo = 1.0, hi = (1.0 / tau) * (1.0 - 1e-12);
    if (count_at(lo) <= target) return lo;
    if (count_at(hi) >= target) return hi;
    // count(lo) > target >= count(hi)
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (count_at(mid) > target) lo = mid;
        else hi = mid;
    }
    const auto c_lo = count_at(lo), c_hi = count_at(hi);
    const auto err = [&](std::size_t c) { return c > target ? c - target : target - c; };
    return err(c_lo) < err(c_hi) ? lo : hi;
}

RenderArtifacts topk_opacity_render(const GaussianScene& scene, const Camera& cam, std::size_t k, const LodQuery& q,
                                    unsigned workers) {
    RenderOptions opts;
    opts.workers = workers;
    opts.top_k = k;
    return render(scene, cam, q, opts);
}

GaussianScene topk_prune(const GaussianScene& scene, const Camera& cam, std::size_t k, const LodQuery& q) {
    auto order = topk_order(scene, cam, q);
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    GaussianScene out;
    out.sh_degree = scene.sh_degree;
    out.background = scene.background;
    for (std::size_t i : order) out.primitives.push_back(scene.primitives[i]);
    return out;
}

std::vector<MatchedPoint> matched_curve(const GaussianScene& model, const GaussianScene& baseline,
                                        BaselineKind kind, const CameraSet& cameras,
                                        const std::vector<double>& grid, double tau, unsigned workers) {
    if (cameras.size() == 0) throw ConfigError("empty camera set");
    check_grid(grid);
    cameras.validate();
    const std::size_t n_cam = cameras.size();
    struct Cell {
        double count, psnr, ssim, b_count, b_psnr, b_ssim, b_scale, err;
    };
    std::vector<Cell> cells(grid.size() * n_cam);
    detail::parallel_for(cells.size(), workers, [&](std::size_t idx) {
        const std::size_t g = idx / n_cam, c = idx % n_cam;
        const Camera& cam = cameras.cameras[c];
        const Image& gt = cameras.images[c];
        const LodQuery q = query(grid[g], tau);
        const auto a = render(model, cam, q);
        RenderArtifacts b;
        double b_scale = grid[g];
        if (kind == BaselineKind::TopK) {
            b = topk_opacity_render(baseline, cam, a.rendered_count, q);
        } else {
            b_scale = match_scale(baseline, cam, a.rendered_count, tau);
            b = render(baseline, cam, query(b_scale, tau));
        }
        const double cc = static_cast<double>(a.rendered_count), bc = static_cast<double>(b.rendered_count);
        cells[idx] = {cc, psnr(a.image, gt), ssim(a.image, gt), bc, psnr(b.image, gt), ssim(b.image, gt), b_scale,
                      std::abs(bc - cc) / std::max(cc, 1.0)};
    });
    std::vector<MatchedPoint> out;
    const double n_model = static_cast<double>(std::max<std::size_t>(model.size(), 1));
    const double n_base = static_cast<double>(std::max<std::size_t>(baseline.size(), 1));
    const double inv = 1.0 / static_cast<double>(n_cam);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        MatchedPoint p;
        p.clod.s_v = grid[g];
        p.baseline.s_v = 0.0;
        for (std::size_t c = 0; c < n_cam; ++c) {
            const Cell& e = cells[g * n_cam + c];
            p.clod.count += e.count * inv;
            p.clod.psnr += e.psnr * inv;
            p.clod.ssim += e.ssim * inv;
            p.baseline.count += e.b_count * inv;
            p.baseline.psnr += e.b_psnr * inv;
            p.baseline.ssim += e.b_ssim * inv;
            p.baseline.s_v += e.b_scale * inv;
            p.max_count_error = std::max(p.max_count_error, e.err);
        }
        p.clod.ratio = p.clod.count / n_model;
        p.baseline.ratio = p.baseline.count / n_base;
        out.push_back(p);
    }
    return out;
}

std::string matched_curve_csv(const std::vector<MatchedPoint>& points) {
    std::string s =
        "s_v,ratio,count,psnr,ssim,baseline_s_v,baseline_ratio,baseline_count,baseline_psnr,baseline_ssim,"
        "max_count_error\n";
    for (const auto& p : points) {
        s += fmt(p.clod.s_v) + "," + fmt(p.clod.ratio) + "," + fmt(p.clod.count) + "," + fmt(p.clod.psnr) + "," +
             fmt(p.clod.ssim) + "," + fmt(p.baseline.s_v) + "," + fmt(p.baseline.ratio) + "," +
             fmt(p.baseline.count) + "," + fmt(p.baseline.psnr) + "," + fmt(p.baseline.ssim) + "," +
             fmt(p.max_count_error) + "\n";
    }
    return s;
}

std::vector<std::pair<int, int>> split_strips(int width, int regions) {
    if (regions <= 0 || width < regions) throw ConfigError("cannot split width " + std::to_string(width) +
                                                           " into " + std::to_string(regions) + " strips");
    // Equal shares have identical fractional parts, so the largest remainder
    // goes to the leftmost strips.
    const int base = width / regions, extra = width % regions;
    std::vector<std::pair<int, int>> strips;
    int x = 0;
    for (int r = 0; r < regions; ++r) {
        const int w = base + (r < extra ? 1 : 0);
        strips.emplace_back(x, x + w);
        x += w;
    }
    return strips;
}

std::string RegionReport::to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["regions"] = nlohmann::ordered_json::array();
    for (const auto& r : regions) {
        j["regions"].push_back({{"x0", r.x0}, {"x1", r.x1}, {"source", r.source}, {"s_v", r.s_v},
                                {"count", r.count}, {"psnr", r.psnr}, {"ssim", r.ssim}});
    }
    j["boundary_jumps"] = boundary_jumps;
    j["strip_deltas"] = strip_deltas;
    j["max_jump"] = max_jump;
    j["mean_count"] = mean_count;
    return j.dump(2);
}

namespace {

struct StripConfig {
    Image image;  // full frame
    std::size_t count;
    double s_v;
    std::string source;
};

RegionReport build_report(const std::string& mode, const std::vector<StripConfig>& configs,
                          const std::vector<std::pair<int, int>>& strips, const Image& gt, Image& composite) {
    RegionReport rep;
    rep.mode = mode;
    composite = Image(gt.width(), gt.height());
    for (std::size_t r = 0; r < strips.size(); ++r) {
        const auto [x0, x1] = strips[r];
        const StripConfig& cfg = configs[r];
        for (int y = 0; y < gt.height(); ++y) {
            for (int x = x0; x < x1; ++x) composite.set_pixel(x, y, cfg.image.pixel(x, y));
        }
        RegionStats st;
        st.x0 = x0;
        st.x1 = x1;
        const Image mine = cfg.image.crop_columns(x0, x1), ref = gt.crop_columns(x0, x1);
        st.psnr = psnr(mine, ref);
        st.ssim = mine.width() >= 11 && mine.height() >= 11 ? ssim(mine, ref) : 0.0;
        st.count = cfg.count;
        st.s_v = cfg.s_v;
        st.source = cfg.source;
        rep.mean_count += static_cast<double>(cfg.count) / static_cast<double>(strips.size());
        rep.regions.push_back(st);
    }
    for (std::size_t r = 0; r + 1 < strips.size(); ++r) {
        const int x0 = strips[r].first, x1 = strips[r + 1].second;
        const Image ref = gt.crop_columns(x0, x1);
        const double left = psnr(configs[r].image.crop_columns(x0, x1), ref);
        const double right = psnr(configs[r + 1].image.crop_columns(x0, x1), ref);
        rep.boundary_jumps.push_back(psnr_jump(left, right));
        rep.strip_deltas.push_back(psnr_jump(rep.regions[r].psnr, rep.regions[r + 1].psnr));
    }
    rep.max_jump = rep.boundary_jumps.empty() ? 0.0
                                              : *std::max_element(rep.boundary_jumps.begin(), rep.boundary_jumps.end());
    return rep;
}

}  // namespace

CompareResult dlod_clod_compare(const GaussianScene& high, const GaussianScene& low, const GaussianScene& clod,
                                const Camera& cam, const Image& gt, const CompareOptions& options) {
    if (gt.width() != cam.width || gt.height() != cam.height) throw ConfigError("ground truth does not match camera");
    const auto strips = split_strips(cam.width, options.regions);
    if (options.schedule.size() != strips.size()) {
        throw ConfigError("CLoD schedule needs one s_v per region (" + std::to_string(strips.size()) + ")");
    }
    for (double s : options.schedule) {
        if (s < 1.0) throw ConfigError("CLoD schedule values must be >= 1");
    }
    RenderOptions ropts;
    ropts.workers = options.workers;
    LodQuery plain = query(1.0, options.tau);
    plain.attenuate = false;
    const auto low_r = render(low, cam, plain, ropts);
    const auto high_r = render(high, cam, plain, ropts);

    std::vector<StripConfig> dlod_cfg;
    for (std::size_t r = 0; r < strips.size(); ++r) {
        const bool is_low = r < strips.size() / 2;
        const auto& src = is_low ? low_r : high_r;
        dlod_cfg.push_back({src.image, src.rendered_count, 1.0, is_low ? "low" : "high"});
    }
    CompareResult res;
    res.dlod_report = build_report("dlod", dlod_cfg, strips, gt, res.dlod);

    std::vector<double> schedule = options.schedule;
    if (options.match_budget) {
        // s_r(l) = 1 + l (schedule_r - 1); the mean count is non-increasing in l.
        const DistanceField field = compute_distances(clod, cam);
        const double top = *std::max_element(schedule.begin(), schedule.end());
        auto scaled = [&](double l) {
            std::vector<double> s;
            for (double v : options.schedule) s.push_back(1.0 + l * (v - 1.0));
            return s;
        };
        auto mean_count = [&](double l) {
            double m = 0.0;
            for (double s : scaled(l)) {
                const LodQuery q = query(s, options.tau);
                m += static_cast<double>(compute_mask(attenuated_opacities(clod, field, q), field.in_frustum, q).rendered);
            }
            return m / static_cast<double>(schedule.size());
        };
        const double target = res.dlod_report.mean_count;
        double lo = 0.0, hi = top > 1.0 ? ((1.0 / options.tau) * (1.0 - 1e-12) - 1.0) / (top - 1.0) : 0.0;
        if (hi > 0.0 && mean_count(lo) > target) {
            if (mean_count(hi) >= target) {
                lo = hi;
            } else {
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mean_count(mid) > target) lo = mid;
                    else hi = mid;
                }
                if (std::abs(mean_count(hi) - target) < std::abs(mean_count(lo) - target)) lo = hi;
            }
        }
        schedule = scaled(lo);
    }
    std::vector<StripConfig> clod_cfg;
    for (double s : schedule) {
        const auto a = render(clod, cam, query(s, options.tau), ropts);
        clod_cfg.push_back({a.image, a.rendered_count, s, "clod"});
    }
    res.clod_report = build_report("clod", clod_cfg, strips, gt, res.clod);
    res.budget_ratio = res.dlod_report.mean_count > 0.0 ? res.clod_report.mean_count / res.dlod_report.mean_count : 1.0;
    return res;
}

std::string SceneSummary::to_json() const {
    nlohmann::ordered_json j;
    j["psnr"] = psnr;
    j["ssim"] = ssim;
    j["num_gaussians"] = primitives;
    j["file_bytes"] = file_bytes;
    j["file_mb"] = file_mb;
    return j.dump(2);
}

SceneSummary summarize(const GaussianScene& scene, const CameraSet& cameras,
                       const std::optional<std::filesystem::path>& ply_path, double tau, unsigned workers) {
    const auto point = quality_curve(scene, cameras, {1.0}, tau, workers).front();
    SceneSummary s;
    s.psnr = point.psnr;
    s.ssim = point.ssim;
    s.primitives = scene.size();
    if (ply_path) {
        s.file_bytes = std::filesystem::file_size(*ply_path);
    } else {
        static std::atomic<unsigned> counter{0};
        const auto tmp = std::filesystem::temp_directory_path() /
                         ("clodgs_summary_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".ply");
        save_ply(scene, tmp);
        s.file_bytes = std::filesystem::file_size(tmp);
        std::filesystem::remove(tmp);
    }
    s.file_mb = static_cast<double>(s.file_bytes) / 1e6;
    return s;
}

}  // namespace clodgs
