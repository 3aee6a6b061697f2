#pragma once

#include "clodgs/splat_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace clodgs {

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// Adam over every primitive parameter with one learning rate per ParamClass.
/// Moment buffers reuse the primitive layout.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t primitive_count, int coeff_count, AdamSettings settings = {});

    /// One update; `lrs` is indexed by ParamClass. Quaternions are renormalized
    /// afterwards.
    void step(GaussianScene& scene, const ParamGradients& grads, const std::array<double, kParamClassCount>& lrs);

    std::uint64_t steps() const { return steps_; }
    const std::vector<GaussianPrimitive>& first_moment() const { return m_; }
    const std::vector<GaussianPrimitive>& second_moment() const { return v_; }

    /// Binary sidecar: a JSON header line followed by the raw float64 moments.
    void save(const std::filesystem::path& path, std::uint64_t iteration, const std::string& rng_state) const;
    static AdamOptimizer load(const std::filesystem::path& path, std::uint64_t* iteration = nullptr,
                              std::string* rng_state = nullptr);

private:
    AdamSettings settings_;
    int coeff_count_;
    std::uint64_t steps_ = 0;
    std::vector<GaussianPrimitive> m_;
    std::vector<GaussianPrimitive> v_;
};

}  // namespace clodgs
