#include "clodgs/optimizer.hpp"

#include "clodgs/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace clodgs {

AdamOptimizer::AdamOptimizer(std::size_t primitive_count, int coeff_count, AdamSettings settings)
    : settings_(settings),
      coeff_count_(coeff_count),
      m_(primitive_count, zero_primitive()),
      v_(primitive_count, zero_primitive()) {}

void AdamOptimizer::step(GaussianScene& scene, const ParamGradients& grads,
                         const std::array<double, kParamClassCount>& lrs) {
    if (grads.size() != scene.size() || m_.size() != scene.size()) {
        throw TrainError("optimizer state does not match the scene size");
    }
    ++steps_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < scene.size(); ++i) {
        auto& p = scene.primitives[i];
        for (int c = 0; c < kParamClassCount; ++c) {
            const auto cls = static_cast<ParamClass>(c);
            if (cls == ParamClass::ShRest && coeff_count_ <= 1) continue;
            auto param = param_block(p, cls, coeff_count_);
            auto g = param_block(grads[i], cls, coeff_count_);
            auto m = param_block(m_[i], cls, coeff_count_);
            auto v = param_block(v_[i], cls, coeff_count_);
            const double lr = lrs[c];
            for (std::size_t k = 0; k < param.size(); ++k) {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                param[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + settings_.eps);
            }
        }
        p.rotation.normalize();
    }
}

void AdamOptimizer::save(const std::filesystem::path& path, std::uint64_t iteration,
                         const std::string& rng_state) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    nlohmann::ordered_json h;
    h["format"] = "clodgs-adam-1";
    h["iteration"] = iteration;
    h["steps"] = steps_;
    h["primitives"] = m_.size();
    h["coeff_count"] = coeff_count_;
    h["beta1"] = settings_.beta1;
    h["beta2"] = settings_.beta2;
    h["eps"] = settings_.eps;
    h["rng_state"] = rng_state;
    out << h.dump() << "\n";
    for (const auto* moments : {&m_, &v_}) {
        for (const auto& prim : *moments) {
            for (int c = 0; c < kParamClassCount; ++c) {
                auto block = param_block(prim, static_cast<ParamClass>(c), kMaxShCoeffs);
                out.write(reinterpret_cast<const char*>(block.data()),
                          static_cast<std::streamsize>(block.size() * sizeof(double)));
            }
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

AdamOptimizer AdamOptimizer::load(const std::filesystem::path& path, std::uint64_t* iteration,
                                  std::string* rng_state) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": bad optimizer header: " + e.what());
    }
    if (h.value("format", "") != "clodgs-adam-1") throw IoError(path.string() + ": not an optimizer sidecar");
    AdamSettings s{h.at("beta1").get<double>(), h.at("beta2").get<double>(), h.at("eps").get<double>()};
    AdamOptimizer opt(h.at("primitives").get<std::size_t>(), h.at("coeff_count").get<int>(), s);
    opt.steps_ = h.at("steps").get<std::uint64_t>();
    if (iteration) *iteration = h.at("iteration").get<std::uint64_t>();
    if (rng_state) *rng_state = h.at("rng_state").get<std::string>();
    for (auto* moments : {&opt.m_, &opt.v_}) {
        for (auto& prim : *moments) {
            for (int c = 0; c < kParamClassCount; ++c) {
                auto block = param_block(prim, static_cast<ParamClass>(c), kMaxShCoeffs);
                in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size() * sizeof(double)));
            }
        }
    }
    if (!in) throw IoError(path.string() + ": truncated optimizer sidecar");
    return opt;
}

}  // namespace clodgs
