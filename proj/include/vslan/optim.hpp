#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vslan/params.hpp"
#include "vslan/tensor.hpp"

namespace vslan {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 10.0; // global-norm gradient clip, applied before the update
};

struct AdamState {
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
    int64_t step = 0;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the factor applied (1.0 when no clipping happened).
inline double clip_global_norm(ParamMap& params, double max_norm) {
    double sq = 0.0;
    for (auto& [name, t] : params) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) sq += g * g;
    }
    double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return 1.0;
    double scale = max_norm / norm;
    for (auto& [name, t] : params) {
        if (!t.has_grad()) continue;
        for (double& g : t.grad_mut()) g *= scale;
    }
    return scale;
}

// One Adam update with bias correction over every parameter, preceded by
// global-norm clipping.
inline void adam_step(ParamMap& params, AdamState& state, const AdamConfig& cfg) {
    clip_global_norm(params, cfg.clip_norm);
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, t] : params) {
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != t.size()) m.assign(t.size(), 0.0);
        if (v.size() != t.size()) v.assign(t.size(), 0.0);
        const std::vector<double>* grad = t.has_grad() ? &t.grad() : nullptr;
        auto& data = t.data();
        for (size_t i = 0; i < data.size(); ++i) {
            double g = grad ? (*grad)[i] : 0.0;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

} // namespace vslan
