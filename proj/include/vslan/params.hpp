#pragma once

#include <map>
#include <string>
#include <vector>

#include "vslan/rng.hpp"
#include "vslan/tensor.hpp"

namespace vslan {

enum class Init {
    xavier_uniform, // uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
    zeros,
    ones,
    lstm_bias, // zeros with the forget-gate block set to 1
};

// Named trainable tensors. std::map keeps a stable name order, which the
// optimizer and checkpoint writer rely on for determinism.
class ParamMap {
public:
    diff::Tensor add(const std::string& name, diff::Shape shape, Init init, uint64_t seed) {
        if (params_.count(name))
            throw ShapeError("parameter '" + name + "' registered twice");
        size_t n = diff::numel_of(shape);
        std::vector<double> v(n, 0.0);
        switch (init) {
        case Init::zeros:
            break;
        case Init::ones:
            for (auto& x : v) x = 1.0;
            break;
        case Init::lstm_bias: {
            // gate order i,f,g,o; bias the forget gate open
            size_t h = n / 4;
            for (size_t i = h; i < 2 * h; ++i) v[i] = 1.0;
            break;
        }
        case Init::xavier_uniform: {
            size_t fan_out = shape.size() == 2 ? shape[0] : n;
            size_t fan_in = shape.size() == 2 ? shape[1] : n;
            double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            // per-name seed: values do not depend on registration order
            Rng rng(derive_seed(seed, name));
            for (auto& x : v) x = rng.uniform(-a, a);
            break;
        }
        }
        diff::Tensor t = diff::Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
        params_.emplace(name, t);
        return t;
    }

    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    diff::Tensor get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ShapeError("unknown parameter '" + name + "'");
        return it->second;
    }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    size_t total_elements() const {
        size_t n = 0;
        for (const auto& [name, t] : params_) n += t.size();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    size_t size() const { return params_.size(); }

private:
    std::map<std::string, diff::Tensor> params_;
};

} // namespace vslan
