#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vslan/tensor.hpp"

namespace vslan::diff {

struct GradCheckReport {
    struct PerInput {
        size_t input_index;
        size_t element;
        double analytic;
        double numeric;
        double rel_err;
    };
    std::vector<PerInput> worst_per_input; // one entry per input tensor
    double max_rel_err = 0.0;
    bool pass = false;
    double tol = 0.0;
};

// Relative error with a unit floor, so near-zero gradients are compared on an
// absolute scale.
inline double grad_rel_err(double analytic, double numeric) {
    double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

// Central finite differences against the tape's analytic gradients. `f` must
// rebuild its graph from the given inputs on every call; the checker perturbs
// input values in place. Throws if two forward passes at the base point differ.
inline GradCheckReport grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& inputs, double h = 1e-5, double tol = 1e-4) {
    Tensor base = f(inputs);
    if (base.size() != 1)
        throw ShapeError("grad_check: function must return a scalar");
    Tensor again = f(inputs);
    if (base.data() != again.data())
        throw NumericError("grad_check: function is not deterministic (two forward passes differ)");

    for (const auto& in : inputs) const_cast<Tensor&>(in).clear_grad();
    backward(base);

    GradCheckReport report;
    report.tol = tol;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor in = inputs[k];
        if (!in.requires_grad()) continue; // constants (e.g. noise) are not checked
        GradCheckReport::PerInput worst{k, 0, 0.0, 0.0, 0.0};
        for (size_t i = 0; i < in.size(); ++i) {
            double saved = in.data()[i];
            in.data()[i] = saved + h;
            double fp = f(inputs).item();
            in.data()[i] = saved - h;
            double fm = f(inputs).item();
            in.data()[i] = saved;
            double numeric = (fp - fm) / (2.0 * h);
            double analytic = in.has_grad() ? in.grad()[i] : 0.0;
            double err = grad_rel_err(analytic, numeric);
            if (err >= worst.rel_err) worst = {k, i, analytic, numeric, err};
        }
        report.worst_per_input.push_back(worst);
        report.max_rel_err = std::max(report.max_rel_err, worst.rel_err);
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

} // namespace vslan::diff
