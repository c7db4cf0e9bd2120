#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "vslan/errors.hpp"

namespace vslan::diff {

using Shape = std::vector<size_t>;

inline size_t numel_of(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated lazily during backward
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop; // reads this->grad, accumulates into parents
    const char* op = "leaf";
    uint64_t visit_mark = 0;
};

inline void ensure_grad(Node& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

// --- grad mode ------------------------------------------------------------

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

inline bool grad_enabled() { return grad_mode_flag(); }

struct NoGradGuard {
    NoGradGuard() : prev_(grad_mode_flag()) { grad_mode_flag() = false; }
    ~NoGradGuard() { grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// --- debug validation -------------------------------------------------------

inline bool& debug_checks_flag() {
    static bool enabled = false;
    return enabled;
}

inline void set_debug_checks(bool on) { debug_checks_flag() = on; }

inline void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
}

// --- tensor handle ----------------------------------------------------------

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : n_(std::move(n)) {}

    static Tensor from(Shape shape, std::vector<double> value, bool requires_grad = false) {
        if (numel_of(shape) != value.size())
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                             std::to_string(value.size()) + " values");
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        size_t n = numel_of(shape);
        return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        size_t n = numel_of(shape);
        return from(std::move(shape), std::vector<double>(n, v), requires_grad);
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    size_t size() const { return n_->value.size(); }
    size_t rank() const { return n_->shape.size(); }
    size_t rows() const { return n_->shape.at(0); }
    size_t cols() const { return n_->shape.at(1); }
    bool requires_grad() const { return n_->requires_grad; }

    std::vector<double>& data() { return n_->value; }
    const std::vector<double>& data() const { return n_->value; }

    bool has_grad() const { return n_->grad.size() == n_->value.size(); }
    const std::vector<double>& grad() const {
        if (!has_grad()) throw NumericError("tensor has no gradient (run backward first)");
        return n_->grad;
    }
    std::vector<double>& grad_mut() {
        if (!has_grad()) throw NumericError("tensor has no gradient (run backward first)");
        return n_->grad;
    }
    void zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }
    void clear_grad() { n_->grad.clear(); }

    double item() const {
        if (size() != 1) throw ShapeError("item(): tensor is not scalar, shape " + shape_str(shape()));
        return n_->value[0];
    }

    double at(size_t i) const { return n_->value.at(i); }
    double at(size_t r, size_t c) const { return n_->value.at(r * cols() + c); }

    const NodePtr& node() const { return n_; }

private:
    NodePtr n_;
};

namespace detail {

inline Tensor make_op(const char* op, Shape shape, std::vector<double> value,
                      std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    if (debug_checks_flag()) check_finite(op, n->value);
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p->requires_grad) {
                n->requires_grad = true;
                break;
            }
        if (n->requires_grad) {
            n->parents = std::move(parents);
            n->backprop = std::move(backprop);
        }
    }
    return Tensor(std::move(n));
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

} // namespace detail

// --- elementwise ------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape("add", a, b);
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node();
    return detail::make_op("add", a.shape(), std::move(y), {an, bn}, [an, bn](Node& out) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] += out.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape("sub", a, b);
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node();
    return detail::make_op("sub", a.shape(), std::move(y), {an, bn}, [an, bn](Node& out) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] -= out.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape("mul", a, b);
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return detail::make_op("mul", a.shape(), std::move(y), {an, bn}, [an, bn](Node& out) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t i = 0; i < out.grad.size(); ++i) bn->grad[i] += out.grad[i] * an->value[i];
        }
    });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + c;
    auto an = a.node();
    return detail::make_op("add_scalar", a.shape(), std::move(y), {an}, [an](Node& out) {
        ensure_grad(*an);
        for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
    });
}

inline Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * c;
    auto an = a.node();
    return detail::make_op("mul_scalar", a.shape(), std::move(y), {an}, [an, c](Node& out) {
        ensure_grad(*an);
        for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i] * c;
    });
}

inline Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

// --- activations ------------------------------------------------------------

inline Tensor relu(const Tensor& a) {
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto an = a.node();
    return detail::make_op("relu", a.shape(), std::move(y), {an}, [an](Node& out) {
        ensure_grad(*an);
        for (size_t i = 0; i < out.grad.size(); ++i)
            if (an->value[i] > 0.0) an->grad[i] += out.grad[i];
    });
}

// alpha = 1
inline Tensor elu(const Tensor& a) {
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) {
        double x = a.data()[i];
        y[i] = x > 0.0 ? x : std::expm1(x);
    }
    auto an = a.node();
    return detail::make_op("elu", a.shape(), std::move(y), {an}, [an](Node& out) {
        ensure_grad(*an);
        for (size_t i = 0; i < out.grad.size(); ++i) {
            double d = an->value[i] > 0.0 ? 1.0 : out.value[i] + 1.0;
            an->grad[i] += out.grad[i] * d;
        }
    });
}

inline Tensor sigmoid(const Tensor& a) {
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) {
        double x = a.data()[i];
        y[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    auto an = a.node();
    return detail::make_op("sigmoid", a.shape(), std::move(y), {an}, [an](Node& out) {
        ensure_grad(*an);
        for (size_t i = 0; i < out.grad.size(); ++i) {
            double s = out.value[i];
            an->grad[i] += out.grad[i] * s * (1.0 - s);
        }
    });
}

inline Tensor tanh_t(const Tensor& a) {
    std::vector<double> y(a.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(a.data()[i]);
    auto an = a.node();
    return detail::make_op("tanh", a.shape(), std::move(y), {an}, [an](Node& out) {
        ensure_grad(*an);
        for (size_t i = 0; i < out.grad.size(); ++i) {
            double t = out.value[i];
            an->grad[i] += out.grad[i] * (1.0 - t * t);
        }
    });
}

// --- linear -----------------------------------------------------------------

// y = x W^T (+ bias). x is [in] or [N,in], W is [out,in], bias [out].
inline Tensor linear(const Tensor& x, const Tensor& W, const Tensor* bias = nullptr) {
    if (W.rank() != 2) throw ShapeError("linear: weight must be rank 2, got " + shape_str(W.shape()));
    size_t out = W.rows(), in = W.cols();
    size_t xin = x.shape().back();
    if (xin != in)
        throw ShapeError("linear: input dim " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(W.shape()));
    if (bias && (bias->rank() != 1 || bias->size() != out))
        throw ShapeError("linear: bias shape " + shape_str(bias->shape()) + " does not match out dim " +
                         std::to_string(out));
    size_t n = x.rank() == 2 ? x.rows() : 1;
    std::vector<double> y(n * out, 0.0);
    const double* xd = x.data().data();
    const double* wd = W.data().data();
    for (size_t r = 0; r < n; ++r) {
        const double* xr = xd + r * in;
        double* yr = y.data() + r * out;
        for (size_t o = 0; o < out; ++o) {
            const double* wr = wd + o * in;
            double acc = 0.0;
            for (size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
        if (bias)
            for (size_t o = 0; o < out; ++o) yr[o] += bias->data()[o];
    }
    Shape yshape = x.rank() == 2 ? Shape{n, out} : Shape{out};
    auto xn = x.node(), wn = W.node();
    NodePtr bn = bias ? bias->node() : nullptr;
    std::vector<NodePtr> parents{xn, wn};
    if (bn) parents.push_back(bn);
    return detail::make_op("linear", std::move(yshape), std::move(y), std::move(parents),
                           [xn, wn, bn, n, out, in](Node& o) {
        const double* g = o.grad.data();
        if (xn->requires_grad) {
            ensure_grad(*xn);
            for (size_t r = 0; r < n; ++r) {
                const double* gr = g + r * out;
                double* gx = xn->grad.data() + r * in;
                for (size_t k = 0; k < out; ++k) {
                    const double* wr = wn->value.data() + k * in;
                    double gk = gr[k];
                    if (gk == 0.0) continue;
                    for (size_t i = 0; i < in; ++i) gx[i] += gk * wr[i];
                }
            }
        }
        if (wn->requires_grad) {
            ensure_grad(*wn);
            for (size_t r = 0; r < n; ++r) {
                const double* gr = g + r * out;
                const double* xr = xn->value.data() + r * in;
                for (size_t k = 0; k < out; ++k) {
                    double gk = gr[k];
                    if (gk == 0.0) continue;
                    double* gw = wn->grad.data() + k * in;
                    for (size_t i = 0; i < in; ++i) gw[i] += gk * xr[i];
                }
            }
        }
        if (bn && bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t r = 0; r < n; ++r)
                for (size_t k = 0; k < out; ++k) bn->grad[k] += g[r * out + k];
        }
    });
}

inline Tensor linear(const Tensor& x, const Tensor& W, const Tensor& bias) {
    return linear(x, W, &bias);
}

// --- softmax / log-softmax (rank 1) ------------------------------------------

inline Tensor softmax(const Tensor& x) {
    if (x.rank() != 1 || x.size() == 0)
        throw ShapeError("softmax: expects a non-empty rank-1 tensor, got " + shape_str(x.shape()));
    double mx = *std::max_element(x.data().begin(), x.data().end());
    std::vector<double> y(x.size());
    double z = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = std::exp(x.data()[i] - mx);
        z += y[i];
    }
    for (auto& v : y) v /= z;
    auto xn = x.node();
    return detail::make_op("softmax", x.shape(), std::move(y), {xn}, [xn](Node& out) {
        ensure_grad(*xn);
        double dot = 0.0;
        for (size_t i = 0; i < out.grad.size(); ++i) dot += out.grad[i] * out.value[i];
        for (size_t i = 0; i < out.grad.size(); ++i)
            xn->grad[i] += out.value[i] * (out.grad[i] - dot);
    });
}

inline Tensor log_softmax(const Tensor& x) {
    if (x.rank() != 1 || x.size() == 0)
        throw ShapeError("log_softmax: expects a non-empty rank-1 tensor, got " + shape_str(x.shape()));
    double mx = *std::max_element(x.data().begin(), x.data().end());
    double z = 0.0;
    for (double v : x.data()) z += std::exp(v - mx);
    double lz = std::log(z) + mx;
    std::vector<double> y(x.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = x.data()[i] - lz;
    auto xn = x.node();
    return detail::make_op("log_softmax", x.shape(), std::move(y), {xn}, [xn](Node& out) {
        ensure_grad(*xn);
        double gsum = 0.0;
        for (double g : out.grad) gsum += g;
        for (size_t i = 0; i < out.grad.size(); ++i)
            xn->grad[i] += out.grad[i] - std::exp(out.value[i]) * gsum;
    });
}

// --- layer norm ---------------------------------------------------------------

// Normalizes the last dimension of a rank-1 or rank-2 tensor, then applies an
// affine gain/bias. Population variance, eps inside the square root.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
    if (eps <= 0.0) throw ShapeError("layer_norm: eps must be positive");
    size_t z = x.shape().back();
    if (gain.size() != z || bias.size() != z)
        throw ShapeError("layer_norm: gain/bias must match feature dim " + std::to_string(z));
    size_t n = x.rank() == 2 ? x.rows() : 1;
    std::vector<double> y(x.size());
    std::vector<double> inv_std(n), xhat(x.size());
    for (size_t r = 0; r < n; ++r) {
        const double* xr = x.data().data() + r * z;
        double mean = 0.0;
        for (size_t i = 0; i < z; ++i) mean += xr[i];
        mean /= static_cast<double>(z);
        double var = 0.0;
        for (size_t i = 0; i < z; ++i) {
            double d = xr[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(z);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (size_t i = 0; i < z; ++i) {
            double h = (xr[i] - mean) * is;
            xhat[r * z + i] = h;
            y[r * z + i] = h * gain.data()[i] + bias.data()[i];
        }
    }
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    auto ish = std::make_shared<std::vector<double>>(std::move(inv_std));
    auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
    return detail::make_op("layer_norm", x.shape(), std::move(y), {xn, gn, bn},
                           [xn, gn, bn, ish, xh, n, z](Node& out) {
        for (size_t r = 0; r < n; ++r) {
            const double* g = out.grad.data() + r * z;
            const double* h = xh->data() + r * z;
            if (gn->requires_grad) {
                ensure_grad(*gn);
                for (size_t i = 0; i < z; ++i) gn->grad[i] += g[i] * h[i];
            }
            if (bn->requires_grad) {
                ensure_grad(*bn);
                for (size_t i = 0; i < z; ++i) bn->grad[i] += g[i];
            }
            if (xn->requires_grad) {
                ensure_grad(*xn);
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (size_t i = 0; i < z; ++i) {
                    double dh = g[i] * gn->value[i];
                    sum_dh += dh;
                    sum_dh_h += dh * h[i];
                }
                double zinv = 1.0 / static_cast<double>(z);
                double* gx = xn->grad.data() + r * z;
                for (size_t i = 0; i < z; ++i) {
                    double dh = g[i] * gn->value[i];
                    gx[i] += (*ish)[r] * (dh - zinv * sum_dh - h[i] * zinv * sum_dh_h);
                }
            }
        }
    });
}

// --- shape ops ------------------------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (numel_of(shape) != x.size())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
    auto xn = x.node();
    return detail::make_op("reshape", std::move(shape), x.data(), {xn}, [xn](Node& out) {
        ensure_grad(*xn);
        for (size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += out.grad[i];
    });
}

inline Tensor slice(const Tensor& x, size_t start, size_t len) {
    if (x.rank() != 1 || start + len > x.size())
        throw ShapeError("slice: [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") out of range for " + shape_str(x.shape()));
    std::vector<double> y(x.data().begin() + start, x.data().begin() + start + len);
    auto xn = x.node();
    return detail::make_op("slice", {len}, std::move(y), {xn}, [xn, start](Node& out) {
        ensure_grad(*xn);
        for (size_t i = 0; i < out.grad.size(); ++i) xn->grad[start + i] += out.grad[i];
    });
}

inline Tensor row(const Tensor& m, size_t r) {
    if (m.rank() != 2 || r >= m.rows())
        throw ShapeError("row: index " + std::to_string(r) + " out of range for " +
                         shape_str(m.shape()));
    size_t z = m.cols();
    std::vector<double> y(m.data().begin() + r * z, m.data().begin() + (r + 1) * z);
    auto mn = m.node();
    return detail::make_op("row", {z}, std::move(y), {mn}, [mn, r, z](Node& out) {
        ensure_grad(*mn);
        for (size_t i = 0; i < z; ++i) mn->grad[r * z + i] += out.grad[i];
    });
}

inline Tensor pick(const Tensor& x, size_t i) {
    if (x.rank() != 1 || i >= x.size())
        throw ShapeError("pick: index " + std::to_string(i) + " out of range for " +
                         shape_str(x.shape()));
    auto xn = x.node();
    return detail::make_op("pick", {1}, {x.data()[i]}, {xn}, [xn, i](Node& out) {
        ensure_grad(*xn);
        xn->grad[i] += out.grad[0];
    });
}

inline Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 1) throw ShapeError("concat: expects rank-1 tensors");
        total += p.size();
    }
    std::vector<double> y;
    y.reserve(total);
    std::vector<NodePtr> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) {
        y.insert(y.end(), p.data().begin(), p.data().end());
        parents.push_back(p.node());
    }
    auto ps = std::make_shared<std::vector<NodePtr>>(parents);
    return detail::make_op("concat", {total}, std::move(y), std::move(parents), [ps](Node& out) {
        size_t off = 0;
        for (auto& p : *ps) {
            if (p->requires_grad) {
                ensure_grad(*p);
                for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += out.grad[off + i];
            }
            off += p->value.size();
        }
    });
}

inline Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

// --- reductions / row ops ----------------------------------------------------------

inline Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xn = x.node();
    return detail::make_op("sum", {1}, {s}, {xn}, [xn](Node& out) {
        ensure_grad(*xn);
        for (auto& g : xn->grad) g += out.grad[0];
    });
}

inline Tensor sum_rows(const Tensor& m) {
    if (m.rank() != 2) throw ShapeError("sum_rows: expects rank-2, got " + shape_str(m.shape()));
    size_t n = m.rows(), z = m.cols();
    std::vector<double> y(z, 0.0);
    for (size_t r = 0; r < n; ++r)
        for (size_t i = 0; i < z; ++i) y[i] += m.data()[r * z + i];
    auto mn = m.node();
    return detail::make_op("sum_rows", {z}, std::move(y), {mn}, [mn, n, z](Node& out) {
        ensure_grad(*mn);
        for (size_t r = 0; r < n; ++r)
            for (size_t i = 0; i < z; ++i) mn->grad[r * z + i] += out.grad[i];
    });
}

inline Tensor mean_rows(const Tensor& m) {
    return mul_scalar(sum_rows(m), 1.0 / static_cast<double>(m.rows()));
}

// Each row of m scaled by the matching entry of w: y[r,:] = m[r,:] * w[r].
inline Tensor scale_rows(const Tensor& m, const Tensor& w) {
    if (m.rank() != 2 || w.rank() != 1 || w.size() != m.rows())
        throw ShapeError("scale_rows: " + shape_str(m.shape()) + " vs " + shape_str(w.shape()));
    size_t n = m.rows(), z = m.cols();
    std::vector<double> y(m.size());
    for (size_t r = 0; r < n; ++r)
        for (size_t i = 0; i < z; ++i) y[r * z + i] = m.data()[r * z + i] * w.data()[r];
    auto mn = m.node(), wn = w.node();
    return detail::make_op("scale_rows", m.shape(), std::move(y), {mn, wn},
                           [mn, wn, n, z](Node& out) {
        if (mn->requires_grad) {
            ensure_grad(*mn);
            for (size_t r = 0; r < n; ++r)
                for (size_t i = 0; i < z; ++i)
                    mn->grad[r * z + i] += out.grad[r * z + i] * wn->value[r];
        }
        if (wn->requires_grad) {
            ensure_grad(*wn);
            for (size_t r = 0; r < n; ++r) {
                double acc = 0.0;
                for (size_t i = 0; i < z; ++i) acc += out.grad[r * z + i] * mn->value[r * z + i];
                wn->grad[r] += acc;
            }
        }
    });
}

// Every row of m multiplied elementwise by v: y[r,:] = m[r,:] ⊙ v.
inline Tensor rowwise_mul(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || v.size() != m.cols())
        throw ShapeError("rowwise_mul: " + shape_str(m.shape()) + " vs " + shape_str(v.shape()));
    size_t n = m.rows(), z = m.cols();
    std::vector<double> y(m.size());
    for (size_t r = 0; r < n; ++r)
        for (size_t i = 0; i < z; ++i) y[r * z + i] = m.data()[r * z + i] * v.data()[i];
    auto mn = m.node(), vn = v.node();
    return detail::make_op("rowwise_mul", m.shape(), std::move(y), {mn, vn},
                           [mn, vn, n, z](Node& out) {
        if (mn->requires_grad) {
            ensure_grad(*mn);
            for (size_t r = 0; r < n; ++r)
                for (size_t i = 0; i < z; ++i)
                    mn->grad[r * z + i] += out.grad[r * z + i] * vn->value[i];
        }
        if (vn->requires_grad) {
            ensure_grad(*vn);
            for (size_t r = 0; r < n; ++r)
                for (size_t i = 0; i < z; ++i)
                    vn->grad[i] += out.grad[r * z + i] * mn->value[r * z + i];
        }
    });
}

// --- stochastic / divergence ops -----------------------------------------------------

// Reparameterized draw: delta = mu + exp(0.5 * log_var) ⊙ noise.
// Gradients flow to mu and log_var only; noise is treated as a constant.
inline Tensor gaussian_sample(const Tensor& mu, const Tensor& log_var, const Tensor& noise) {
    detail::require_same_shape("gaussian_sample", mu, log_var);
    detail::require_same_shape("gaussian_sample", mu, noise);
    std::vector<double> y(mu.size());
    for (size_t i = 0; i < y.size(); ++i)
        y[i] = mu.data()[i] + std::exp(0.5 * log_var.data()[i]) * noise.data()[i];
    auto mn = mu.node(), ln = log_var.node(), nn = noise.node();
    return detail::make_op("gaussian_sample", mu.shape(), std::move(y), {mn, ln},
                           [mn, ln, nn](Node& out) {
        if (mn->requires_grad) {
            ensure_grad(*mn);
            for (size_t i = 0; i < out.grad.size(); ++i) mn->grad[i] += out.grad[i];
        }
        if (ln->requires_grad) {
            ensure_grad(*ln);
            for (size_t i = 0; i < out.grad.size(); ++i)
                ln->grad[i] += out.grad[i] * 0.5 * std::exp(0.5 * ln->value[i]) * nn->value[i];
        }
    });
}

// Closed-form KL(q ‖ p) between diagonal Gaussians, summed over dimensions.
inline Tensor kl_diag_gaussian(const Tensor& mu_q, const Tensor& log_var_q,
                               const Tensor& mu_p, const Tensor& log_var_p) {
    detail::require_same_shape("kl_diag_gaussian", mu_q, log_var_q);
    detail::require_same_shape("kl_diag_gaussian", mu_q, mu_p);
    detail::require_same_shape("kl_diag_gaussian", mu_q, log_var_p);
    double kl = 0.0;
    for (size_t i = 0; i < mu_q.size(); ++i) {
        double dm = mu_q.data()[i] - mu_p.data()[i];
        double lq = log_var_q.data()[i], lp = log_var_p.data()[i];
        kl += 0.5 * ((lp - lq) + (std::exp(lq) + dm * dm) * std::exp(-lp) - 1.0);
    }
    auto mq = mu_q.node(), lq = log_var_q.node(), mp = mu_p.node(), lp = log_var_p.node();
    return detail::make_op("kl_diag_gaussian", {1}, {kl}, {mq, lq, mp, lp},
                           [mq, lq, mp, lp](Node& out) {
        double g = out.grad[0];
        for (size_t i = 0; i < mq->value.size(); ++i) {
            double dm = mq->value[i] - mp->value[i];
            double elq = std::exp(lq->value[i]);
            double ielp = std::exp(-lp->value[i]);
            if (mq->requires_grad) {
                ensure_grad(*mq);
                mq->grad[i] += g * dm * ielp;
            }
            if (mp->requires_grad) {
                ensure_grad(*mp);
                mp->grad[i] -= g * dm * ielp;
            }
            if (lq->requires_grad) {
                ensure_grad(*lq);
                lq->grad[i] += g * 0.5 * (elq * ielp - 1.0);
            }
            if (lp->requires_grad) {
                ensure_grad(*lp);
                lp->grad[i] += g * 0.5 * (1.0 - (elq + dm * dm) * ielp);
            }
        }
    });
}

// --- LSTM cell ---------------------------------------------------------------------

struct LstmWeights {
    Tensor w_ih; // [4H, d_in]
    Tensor w_hh; // [4H, H]
    Tensor bias; // [4H], gate order i,f,g,o
};

inline std::pair<Tensor, Tensor> lstm_cell(const Tensor& input, const Tensor& h_prev,
                                           const Tensor& c_prev, const LstmWeights& w) {
    size_t H = h_prev.size();
    if (w.w_ih.rows() != 4 * H || w.w_hh.rows() != 4 * H || w.w_hh.cols() != H ||
        c_prev.size() != H || w.bias.size() != 4 * H || w.w_ih.cols() != input.size())
        throw ShapeError("lstm_cell: inconsistent dimensions (input " + shape_str(input.shape()) +
                         ", hidden " + shape_str(h_prev.shape()) + ", w_ih " +
                         shape_str(w.w_ih.shape()) + ")");
    Tensor gates = add(linear(input, w.w_ih, w.bias), linear(h_prev, w.w_hh));
    Tensor i = sigmoid(slice(gates, 0, H));
    Tensor f = sigmoid(slice(gates, H, H));
    Tensor g = tanh_t(slice(gates, 2 * H, H));
    Tensor o = sigmoid(slice(gates, 3 * H, H));
    Tensor c = add(mul(f, c_prev), mul(i, g));
    Tensor h = mul(o, tanh_t(c));
    return {h, c};
}

// --- extension hook -----------------------------------------------------------------

// Custom unary op from user-supplied forward/backward functions. The backward
// function receives (upstream grad, input value, output value) and returns the
// input gradient contribution.
inline Tensor custom_unary(
    const Tensor& x,
    const std::function<std::vector<double>(const std::vector<double>&)>& fwd,
    const std::function<std::vector<double>(const std::vector<double>&, const std::vector<double>&,
                                            const std::vector<double>&)>& bwd) {
    std::vector<double> y = fwd(x.data());
    if (y.size() != x.size()) throw ShapeError("custom_unary: forward changed element count");
    auto xn = x.node();
    return detail::make_op("custom_unary", x.shape(), std::move(y), {xn}, [xn, bwd](Node& out) {
        ensure_grad(*xn);
        std::vector<double> gx = bwd(out.grad, xn->value, out.value);
        for (size_t i = 0; i < gx.size(); ++i) xn->grad[i] += gx[i];
    });
}

// --- backward -----------------------------------------------------------------------

inline std::atomic<uint64_t>& visit_counter() {
    static std::atomic<uint64_t> c{1};
    return c;
}

// Reverse-mode pass from a scalar loss. Gradients accumulate into the .grad
// buffers of every reachable tensor with requires_grad; buffers are not
// cleared here, so successive calls accumulate.
inline void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw NumericError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    Node* root = loss.node().get();
    if (!root->requires_grad) return; // nothing reachable wants gradients
    uint64_t mark = visit_counter().fetch_add(1, std::memory_order_relaxed);

    // Iterative post-order DFS; reversed order is topological (consumers first).
    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root, 0);
    root->visit_mark = mark;
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && p->visit_mark != mark) {
                p->visit_mark = mark;
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    ensure_grad(*root);
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad.size() == n->value.size()) n->backprop(*n);
    }
}

} // namespace vslan::diff
