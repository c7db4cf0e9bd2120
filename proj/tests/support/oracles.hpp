#pragma once

// Independent reference implementations used as test oracles. Everything here
// is plain loops over std::vector<double>, deliberately sharing no code with
// the library's tape ops.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// y = x W^T + b with W stored row-major [out][in]
inline Vec matvec(const Vec& x, const Vec& W, size_t out, size_t in, const Vec* b = nullptr) {
    Vec y(out, 0.0);
    for (size_t o = 0; o < out; ++o) {
        for (size_t i = 0; i < in; ++i) y[o] += W[o * in + i] * x[i];
        if (b) y[o] += (*b)[o];
    }
    return y;
}

// rows of X [n][in] through the same projection
inline Vec matmul_rows(const Vec& X, size_t n, size_t in, const Vec& W, size_t out,
                       const Vec* b = nullptr) {
    Vec Y(n * out, 0.0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (size_t i = 0; i < in; ++i) acc += W[o * in + i] * X[r * in + i];
            if (b) acc += (*b)[o];
            Y[r * out + o] = acc;
        }
    }
    return Y;
}

inline double elu1(double x) { return x > 0.0 ? x : std::exp(x) - 1.0; }
inline double relu1(double x) { return x > 0.0 ? x : 0.0; }
inline double sigmoid1(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec map(const Vec& v, double (*f)(double)) {
    Vec y(v.size());
    for (size_t i = 0; i < v.size(); ++i) y[i] = f(v[i]);
    return y;
}

inline Vec softmax(const Vec& x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    Vec y(x.size());
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx);
        z += y[i];
    }
    for (auto& v : y) v /= z;
    return y;
}

inline Vec log_softmax(const Vec& x) {
    Vec s = softmax(x);
    Vec y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = std::log(s[i]);
    return y;
}

// one LSTM step, scalar loops, gate order i,f,g,o
struct LstmOut {
    Vec h, c;
};
inline LstmOut lstm_step(const Vec& x, const Vec& h_prev, const Vec& c_prev, const Vec& w_ih,
                         const Vec& w_hh, const Vec& bias, size_t H, size_t din) {
    Vec gates(4 * H, 0.0);
    for (size_t k = 0; k < 4 * H; ++k) {
        double acc = bias[k];
        for (size_t i = 0; i < din; ++i) acc += w_ih[k * din + i] * x[i];
        for (size_t i = 0; i < H; ++i) acc += w_hh[k * H + i] * h_prev[i];
        gates[k] = acc;
    }
    LstmOut out;
    out.h.resize(H);
    out.c.resize(H);
    for (size_t i = 0; i < H; ++i) {
        double ig = sigmoid1(gates[i]);
        double fg = sigmoid1(gates[H + i]);
        double gg = std::tanh(gates[2 * H + i]);
        double og = sigmoid1(gates[3 * H + i]);
        out.c[i] = fg * c_prev[i] + ig * gg;
        out.h[i] = og * std::tanh(out.c[i]);
    }
    return out;
}

// one-hidden-layer ReLU MLP: out = W2 * relu(W1 x + b1) + b2
inline Vec mlp2(const Vec& x, const Vec& W1, const Vec& b1, size_t hid, size_t in, const Vec& W2,
                const Vec& b2, size_t out) {
    Vec h = matvec(x, W1, hid, in, &b1);
    for (auto& v : h) v = relu1(v);
    return matvec(h, W2, out, hid, &b2);
}

// closed-form KL(N(mq, e^lq) || N(mp, e^lp)), summed over dims
inline double kl_gauss(const Vec& mq, const Vec& lq, const Vec& mp, const Vec& lp) {
    double kl = 0.0;
    for (size_t i = 0; i < mq.size(); ++i) {
        double dm = mq[i] - mp[i];
        kl += 0.5 * ((lp[i] - lq[i]) + (std::exp(lq[i]) + dm * dm) / std::exp(lp[i]) - 1.0);
    }
    return kl;
}

// ---- LAN block replay -------------------------------------------------------

struct LanWeightsRef {
    Vec W_Q_K, b_Q_K, W_K, b_K, W_Q_V, b_Q_V, W_V, b_V;
    Vec W_bk, b_bk, w_bs, b_bs, W_bl1, b_bl1, W_bl2, b_bl2;
    size_t q, k, v, z, zp, x;
};

struct LanRef {
    Vec attn;          // [N]
    Vec local;         // [z]
    Vec gate;          // [z]
    Vec global_feat;   // [z]
    Vec pooled_keys;   // [N*z]
    Vec pooled_values; // [N*z]
};

inline LanRef lan_replay(const Vec& Q, const Vec& K, const Vec& V, size_t N,
                         const LanWeightsRef& w) {
    LanRef r;
    Vec pq = matvec(Q, w.W_Q_K, w.z, w.q, &w.b_Q_K);
    for (auto& x : pq) x = elu1(x);
    Vec pqv = matvec(Q, w.W_Q_V, w.z, w.q, &w.b_Q_V);
    for (auto& x : pqv) x = elu1(x);
    r.pooled_keys.resize(N * w.z);
    r.pooled_values.resize(N * w.z);
    for (size_t i = 0; i < N; ++i) {
        Vec ki(K.begin() + i * w.k, K.begin() + (i + 1) * w.k);
        Vec vi(V.begin() + i * w.v, V.begin() + (i + 1) * w.v);
        Vec pk = matvec(ki, w.W_K, w.z, w.k, &w.b_K);
        Vec pv = matvec(vi, w.W_V, w.z, w.v, &w.b_V);
        for (size_t j = 0; j < w.z; ++j) {
            r.pooled_keys[i * w.z + j] = elu1(pk[j]) * pq[j];
            r.pooled_values[i * w.z + j] = elu1(pv[j]) * pqv[j];
        }
    }
    Vec scores(N, 0.0);
    for (size_t i = 0; i < N; ++i) {
        Vec bk(r.pooled_keys.begin() + i * w.z, r.pooled_keys.begin() + (i + 1) * w.z);
        Vec inner = matvec(bk, w.W_bk, w.zp, w.z, &w.b_bk);
        for (auto& x : inner) x = relu1(x);
        double s = w.b_bs[0];
        for (size_t j = 0; j < w.zp; ++j) s += w.w_bs[j] * inner[j];
        scores[i] = s;
    }
    r.attn = softmax(scores);
    r.local.assign(w.z, 0.0);
    for (size_t i = 0; i < N; ++i)
        for (size_t j = 0; j < w.z; ++j) r.local[j] += r.attn[i] * r.pooled_values[i * w.z + j];
    Vec squeezed = matvec(r.local, w.W_bl1, w.x, w.z, &w.b_bl1);
    Vec excited = matvec(squeezed, w.W_bl2, w.z, w.x, &w.b_bl2);
    r.gate.resize(w.z);
    for (size_t j = 0; j < w.z; ++j) r.gate[j] = sigmoid1(excited[j]);
    r.global_feat.assign(w.z, 0.0);
    for (size_t i = 0; i < N; ++i)
        for (size_t j = 0; j < w.z; ++j)
            r.global_feat[j] += r.attn[i] * (r.gate[j] * r.pooled_keys[i * w.z + j]);
    return r;
}

// ---- FAN block replay -------------------------------------------------------

inline Vec layer_norm_replay(const Vec& x, const Vec& gain, const Vec& bias, size_t z,
                             double eps = 1e-5) {
    size_t n = x.size() / z;
    Vec y(x.size());
    for (size_t r = 0; r < n; ++r) {
        double mean = 0.0;
        for (size_t i = 0; i < z; ++i) mean += x[r * z + i];
        mean /= double(z);
        double var = 0.0;
        for (size_t i = 0; i < z; ++i) {
            double d = x[r * z + i] - mean;
            var += d * d;
        }
        var /= double(z);
        double is = 1.0 / std::sqrt(var + eps);
        for (size_t i = 0; i < z; ++i)
            y[r * z + i] = (x[r * z + i] - mean) * is * gain[i] + bias[i];
    }
    return y;
}

struct FanWeightsRef {
    Vec W_G, b_G, W_L, b_L, W_Lp, b_Lp, ln_gain, ln_bias;
    size_t z, y;
};

inline Vec fan_fold_replay(const Vec& G, const Vec& Lnew, const Vec& Lprev, size_t N,
                           const FanWeightsRef& w) {
    Vec gproj = matvec(G, w.W_G, w.y, w.z, &w.b_G);
    for (auto& v : gproj) v = elu1(v);
    Vec out(N * w.z);
    for (size_t i = 0; i < N; ++i) {
        Vec li(Lnew.begin() + i * w.z, Lnew.begin() + (i + 1) * w.z);
        Vec lproj = matvec(li, w.W_L, w.y, w.z, &w.b_L);
        Vec pooled(w.y);
        for (size_t j = 0; j < w.y; ++j) pooled[j] = elu1(lproj[j]) * gproj[j];
        Vec back = matvec(pooled, w.W_Lp, w.z, w.y, &w.b_Lp);
        for (size_t j = 0; j < w.z; ++j) out[i * w.z + j] = relu1(back[j]) + Lprev[i * w.z + j];
    }
    return layer_norm_replay(out, w.ln_gain, w.ln_bias, w.z);
}

// ---- dense linear solve (for least-squares probes) ---------------------------

// Solves A x = b for square A (row-major) with partial pivoting; A and b are
// clobbered. Returns x.
inline Vec solve_linear(Vec A, Vec b, size_t n) {
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::fabs(A[r * n + col]) > std::fabs(A[piv * n + col])) piv = r;
        if (piv != col) {
            for (size_t c2 = 0; c2 < n; ++c2) std::swap(A[col * n + c2], A[piv * n + c2]);
            std::swap(b[col], b[piv]);
        }
        double d = A[col * n + col];
        for (size_t r = col + 1; r < n; ++r) {
            double f = A[r * n + col] / d;
            if (f == 0.0) continue;
            for (size_t c2 = col; c2 < n; ++c2) A[r * n + c2] -= f * A[col * n + c2];
            b[r] -= f * b[col];
        }
    }
    Vec x(n, 0.0);
    for (size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (size_t c2 = ri + 1; c2 < n; ++c2) acc -= A[ri * n + c2] * x[c2];
        x[ri] = acc / A[ri * n + ri];
    }
    return x;
}

// Ridge least squares: returns W ([features x classes], column-major per
// class) fitting X W ≈ Y with a small diagonal regularizer.
inline std::vector<Vec> least_squares_probe(const Vec& X, size_t rows, size_t cols, const Vec& Y,
                                            size_t classes, double ridge = 1e-8) {
    Vec XtX(cols * cols, 0.0);
    for (size_t r = 0; r < rows; ++r)
        for (size_t i = 0; i < cols; ++i)
            for (size_t j = 0; j < cols; ++j) XtX[i * cols + j] += X[r * cols + i] * X[r * cols + j];
    for (size_t i = 0; i < cols; ++i) XtX[i * cols + i] += ridge;
    std::vector<Vec> W;
    for (size_t k = 0; k < classes; ++k) {
        Vec Xty(cols, 0.0);
        for (size_t r = 0; r < rows; ++r)
            for (size_t i = 0; i < cols; ++i) Xty[i] += X[r * cols + i] * Y[r * classes + k];
        W.push_back(solve_linear(XtX, Xty, cols));
    }
    return W;
}

} // namespace oracle
