#pragma once

#include <string>

#include "vslan/params.hpp"
#include "vslan/tensor.hpp"

namespace vslan {

// Local Attention Network block. A query is bilinearly pooled against per-clip
// keys and values (ELU-activated low-rank pooling); pooled keys drive a
// clip-wise attention distribution, pooled values are reduced into a local
// feature, and a squeeze/excite sigmoid gate over that feature modulates the
// pooled keys before the attention-weighted reduction into the global feature.
struct LanWeights {
    diff::Tensor W_Q_K, b_Q_K; // [z, q]
    diff::Tensor W_K, b_K;     // [z, k]
    diff::Tensor W_Q_V, b_Q_V; // [z, q]
    diff::Tensor W_V, b_V;     // [z, v]
    diff::Tensor W_bk, b_bk;   // [z', z] inner score projection
    diff::Tensor w_bs, b_bs;   // [1, z'] score head
    diff::Tensor W_bl1, b_bl1; // [x, z] squeeze
    diff::Tensor W_bl2, b_bl2; // [z, x] excite

    static LanWeights create(ParamMap& params, const std::string& prefix, size_t q, size_t k,
                             size_t v, size_t z, size_t z_prime, size_t x, uint64_t seed) {
        if (x >= z)
            throw ShapeError("lan: squeeze dim x=" + std::to_string(x) +
                             " must be strictly smaller than z=" + std::to_string(z));
        LanWeights w;
        auto p = [&](const char* n, diff::Shape s, Init init) {
            return params.add(prefix + "." + n, std::move(s), init, seed);
        };
        w.W_Q_K = p("W_Q_K", {z, q}, Init::xavier_uniform);
        w.b_Q_K = p("b_Q_K", {z}, Init::zeros);
        w.W_K = p("W_K", {z, k}, Init::xavier_uniform);
        w.b_K = p("b_K", {z}, Init::zeros);
        w.W_Q_V = p("W_Q_V", {z, q}, Init::xavier_uniform);
        w.b_Q_V = p("b_Q_V", {z}, Init::zeros);
        w.W_V = p("W_V", {z, v}, Init::xavier_uniform);
        w.b_V = p("b_V", {z}, Init::zeros);
        w.W_bk = p("W_bk", {z_prime, z}, Init::xavier_uniform);
        w.b_bk = p("b_bk", {z_prime}, Init::zeros);
        w.w_bs = p("w_bs", {1, z_prime}, Init::xavier_uniform);
        w.b_bs = p("b_bs", {1}, Init::zeros);
        w.W_bl1 = p("W_bl1", {x, z}, Init::xavier_uniform);
        w.b_bl1 = p("b_bl1", {x}, Init::zeros);
        w.W_bl2 = p("W_bl2", {z, x}, Init::xavier_uniform);
        w.b_bl2 = p("b_bl2", {z}, Init::zeros);
        return w;
    }
};

struct LanOutput {
    diff::Tensor attn;          // [N] clip attention, sums to 1
    diff::Tensor local;         // [z] attention-pooled values
    diff::Tensor gate;          // [z] sigmoid gate, each coordinate in (0,1)
    diff::Tensor global_feat;   // [z] gated, attention-pooled keys
    diff::Tensor pooled_keys;   // [N, z]
    diff::Tensor pooled_values; // [N, z]
};

// Bilinear pooling of the query against each key row:
// row_i = ELU(W_Q_K Q) ⊙ ELU(W_K k_i)
inline diff::Tensor pool_keys(const diff::Tensor& Q, const diff::Tensor& K, const LanWeights& w) {
    diff::Tensor pq = diff::elu(diff::linear(Q, w.W_Q_K, w.b_Q_K));
    diff::Tensor pk = diff::elu(diff::linear(K, w.W_K, w.b_K));
    return diff::rowwise_mul(pk, pq);
}

inline diff::Tensor pool_values(const diff::Tensor& Q, const diff::Tensor& V,
                                const LanWeights& w) {
    diff::Tensor pq = diff::elu(diff::linear(Q, w.W_Q_V, w.b_Q_V));
    diff::Tensor pv = diff::elu(diff::linear(V, w.W_V, w.b_V));
    return diff::rowwise_mul(pv, pq);
}

// Per-clip scalar scores from the pooled keys, softmax-normalized.
// ReLU on the inner projection; the scalar head stays linear so negative
// scores survive to the softmax.
inline diff::Tensor local_attention(const diff::Tensor& pooled_keys, const LanWeights& w) {
    diff::Tensor inner = diff::relu(diff::linear(pooled_keys, w.W_bk, w.b_bk)); // [N, z']
    diff::Tensor scores = diff::linear(inner, w.w_bs, w.b_bs);                  // [N, 1]
    return diff::softmax(diff::reshape(scores, {pooled_keys.rows()}));
}

inline LanOutput lan_forward(const diff::Tensor& Q, const diff::Tensor& K, const diff::Tensor& V,
                             const LanWeights& w) {
    if (K.rank() != 2 || V.rank() != 2 || K.rows() != V.rows())
        throw ShapeError("lan_forward: K " + diff::shape_str(K.shape()) + " and V " +
                         diff::shape_str(V.shape()) + " must be [N,k]/[N,v] with equal N");
    LanOutput out;
    out.pooled_keys = pool_keys(Q, K, w);
    out.pooled_values = pool_values(Q, V, w);
    out.attn = local_attention(out.pooled_keys, w);
    out.local = diff::sum_rows(diff::scale_rows(out.pooled_values, out.attn));
    out.gate = diff::sigmoid(
        diff::linear(diff::linear(out.local, w.W_bl1, w.b_bl1), w.W_bl2, w.b_bl2));
    out.global_feat =
        diff::sum_rows(diff::scale_rows(diff::rowwise_mul(out.pooled_keys, out.gate), out.attn));
    return out;
}

} // namespace vslan
