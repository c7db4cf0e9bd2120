#pragma once

#include <string>
#include <vector>

#include "vslan/lan.hpp"
#include "vslan/params.hpp"
#include "vslan/tensor.hpp"

namespace vslan {

struct StreamSpec {
    int stream_id = 0;
    std::string name;
    size_t dim = 0;         // feature dimension v_m
    size_t order_index = 0; // position m in the stack
};

// Feature Aggregation Network block: pools the incoming stream against the
// running aggregate's global feature, projects back to z, and applies a
// LayerNorm residual over the previous aggregate.
struct FanWeights {
    diff::Tensor W_G, b_G;   // [y, z]
    diff::Tensor W_L, b_L;   // [y, z] (streams are pre-projected to z)
    diff::Tensor W_Lp, b_Lp; // [z, y]
    diff::Tensor ln_gain, ln_bias;

    static FanWeights create(ParamMap& params, const std::string& prefix, size_t z, size_t y,
                             uint64_t seed) {
        FanWeights w;
        auto p = [&](const char* n, diff::Shape s, Init init) {
            return params.add(prefix + "." + n, std::move(s), init, seed);
        };
        w.W_G = p("W_G", {y, z}, Init::xavier_uniform);
        w.b_G = p("b_G", {y}, Init::zeros);
        w.W_L = p("W_L", {y, z}, Init::xavier_uniform);
        w.b_L = p("b_L", {y}, Init::zeros);
        w.W_Lp = p("W_Lp", {z, y}, Init::xavier_uniform);
        w.b_Lp = p("b_Lp", {z}, Init::zeros);
        w.ln_gain = p("ln_gain", {z}, Init::ones);
        w.ln_bias = p("ln_bias", {z}, Init::zeros);
        return w;
    }
};

struct EncoderWeights {
    size_t z = 0;
    std::vector<diff::Tensor> W_in;      // per stream, [z, v_m]
    std::vector<LanWeights> lan_blocks;  // per block
    std::vector<FanWeights> fan_blocks;  // per block

    static EncoderWeights create(ParamMap& params, const std::vector<size_t>& stream_dims,
                                 size_t z, size_t z_prime, size_t x, size_t y, uint64_t seed) {
        EncoderWeights w;
        w.z = z;
        for (size_t m = 0; m < stream_dims.size(); ++m) {
            std::string pre = "enc.block" + std::to_string(m);
            w.W_in.push_back(
                params.add(pre + ".W_in", {z, stream_dims[m]}, Init::xavier_uniform, seed));
            w.lan_blocks.push_back(LanWeights::create(params, pre + ".lan", z, z, z, z, z_prime,
                                                      x, seed));
            w.fan_blocks.push_back(FanWeights::create(params, pre + ".fan", z, y, seed));
        }
        return w;
    }

    size_t num_streams() const { return W_in.size(); }
};

struct EncoderOutput {
    diff::Tensor local_final;          // [N, z] final aggregate, decoder keys/values
    std::vector<diff::Tensor> globals; // M global features [z]
    diff::Tensor g_tilde;              // [M*z] concatenated globals
};

inline diff::Tensor project_stream(const diff::Tensor& L, const diff::Tensor& W_in) {
    return diff::linear(L, W_in);
}

// Self-attentive LAN over the current aggregate; the query is the clip mean,
// which keeps the block parameter-free on the query side and permutation
// invariant.
inline LanOutput encoder_lan(const diff::Tensor& L_prev, const LanWeights& w) {
    return lan_forward(diff::mean_rows(L_prev), L_prev, L_prev, w);
}

inline diff::Tensor fan_fold(const diff::Tensor& G_hat, const diff::Tensor& L_new,
                             const diff::Tensor& L_prev, const FanWeights& w) {
    diff::Tensor pooled = diff::rowwise_mul(diff::elu(diff::linear(L_new, w.W_L, w.b_L)),
                                            diff::elu(diff::linear(G_hat, w.W_G, w.b_G)));
    diff::Tensor projected = diff::relu(diff::linear(pooled, w.W_Lp, w.b_Lp));
    return diff::layer_norm(diff::add(projected, L_prev), w.ln_gain, w.ln_bias);
}

// Stacks LAN+FAN blocks over the streams. The first block folds stream 0
// against its own global feature; every later block computes the global of
// the running aggregate and folds the next stream into it.
inline EncoderOutput encode_video(const std::vector<diff::Tensor>& streams,
                                  const EncoderWeights& w,
                                  const std::vector<StreamSpec>* specs = nullptr) {
    if (streams.empty()) throw ShapeError("encode_video: no streams");
    if (streams.size() != w.num_streams())
        throw ShapeError("encode_video: got " + std::to_string(streams.size()) +
                         " streams, model has " + std::to_string(w.num_streams()));
    size_t n_clips = streams[0].rows();
    for (size_t m = 1; m < streams.size(); ++m) {
        if (streams[m].rows() != n_clips) {
            auto name = [&](size_t i) {
                return specs && i < specs->size() ? (*specs)[i].name
                                                  : "stream " + std::to_string(i);
            };
            throw ShapeError("encode_video: clip-count mismatch: " + name(0) + " has " +
                             std::to_string(n_clips) + " clips, " + name(m) + " has " +
                             std::to_string(streams[m].rows()));
        }
    }

    EncoderOutput out;
    diff::Tensor first = project_stream(streams[0], w.W_in[0]);
    LanOutput lan0 = encoder_lan(first, w.lan_blocks[0]);
    out.globals.push_back(lan0.global_feat);
    diff::Tensor aggregate = fan_fold(lan0.global_feat, first, first, w.fan_blocks[0]);

    for (size_t m = 1; m < streams.size(); ++m) {
        diff::Tensor projected = project_stream(streams[m], w.W_in[m]);
        LanOutput lan_m = encoder_lan(aggregate, w.lan_blocks[m]);
        out.globals.push_back(lan_m.global_feat);
        aggregate = fan_fold(lan_m.global_feat, projected, aggregate, w.fan_blocks[m]);
    }
    out.local_final = aggregate;
    out.g_tilde = diff::concat(out.globals);
    return out;
}

} // namespace vslan
