#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "vslan/fan.hpp"
#include "vslan/lan.hpp"
#include "vslan/params.hpp"
#include "vslan/tensor.hpp"
#include "vslan/types.hpp"
#include "vslan/vapen.hpp"

namespace vslan {

// Caption decoder. Each step feeds the LSTM the word embedding concatenated
// with theta_prev ⊕ g_bar, queries the shared decoder LAN with the new hidden
// state against the encoder's local features, and projects the enhanced
// representation to word logits.
struct DecoderWeights {
    size_t vocab = 0, embed = 0, d_h = 0, z = 0;

    diff::Tensor W_E;       // [vocab, embed]
    diff::LstmWeights lstm; // input [embed + z]
    LanWeights lan;         // shared decoder LAN, q = d_h, k = v = z
    diff::Tensor W_A, b_A;  // [z, z + d_h]
    diff::Tensor W_v, b_v;  // [vocab, z]

    static DecoderWeights create(ParamMap& params, size_t vocab, size_t embed, size_t d_h,
                                 size_t z, size_t z_prime, size_t x, uint64_t seed) {
        DecoderWeights w;
        w.vocab = vocab;
        w.embed = embed;
        w.d_h = d_h;
        w.z = z;
        auto p = [&](const char* n, diff::Shape s, Init init) {
            return params.add(std::string("dec.") + n, std::move(s), init, seed);
        };
        w.W_E = p("W_E", {vocab, embed}, Init::xavier_uniform);
        w.lstm.w_ih = p("lstm.w_ih", {4 * d_h, embed + z}, Init::xavier_uniform);
        w.lstm.w_hh = p("lstm.w_hh", {4 * d_h, d_h}, Init::xavier_uniform);
        w.lstm.bias = p("lstm.bias", {4 * d_h}, Init::lstm_bias);
        w.lan = LanWeights::create(params, "dec.lan", d_h, z, z, z, z_prime, x, seed);
        w.W_A = p("W_A", {z, z + d_h}, Init::xavier_uniform);
        w.b_A = p("b_A", {z}, Init::zeros);
        w.W_v = p("W_v", {vocab, z}, Init::xavier_uniform);
        w.b_v = p("b_v", {vocab}, Init::zeros);
        return w;
    }
};

struct DecoderState {
    diff::Tensor h;          // [d_h]
    diff::Tensor c;          // [d_h]
    diff::Tensor theta_prev; // [z]
};

inline DecoderState init_state(const DecoderWeights& w) {
    return {diff::Tensor::zeros({w.d_h}), diff::Tensor::zeros({w.d_h}),
            diff::Tensor::zeros({w.z})};
}

inline std::pair<diff::Tensor, DecoderState> decode_step(int token, const DecoderState& state,
                                                         const diff::Tensor& g_bar,
                                                         const diff::Tensor& local_feats,
                                                         const DecoderWeights& w) {
    if (token < 0 || static_cast<size_t>(token) >= w.vocab)
        throw ShapeError("decode_step: token index " + std::to_string(token) +
                         " out of vocabulary of size " + std::to_string(w.vocab));
    diff::Tensor x =
        diff::concat(diff::row(w.W_E, static_cast<size_t>(token)), diff::add(state.theta_prev, g_bar));
    auto [h, c] = diff::lstm_cell(x, state.h, state.c, w.lstm);
    LanOutput lan_out = lan_forward(h, local_feats, local_feats, w.lan);
    diff::Tensor theta = diff::linear(diff::concat(lan_out.global_feat, h), w.W_A, w.b_A);
    diff::Tensor logits = diff::linear(diff::elu(theta), w.W_v, w.b_v);
    return {logits, DecoderState{h, c, theta}};
}

struct Hypothesis {
    TokenSequence tokens; // generated tokens (BOS excluded, EOS included when finished)
    double log_prob = 0.0;
    DecoderState state;
    int last_token = tok::BOS;
    bool finished = false;

    double norm_score() const {
        return tokens.tokens.empty() ? log_prob
                                     : log_prob / static_cast<double>(tokens.tokens.size());
    }
};

struct ScoredSequence {
    TokenSequence tokens;
    double log_prob = 0.0;
    double norm_score = 0.0;
};

// Standard beam search over per-step log-softmax. Finished hypotheses retire
// into a pool; the final ranking is length-normalized.
inline std::vector<ScoredSequence> beam_decode(const EncoderOutput& enc,
                                               const diff::Tensor& g_bar,
                                               const DecoderWeights& w, size_t width,
                                               size_t max_len) {
    if (width < 1) throw ShapeError("beam_decode: width must be >= 1");
    if (max_len < 1) throw ShapeError("beam_decode: max_len must be >= 1");
    diff::NoGradGuard ng;

    std::vector<Hypothesis> active{Hypothesis{{}, 0.0, init_state(w), tok::BOS, false}};
    std::vector<Hypothesis> finished;

    for (size_t step = 0; step < max_len && !active.empty(); ++step) {
        struct Cand {
            size_t parent;
            int token;
            double log_prob;
        };
        std::vector<Cand> cands;
        std::vector<DecoderState> states(active.size());
        for (size_t a = 0; a < active.size(); ++a) {
            auto [logits, st] = decode_step(active[a].last_token, active[a].state, g_bar,
                                            enc.local_final, w);
            states[a] = st;
            diff::Tensor lp = diff::log_softmax(logits);
            for (size_t t = 0; t < w.vocab; ++t)
                cands.push_back({a, static_cast<int>(t), active[a].log_prob + lp.data()[t]});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
            if (a.token != b.token) return a.token < b.token;
            return a.parent < b.parent;
        });
        size_t keep = std::min(width, cands.size());
        std::vector<Hypothesis> next;
        for (size_t i = 0; i < keep; ++i) {
            const Cand& c = cands[i];
            Hypothesis h = active[c.parent];
            h.state = states[c.parent];
            h.tokens.tokens.push_back(c.token);
            h.log_prob = c.log_prob;
            h.last_token = c.token;
            if (c.token == tok::EOS) {
                h.finished = true;
                finished.push_back(std::move(h));
            } else {
                next.push_back(std::move(h));
            }
        }
        active = std::move(next);
    }
    for (auto& h : active) finished.push_back(std::move(h)); // max-length cutoffs

    std::stable_sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
        double sa = a.norm_score(), sb = b.norm_score();
        if (sa != sb) return sa > sb;
        if (a.tokens.tokens.size() != b.tokens.tokens.size())
            return a.tokens.tokens.size() < b.tokens.tokens.size();
        return a.tokens.tokens < b.tokens.tokens;
    });
    std::vector<ScoredSequence> out;
    for (size_t i = 0; i < finished.size() && i < width; ++i)
        out.push_back({finished[i].tokens, finished[i].log_prob, finished[i].norm_score()});
    return out;
}

inline TokenSequence greedy_decode(const EncoderOutput& enc, const diff::Tensor& g_bar,
                                   const DecoderWeights& w, size_t max_len) {
    if (max_len < 1) throw ShapeError("greedy_decode: max_len must be >= 1");
    diff::NoGradGuard ng;
    TokenSequence out;
    DecoderState state = init_state(w);
    int token = tok::BOS;
    for (size_t step = 0; step < max_len; ++step) {
        auto [logits, st] = decode_step(token, state, g_bar, enc.local_final, w);
        state = st;
        token = static_cast<int>(std::max_element(logits.data().begin(), logits.data().end()) -
                                 logits.data().begin());
        out.tokens.push_back(token);
        if (token == tok::EOS) break;
    }
    return out;
}

struct DiverseSample {
    TokenSequence caption;
    PosSequence pos;
};

// One VaPEn rollout per sample (seeds seed..seed+n-1), each beam-decoded
// against its own g_bar.
inline std::vector<DiverseSample> diverse_decode(const EncoderOutput& enc,
                                                 const VapenWeights& vw,
                                                 const DecoderWeights& dw, size_t n_samples,
                                                 uint64_t seed, size_t width, size_t max_len) {
    if (n_samples < 1) throw ShapeError("diverse_decode: n_samples must be >= 1");
    std::vector<DiverseSample> out;
    for (size_t i = 0; i < n_samples; ++i) {
        VapenRollout roll = sample_rollout(enc.g_tilde, vw, seed + i, max_len);
        auto beams = beam_decode(enc, roll.g_bar, dw, width, max_len);
        out.push_back({beams.empty() ? TokenSequence{} : beams.front().tokens, roll.pos});
    }
    return out;
}

} // namespace vslan
