#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vslan/params.hpp"
#include "vslan/rng.hpp"
#include "vslan/tensor.hpp"
#include "vslan/types.hpp"

namespace vslan {

// Variational POS encoder: a VRNN over tag sequences conditioned on the
// concatenated encoder globals. The prior proposes a latent from the running
// LSTM state, the posterior corrects it from the observed tag, and the final
// hidden state projects to the decoder's global feature.
struct VapenWeights {
    size_t d_h = 0, delta = 0, pos_embed = 0, pos_vocab = 0, z = 0, g_dim = 0;

    diff::Tensor W_init, b_init; // [d_h, g_dim] initial hidden from g_tilde
    diff::Tensor E_pos;          // [pos_vocab, pos_embed]
    diff::LstmWeights lstm;      // input [pos_embed + delta]

    diff::Tensor pr_W1, pr_b1, pr_Wmu, pr_bmu, pr_Wlv, pr_blv; // prior MLP on s_prev
    diff::Tensor po_W1, po_b1, po_Wmu, po_bmu, po_Wlv, po_blv; // posterior MLP on [embed; s_prev]
    diff::Tensor em_W1, em_b1, em_W2, em_b2;                   // emission MLP on [delta; s_prev]

    diff::Tensor W_g; // [z, d_h]

    static VapenWeights create(ParamMap& params, size_t g_dim, size_t d_h, size_t delta,
                               size_t pos_embed, size_t pos_vocab, size_t z, uint64_t seed) {
        VapenWeights w;
        w.d_h = d_h;
        w.delta = delta;
        w.pos_embed = pos_embed;
        w.pos_vocab = pos_vocab;
        w.z = z;
        w.g_dim = g_dim;
        auto p = [&](const char* n, diff::Shape s, Init init) {
            return params.add(std::string("vapen.") + n, std::move(s), init, seed);
        };
        w.W_init = p("W_init", {d_h, g_dim}, Init::xavier_uniform);
        w.b_init = p("b_init", {d_h}, Init::zeros);
        w.E_pos = p("E_pos", {pos_vocab, pos_embed}, Init::xavier_uniform);
        w.lstm.w_ih = p("lstm.w_ih", {4 * d_h, pos_embed + delta}, Init::xavier_uniform);
        w.lstm.w_hh = p("lstm.w_hh", {4 * d_h, d_h}, Init::xavier_uniform);
        w.lstm.bias = p("lstm.bias", {4 * d_h}, Init::lstm_bias);
        w.pr_W1 = p("prior.W1", {d_h, d_h}, Init::xavier_uniform);
        w.pr_b1 = p("prior.b1", {d_h}, Init::zeros);
        w.pr_Wmu = p("prior.W_mu", {delta, d_h}, Init::xavier_uniform);
        w.pr_bmu = p("prior.b_mu", {delta}, Init::zeros);
        w.pr_Wlv = p("prior.W_lv", {delta, d_h}, Init::xavier_uniform);
        w.pr_blv = p("prior.b_lv", {delta}, Init::zeros);
        w.po_W1 = p("posterior.W1", {d_h, pos_embed + d_h}, Init::xavier_uniform);
        w.po_b1 = p("posterior.b1", {d_h}, Init::zeros);
        w.po_Wmu = p("posterior.W_mu", {delta, d_h}, Init::xavier_uniform);
        w.po_bmu = p("posterior.b_mu", {delta}, Init::zeros);
        w.po_Wlv = p("posterior.W_lv", {delta, d_h}, Init::xavier_uniform);
        w.po_blv = p("posterior.b_lv", {delta}, Init::zeros);
        w.em_W1 = p("emit.W1", {d_h, delta + d_h}, Init::xavier_uniform);
        w.em_b1 = p("emit.b1", {d_h}, Init::zeros);
        w.em_W2 = p("emit.W2", {pos_vocab, d_h}, Init::xavier_uniform);
        w.em_b2 = p("emit.b2", {pos_vocab}, Init::zeros);
        w.W_g = p("W_g", {z, d_h}, Init::xavier_uniform);
        return w;
    }
};

struct LatentState {
    diff::Tensor mu;      // [delta]
    diff::Tensor log_var; // [delta]
    diff::Tensor delta;   // sampled latent
};

inline std::pair<diff::Tensor, diff::Tensor> vapen_init_state(const diff::Tensor& g_tilde,
                                                              const VapenWeights& w) {
    if (g_tilde.size() != w.g_dim)
        throw ShapeError("vapen: g_tilde has dim " + std::to_string(g_tilde.size()) +
                         ", expected " + std::to_string(w.g_dim));
    diff::Tensor h0 = diff::tanh_t(diff::linear(g_tilde, w.W_init, w.b_init));
    return {h0, diff::Tensor::zeros({w.d_h})};
}

inline std::pair<diff::Tensor, diff::Tensor> prior_step(const diff::Tensor& s_prev,
                                                        const VapenWeights& w) {
    diff::Tensor h = diff::relu(diff::linear(s_prev, w.pr_W1, w.pr_b1));
    return {diff::linear(h, w.pr_Wmu, w.pr_bmu), diff::linear(h, w.pr_Wlv, w.pr_blv)};
}

inline std::pair<diff::Tensor, diff::Tensor> posterior_step(const diff::Tensor& pos_embedding,
                                                            const diff::Tensor& s_prev,
                                                            const VapenWeights& w) {
    diff::Tensor h =
        diff::relu(diff::linear(diff::concat(pos_embedding, s_prev), w.po_W1, w.po_b1));
    return {diff::linear(h, w.po_Wmu, w.po_bmu), diff::linear(h, w.po_Wlv, w.po_blv)};
}

inline diff::Tensor emit_pos(const diff::Tensor& delta, const diff::Tensor& s_prev,
                             const VapenWeights& w) {
    diff::Tensor h = diff::relu(diff::linear(diff::concat(delta, s_prev), w.em_W1, w.em_b1));
    return diff::linear(h, w.em_W2, w.em_b2);
}

inline diff::Tensor g_bar_from_hidden(const diff::Tensor& s_last, const VapenWeights& w) {
    return diff::linear(s_last, w.W_g);
}

struct ElboResult {
    diff::Tensor loss;  // kl + recon (negated lower bound, to minimize)
    diff::Tensor kl;    // sum of per-step KL(posterior ‖ prior)
    diff::Tensor recon; // sum of per-step negative log-likelihood of the tags
    diff::Tensor final_hidden;
};

// Teacher-forced pass over a gold tag sequence (tags[0] must be BOS). One
// latent per predicted tag, sampled from the posterior with caller-supplied
// standard-normal noise.
inline ElboResult elbo(const PosSequence& pos_gt, const diff::Tensor& g_tilde,
                       const VapenWeights& w, const std::vector<diff::Tensor>& noise) {
    if (pos_gt.tags.size() < 2)
        throw Error(ErrorKind::data, "vapen elbo: empty POS sequence (needs BOS plus one tag)");
    size_t steps = pos_gt.tags.size() - 1;
    if (noise.size() < steps)
        throw ShapeError("vapen elbo: " + std::to_string(noise.size()) + " noise draws for " +
                         std::to_string(steps) + " steps");
    auto [h, c] = vapen_init_state(g_tilde, w);
    diff::Tensor kl_total = diff::Tensor::zeros({1});
    diff::Tensor recon_total = diff::Tensor::zeros({1});
    for (size_t t = 0; t < steps; ++t) {
        int tag = pos_gt.tags[t + 1];
        if (tag < 0 || static_cast<size_t>(tag) >= w.pos_vocab)
            throw ShapeError("vapen elbo: tag index " + std::to_string(tag) + " out of range");
        diff::Tensor emb = diff::row(w.E_pos, static_cast<size_t>(tag));
        auto [mu_p, lv_p] = prior_step(h, w);
        auto [mu_q, lv_q] = posterior_step(emb, h, w);
        diff::Tensor delta = diff::gaussian_sample(mu_q, lv_q, noise[t]);
        kl_total = diff::add(kl_total, diff::kl_diag_gaussian(mu_q, lv_q, mu_p, lv_p));
        diff::Tensor log_probs = diff::log_softmax(emit_pos(delta, h, w));
        recon_total = diff::sub(recon_total, diff::pick(log_probs, static_cast<size_t>(tag)));
        auto next = diff::lstm_cell(diff::concat(emb, delta), h, c, w.lstm);
        h = next.first;
        c = next.second;
    }
    ElboResult out;
    out.kl = kl_total;
    out.recon = recon_total;
    out.loss = diff::add(kl_total, recon_total);
    out.final_hidden = h;
    return out;
}

struct VapenRollout {
    std::vector<LatentState> states; // one per emitted tag
    PosSequence pos;                 // BOS followed by emitted tags
    diff::Tensor final_hidden;       // s_T
    diff::Tensor g_bar;              // [z]
};

namespace detail {

// Generative rollout from the prior. `stochastic` draws latent noise and
// samples tags from the categorical; otherwise the latent mean and argmax tag
// are used, giving the deterministic evaluation path.
inline VapenRollout vapen_rollout(const diff::Tensor& g_tilde, const VapenWeights& w,
                                  uint64_t rng_seed, size_t max_len, bool stochastic) {
    if (max_len < 1) throw ShapeError("vapen rollout: max_len must be >= 1");
    diff::NoGradGuard ng;
    Rng rng(rng_seed);
    VapenRollout out;
    out.pos.tags.push_back(pos::BOS);
    auto [h, c] = vapen_init_state(g_tilde, w);
    for (size_t t = 0; t < max_len; ++t) {
        auto [mu, lv] = prior_step(h, w);
        diff::Tensor n = stochastic
                             ? diff::Tensor::from({w.delta}, rng.normal_vec(w.delta))
                             : diff::Tensor::zeros({w.delta});
        diff::Tensor delta = diff::gaussian_sample(mu, lv, n);
        diff::Tensor probs = diff::softmax(emit_pos(delta, h, w));
        int tag;
        if (stochastic) {
            double u = rng.uniform(), acc = 0.0;
            tag = static_cast<int>(w.pos_vocab) - 1;
            for (size_t i = 0; i < probs.size(); ++i) {
                acc += probs.data()[i];
                if (u < acc) {
                    tag = static_cast<int>(i);
                    break;
                }
            }
        } else {
            tag = static_cast<int>(std::max_element(probs.data().begin(), probs.data().end()) -
                                   probs.data().begin());
        }
        out.states.push_back({mu, lv, delta});
        out.pos.tags.push_back(tag);
        diff::Tensor emb = diff::row(w.E_pos, static_cast<size_t>(tag));
        auto next = diff::lstm_cell(diff::concat(emb, delta), h, c, w.lstm);
        h = next.first;
        c = next.second;
        if (tag == pos::EOS) break;
    }
    out.final_hidden = h;
    out.g_bar = g_bar_from_hidden(h, w);
    return out;
}

} // namespace detail

inline VapenRollout sample_rollout(const diff::Tensor& g_tilde, const VapenWeights& w,
                                   uint64_t rng_seed, size_t max_len) {
    return detail::vapen_rollout(g_tilde, w, rng_seed, max_len, /*stochastic=*/true);
}

// Latent means and argmax tags throughout; used wherever evaluation must be
// deterministic (validation, the single-caption CLI path).
inline VapenRollout mean_rollout(const diff::Tensor& g_tilde, const VapenWeights& w,
                                 size_t max_len) {
    return detail::vapen_rollout(g_tilde, w, /*rng_seed=*/0, max_len, /*stochastic=*/false);
}

} // namespace vslan
