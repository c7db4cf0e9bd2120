#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "vslan/checkpoint.hpp"
#include "vslan/config.hpp"
#include "vslan/data.hpp"
#include "vslan/decoder.hpp"
#include "vslan/model.hpp"
#include "vslan/optim.hpp"
#include "vslan/reward.hpp"

namespace vslan {

namespace fs = std::filesystem;

// ---- losses -----------------------------------------------------------------

// Negative log-likelihood of the target tokens under per-step logits,
// averaged over non-PAD targets.
inline diff::Tensor xe_loss(const std::vector<diff::Tensor>& logits_per_step,
                            const TokenSequence& targets) {
    if (logits_per_step.size() != targets.tokens.size())
        throw ShapeError("xe_loss: " + std::to_string(logits_per_step.size()) +
                         " logit steps for " + std::to_string(targets.tokens.size()) + " targets");
    diff::Tensor total = diff::Tensor::zeros({1});
    size_t count = 0;
    for (size_t t = 0; t < targets.tokens.size(); ++t) {
        int w = targets.tokens[t];
        if (w == tok::PAD) continue; // padding is masked out
        total = diff::sub(total, diff::pick(diff::log_softmax(logits_per_step[t]),
                                            static_cast<size_t>(w)));
        ++count;
    }
    if (count == 0) return total;
    return diff::mul_scalar(total, 1.0 / static_cast<double>(count));
}

// Self-critical REINFORCE surrogate: -(r_sample - r_baseline) * log p(sample).
inline diff::Tensor scst_loss(const diff::Tensor& sample_log_prob, double r_sample,
                              double r_baseline) {
    return diff::mul_scalar(sample_log_prob, -(r_sample - r_baseline));
}

inline diff::Tensor shared_loss(const diff::Tensor& xe, const diff::Tensor& rl, double eta) {
    if (eta < 0.0 || eta > 1.0) throw ConfigError("shared_loss: eta must lie in [0,1]");
    return diff::add(diff::mul_scalar(xe, eta), diff::mul_scalar(rl, 1.0 - eta));
}

// ---- decoding passes used by the trainer ---------------------------------------

struct TeacherForced {
    std::vector<diff::Tensor> logits; // raw logits per step
    diff::Tensor nll_sum;             // scalar graph, sum over targets
    size_t token_count = 0;
    size_t correct = 0; // argmax hits, for token accuracy
};

inline TeacherForced teacher_forced_decode(const EncoderOutput& enc, const diff::Tensor& g_bar,
                                           const TokenSequence& caption,
                                           const DecoderWeights& w) {
    TeacherForced out;
    out.nll_sum = diff::Tensor::zeros({1});
    DecoderState state = init_state(w);
    int prev = tok::BOS;
    std::vector<int> targets = caption.tokens;
    targets.push_back(tok::EOS);
    for (int target : targets) {
        if (target == tok::PAD) break; // padding only ever trails
        auto [logits, next] = decode_step(prev, state, g_bar, enc.local_final, w);
        out.nll_sum = diff::sub(out.nll_sum, diff::pick(diff::log_softmax(logits),
                                                        static_cast<size_t>(target)));
        int argmax = static_cast<int>(
            std::max_element(logits.data().begin(), logits.data().end()) - logits.data().begin());
        if (argmax == target) ++out.correct;
        ++out.token_count;
        out.logits.push_back(logits);
        state = next;
        prev = target;
    }
    return out;
}

struct SampledCaption {
    TokenSequence tokens;
    diff::Tensor log_prob; // scalar graph
};

// Multinomial rollout that keeps the log-probability graph alive for the
// policy gradient.
inline SampledCaption sample_decode(const EncoderOutput& enc, const diff::Tensor& g_bar,
                                    const DecoderWeights& w, size_t max_len, Rng& rng) {
    SampledCaption out;
    out.log_prob = diff::Tensor::zeros({1});
    DecoderState state = init_state(w);
    int prev = tok::BOS;
    for (size_t t = 0; t < max_len; ++t) {
        auto [logits, next] = decode_step(prev, state, g_bar, enc.local_final, w);
        diff::Tensor lp = diff::log_softmax(logits);
        double u = rng.uniform(), acc = 0.0;
        int token = static_cast<int>(w.vocab) - 1;
        for (size_t i = 0; i < w.vocab; ++i) {
            acc += std::exp(lp.data()[i]);
            if (u < acc) {
                token = static_cast<int>(i);
                break;
            }
        }
        out.log_prob = diff::add(out.log_prob, diff::pick(lp, static_cast<size_t>(token)));
        out.tokens.tokens.push_back(token);
        state = next;
        prev = token;
        if (token == tok::EOS) break;
    }
    return out;
}

// ---- trainer ----------------------------------------------------------------------

struct EpochStats {
    size_t epoch = 0;
    std::string phase;
    double loss_xe = 0.0;
    double loss_rl = 0.0;
    double loss_elbo = 0.0;
    double kl = 0.0;
    double val_token_acc = 0.0;
    double val_cider = 0.0;
    double wall_s = 0.0;

    json to_json() const {
        return json{{"epoch", epoch},
                    {"phase", phase},
                    {"loss_xe", loss_xe},
                    {"loss_rl", loss_rl},
                    {"loss_elbo", loss_elbo},
                    {"kl", kl},
                    {"val_token_acc", val_token_acc},
                    {"val_cider", val_cider},
                    {"wall_s", wall_s}};
    }
};

struct TrainResult {
    size_t epochs_run = 0;
    fs::path checkpoint_path;
    fs::path log_path;
    std::vector<EpochStats> stats;
};

class Trainer {
public:
    Trainer(Model& model, const data::Dataset& ds, const RunConfig& cfg)
        : model_(model), ds_(ds), cfg_(cfg) {
        reward_ = make_reward_provider(cfg.reward, ds);
        val_stats_ = training_reference_stats(ds);
    }

    std::string phase_of(size_t epoch) const {
        if (epoch < cfg_.vapen_warmup_epochs) return "warmup";
        if (epoch < cfg_.vapen_warmup_epochs + cfg_.xe_pretrain_epochs) return "xe";
        return "shared";
    }

    // Linear KL ramp across the warm-up epochs, 1 afterwards.
    double kl_weight(size_t epoch) const {
        size_t w = cfg_.vapen_warmup_epochs;
        if (epoch >= w || w <= 1) return 1.0;
        return static_cast<double>(epoch) / static_cast<double>(w - 1);
    }

    size_t epochs_done() const { return epochs_done_; }
    const AdamState& opt_state() const { return opt_; }

    EpochStats run_epoch(size_t epoch) {
        auto t0 = std::chrono::steady_clock::now();
        EpochStats st;
        st.epoch = epoch;
        st.phase = phase_of(epoch);
        double kw = kl_weight(epoch);

        double nll_total = 0.0, rl_total = 0.0, elbo_total = 0.0, kl_total = 0.0;
        size_t token_total = 0, rl_count = 0, example_count = 0;

        auto batches = data::make_batches(ds_, cfg_.batch_size, cfg_.seed, epoch);
        AdamConfig acfg;
        acfg.lr = cfg_.lr;
        acfg.clip_norm = cfg_.clip_norm;

        for (const auto& batch : batches) {
            model_.params.zero_grad();
            double batch_n = static_cast<double>(batch.items.size());
            double batch_tokens = static_cast<double>(batch.token_count);
            for (const auto& [vi, ci] : batch.items) {
                const data::VideoExample& video = ds_.videos[vi];
                uint64_t instance = vi * 100003ull + ci;

                EncoderOutput enc =
                    encode_video(data::video_streams(video), model_.enc, &ds_.stream_specs);

                PosSequence pos_gt;
                pos_gt.tags.push_back(pos::BOS);
                for (int t : video.pos[ci].tags) pos_gt.tags.push_back(t);
                pos_gt.tags.push_back(pos::EOS);
                size_t steps = pos_gt.tags.size() - 1;
                Rng noise_rng(derive_seed(cfg_.seed, "vapen.noise", epoch, instance));
                std::vector<diff::Tensor> noise;
                noise.reserve(steps);
                for (size_t s = 0; s < steps; ++s)
                    noise.push_back(
                        diff::Tensor::from({model_.dims.delta}, noise_rng.normal_vec(model_.dims.delta)));

                ElboResult el = elbo(pos_gt, enc.g_tilde, model_.vapen, noise);
                check_component("ELBO", el.loss.item(), epoch);
                elbo_total += el.loss.item();
                kl_total += el.kl.item();
                ++example_count;
                diff::Tensor elbo_term =
                    diff::add(diff::mul_scalar(el.kl, kw), el.recon);

                diff::Tensor loss;
                if (st.phase == "warmup") {
                    loss = diff::mul_scalar(elbo_term, 1.0 / batch_n);
                } else {
                    diff::Tensor g_bar = g_bar_from_hidden(el.final_hidden, model_.vapen);
                    TeacherForced tf =
                        teacher_forced_decode(enc, g_bar, video.captions[ci], model_.dec);
                    check_component("cross-entropy", tf.nll_sum.item(), epoch);
                    nll_total += tf.nll_sum.item();
                    token_total += tf.token_count;
                    diff::Tensor xe_term = diff::mul_scalar(tf.nll_sum, 1.0 / batch_tokens);
                    if (st.phase == "xe") {
                        loss = diff::add(xe_term, diff::mul_scalar(elbo_term, 1.0 / batch_n));
                    } else {
                        Rng sample_rng(derive_seed(cfg_.seed, "scst.sample", epoch, instance));
                        SampledCaption sample =
                            sample_decode(enc, g_bar, model_.dec, cfg_.max_len, sample_rng);
                        TokenSequence greedy = greedy_decode(enc, g_bar, model_.dec, cfg_.max_len);
                        Rng reward_rng(derive_seed(cfg_.seed, "scst.premise", epoch, instance));
                        double r_sample = reward_->score(ds_.vocab.decode(sample.tokens),
                                                         video.caption_text, reward_rng);
                        double r_baseline = reward_->score(ds_.vocab.decode(greedy),
                                                           video.caption_text, reward_rng);
                        diff::Tensor rl = scst_loss(sample.log_prob, r_sample, r_baseline);
                        check_component("reinforcement", rl.item(), epoch);
                        rl_total += rl.item();
                        ++rl_count;
                        loss = diff::add(
                            shared_loss(xe_term, diff::mul_scalar(rl, 1.0 / batch_n), cfg_.eta),
                            diff::mul_scalar(elbo_term, 1.0 / batch_n));
                    }
                }
                diff::backward(loss);
            }
            adam_step(model_.params, opt_, acfg);
        }

        st.loss_xe = token_total ? nll_total / static_cast<double>(token_total) : 0.0;
        st.loss_rl = rl_count ? rl_total / static_cast<double>(rl_count) : 0.0;
        st.loss_elbo = example_count ? elbo_total / static_cast<double>(example_count) : 0.0;
        st.kl = example_count ? kl_total / static_cast<double>(example_count) : 0.0;

        if (st.phase != "warmup") {
            st.val_token_acc = validate_token_accuracy();
            st.val_cider = validate_cider();
        }
        st.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return st;
    }

    // Teacher-forced accuracy over every training caption, with zero latent
    // noise so the number is deterministic.
    double validate_token_accuracy() const {
        diff::NoGradGuard ng;
        size_t correct = 0, total = 0;
        for (const auto& video : ds_.videos) {
            EncoderOutput enc =
                encode_video(data::video_streams(video), model_.enc, &ds_.stream_specs);
            for (size_t ci = 0; ci < video.captions.size(); ++ci) {
                PosSequence pos_gt;
                pos_gt.tags.push_back(pos::BOS);
                for (int t : video.pos[ci].tags) pos_gt.tags.push_back(t);
                pos_gt.tags.push_back(pos::EOS);
                std::vector<diff::Tensor> noise(pos_gt.tags.size() - 1,
                                                diff::Tensor::zeros({model_.dims.delta}));
                ElboResult el = elbo(pos_gt, enc.g_tilde, model_.vapen, noise);
                diff::Tensor g_bar = g_bar_from_hidden(el.final_hidden, model_.vapen);
                TeacherForced tf =
                    teacher_forced_decode(enc, g_bar, video.captions[ci], model_.dec);
                correct += tf.correct;
                total += tf.token_count;
            }
        }
        return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    }

    // Greedy captions conditioned on the deterministic mean rollout, scored
    // with CIDEr against each video's references.
    double validate_cider() const {
        diff::NoGradGuard ng;
        double total = 0.0;
        for (const auto& video : ds_.videos) {
            EncoderOutput enc =
                encode_video(data::video_streams(video), model_.enc, &ds_.stream_specs);
            VapenRollout roll = mean_rollout(enc.g_tilde, model_.vapen, cfg_.max_len);
            TokenSequence caption = greedy_decode(enc, roll.g_bar, model_.dec, cfg_.max_len);
            total += metrics::cider(ds_.vocab.decode(caption), video.caption_text, val_stats_);
        }
        return ds_.videos.empty() ? 0.0 : total / static_cast<double>(ds_.videos.size());
    }

    json checkpoint_meta() const {
        return json{{"config", cfg_.to_json()}, {"epochs_done", epochs_done_}};
    }

    void save(const fs::path& path) const {
        save_checkpoint(path, model_.params, opt_, checkpoint_meta());
    }

    void load(const fs::path& path) {
        Checkpoint ck = read_checkpoint(path);
        apply_checkpoint(ck, model_.params, &opt_);
        epochs_done_ = ck.meta.value("epochs_done", size_t{0});
    }

    // Runs the remaining epochs, appending one JSON line per epoch and
    // overwriting the rolling checkpoint.
    TrainResult run(std::ostream* mirror = nullptr) {
        fs::path out_dir = cfg_.paths.out_dir.empty() ? fs::path(".") : fs::path(cfg_.paths.out_dir);
        fs::create_directories(out_dir);
        TrainResult result;
        result.checkpoint_path = out_dir / "checkpoint.vsln";
        result.log_path = out_dir / "epochs.jsonl";
        std::ofstream log(result.log_path, std::ios::app);
        if (!log)
            throw DataError(DataError::Kind::missing,
                            "cannot open epoch log " + result.log_path.string());
        for (size_t epoch = epochs_done_; epoch < cfg_.epochs; ++epoch) {
            EpochStats st = run_epoch(epoch);
            epochs_done_ = epoch + 1;
            log << st.to_json().dump() << '\n';
            log.flush();
            if (mirror) *mirror << st.to_json().dump() << std::endl;
            save(result.checkpoint_path);
            result.stats.push_back(st);
            ++result.epochs_run;
        }
        return result;
    }

private:
    static void check_component(const char* name, double value, size_t epoch) {
        if (!std::isfinite(value))
            throw NumericError(std::string(name) + " loss became non-finite at epoch " +
                               std::to_string(epoch));
    }

    Model& model_;
    const data::Dataset& ds_;
    RunConfig cfg_;
    AdamState opt_;
    std::unique_ptr<RewardProvider> reward_;
    metrics::CorpusStats val_stats_;
    size_t epochs_done_ = 0;
};

// Builds the model for a dataset, optionally resumes, and trains to
// cfg.epochs.
inline TrainResult train(const data::Dataset& ds, const RunConfig& cfg,
                         std::ostream* mirror = nullptr) {
    Model m = Model::build(cfg.dims, ds.stream_dims(), ds.vocab.size(), cfg.seed);
    Trainer trainer(m, ds, cfg);
    if (!cfg.paths.checkpoint.empty()) trainer.load(cfg.paths.checkpoint);
    return trainer.run(mirror);
}

} // namespace vslan
