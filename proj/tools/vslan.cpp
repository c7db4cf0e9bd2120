// Command-line surface: gen-data, train, caption, sample-diverse, evaluate.
// Machine-readable JSON goes to stdout, human logs to stderr.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vslan/checkpoint.hpp"
#include "vslan/config.hpp"
#include "vslan/data.hpp"
#include "vslan/decoder.hpp"
#include "vslan/metrics.hpp"
#include "vslan/model.hpp"
#include "vslan/training.hpp"

using namespace vslan;
using nlohmann::json;

namespace {

RunConfig load_config(const std::string& path, std::optional<uint64_t> seed_override) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    RunConfig cfg = RunConfig::from_json(j);
    if (seed_override) cfg.seed = *seed_override;
    return cfg;
}

struct LoadedModel {
    RunConfig cfg;
    data::Dataset dataset;
    Model model;
};

LoadedModel load_model_from_checkpoint(const std::string& ckpt_path,
                                       const std::string& data_dir_override) {
    Checkpoint ck = read_checkpoint(ckpt_path);
    if (!ck.meta.contains("config"))
        throw DataError(DataError::Kind::malformed, "checkpoint has no config echo");
    RunConfig cfg = RunConfig::from_json(ck.meta["config"]);
    std::string data_dir = data_dir_override.empty() ? cfg.paths.data_dir : data_dir_override;
    if (data_dir.empty())
        throw ConfigError("no data directory: pass --data-dir or train with paths.data_dir set");
    LoadedModel out{std::move(cfg), data::load_dataset(data_dir), Model{}};
    out.model = Model::build(out.cfg.dims, out.dataset.stream_dims(), out.dataset.vocab.size(),
                             out.cfg.seed);
    apply_checkpoint(ck, out.model.params);
    return out;
}

int cmd_gen_data(const std::string& config_path, std::optional<uint64_t> seed) {
    RunConfig cfg = load_config(config_path, seed);
    if (cfg.paths.data_dir.empty()) throw ConfigError("paths.data_dir is required for gen-data");
    data::SyntheticConfig dcfg;
    dcfg.n_videos = cfg.data.n_videos;
    dcfg.n_clips = cfg.data.n_clips;
    dcfg.stream_dims = cfg.data.stream_dims;
    dcfg.captions_per_video = cfg.data.captions_per_video;
    dcfg.seed = cfg.seed;
    data::gen_synthetic(dcfg, cfg.paths.data_dir);
    std::cerr << "generated " << dcfg.n_videos << " videos with " << dcfg.stream_dims.size()
              << " streams in " << cfg.paths.data_dir << "\n";
    json out{{"data_dir", cfg.paths.data_dir},
             {"videos", dcfg.n_videos},
             {"streams", dcfg.stream_dims.size()},
             {"captions_per_video", dcfg.captions_per_video}};
    std::cout << out.dump() << std::endl;
    return 0;
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed) {
    RunConfig cfg = load_config(config_path, seed);
    if (cfg.paths.data_dir.empty()) throw ConfigError("paths.data_dir is required for train");
    if (cfg.paths.out_dir.empty()) throw ConfigError("paths.out_dir is required for train");
    data::Dataset ds = data::load_dataset(cfg.paths.data_dir);
    TrainResult result = train(ds, cfg, &std::cerr);
    json out{{"epochs_run", result.epochs_run},
             {"checkpoint", result.checkpoint_path.string()},
             {"epoch_log", result.log_path.string()}};
    if (!result.stats.empty()) {
        out["final_val_token_acc"] = result.stats.back().val_token_acc;
        out["final_val_cider"] = result.stats.back().val_cider;
    }
    std::cout << out.dump() << std::endl;
    return 0;
}

int cmd_caption(const std::string& ckpt, const std::string& video_id, size_t beam,
                const std::string& data_dir, std::optional<size_t> max_len) {
    LoadedModel lm = load_model_from_checkpoint(ckpt, data_dir);
    size_t len = max_len.value_or(lm.cfg.max_len);
    const data::VideoExample& video = lm.dataset.video(video_id);
    EncoderOutput enc =
        encode_video(data::video_streams(video), lm.model.enc, &lm.dataset.stream_specs);
    VapenRollout roll = mean_rollout(enc.g_tilde, lm.model.vapen, len);
    auto beams = beam_decode(enc, roll.g_bar, lm.model.dec, beam, len);
    json captions = json::array();
    for (const auto& b : beams)
        captions.push_back(json{{"caption", lm.dataset.vocab.decode(b.tokens)},
                                {"log_prob", b.log_prob},
                                {"score", b.norm_score}});
    json out{{"video_id", video_id}, {"captions", captions}};
    std::cout << out.dump() << std::endl;
    return 0;
}

int cmd_sample_diverse(const std::string& ckpt, const std::string& video_id, size_t n,
                       uint64_t seed, size_t beam, const std::string& data_dir,
                       std::optional<size_t> max_len) {
    LoadedModel lm = load_model_from_checkpoint(ckpt, data_dir);
    size_t len = max_len.value_or(lm.cfg.max_len);
    const data::VideoExample& video = lm.dataset.video(video_id);
    EncoderOutput enc =
        encode_video(data::video_streams(video), lm.model.enc, &lm.dataset.stream_specs);
    auto samples = diverse_decode(enc, lm.model.vapen, lm.model.dec, n, seed, beam, len);
    json arr = json::array();
    for (const auto& s : samples) {
        json pos = json::array();
        for (int t : s.pos.tags) pos.push_back(pos::tagset()[static_cast<size_t>(t)]);
        arr.push_back(json{{"caption", lm.dataset.vocab.decode(s.caption)}, {"pos", pos}});
    }
    json out{{"video_id", video_id}, {"seed", seed}, {"samples", arr}};
    std::cout << out.dump() << std::endl;
    return 0;
}

int cmd_evaluate(const std::string& predictions_path) {
    std::ifstream is(predictions_path);
    if (!is)
        throw DataError(DataError::Kind::missing,
                        "predictions file not found: " + predictions_path);
    std::vector<std::string> top1;
    std::vector<std::vector<std::string>> references;
    std::vector<std::vector<std::string>> caption_sets;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(DataError::Kind::malformed,
                            "predictions line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("video_id") || !j.contains("captions") || !j.contains("references") ||
            !j["captions"].is_array() || j["captions"].empty() || !j["references"].is_array() ||
            j["references"].empty())
            throw DataError(DataError::Kind::malformed,
                            "predictions line " + std::to_string(lineno) +
                                ": need video_id, non-empty captions and references");
        top1.push_back(j["captions"][0].get<std::string>());
        references.push_back(j["references"].get<std::vector<std::string>>());
        caption_sets.push_back(j["captions"].get<std::vector<std::string>>());
    }
    if (top1.empty()) throw DataError(DataError::Kind::malformed, "predictions file is empty");

    metrics::CorpusStats stats = metrics::build_corpus_stats(references);
    double cider_total = 0.0;
    for (size_t i = 0; i < top1.size(); ++i)
        cider_total += metrics::cider(top1[i], references[i], stats);

    json out;
    out["bleu4"] = metrics::bleu4(top1, references);
    out["cider"] = cider_total / static_cast<double>(top1.size());
    out["rougeL"] = metrics::rouge_l_corpus(top1, references);

    std::vector<std::vector<std::string>> multi;
    for (const auto& caps : caption_sets)
        if (caps.size() >= 2) multi.push_back(caps);
    if (multi.empty()) {
        std::cerr << "no videos with 2+ captions; diversity metrics are null\n";
        out["mbleu4"] = nullptr;
        out["div1"] = nullptr;
        out["div2"] = nullptr;
    } else {
        out["mbleu4"] = metrics::mbleu4_corpus(multi);
        out["div1"] = metrics::div_n_corpus(multi, 1);
        out["div2"] = metrics::div_n_corpus(multi, 2);
    }
    std::cout << out.dump() << std::endl;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"VSLAN video captioning: training, generation, and evaluation"};
    app.require_subcommand(1);

    std::string config_path, ckpt, video_id, data_dir, predictions;
    std::optional<uint64_t> seed_override;
    std::optional<size_t> max_len;
    size_t beam = 5, n_samples = 10;
    uint64_t sample_seed = 1;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
    gen->add_option("--config", config_path, "run config JSON")->required();
    gen->add_option("--seed", seed_override, "override config seed");

    auto* tr = app.add_subcommand("train", "Train from a run config");
    tr->add_option("--config", config_path, "run config JSON")->required();
    tr->add_option("--seed", seed_override, "override config seed");

    auto* cap = app.add_subcommand("caption", "Caption one video from a checkpoint");
    cap->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    cap->add_option("--video-id", video_id, "video id")->required();
    cap->add_option("--beam", beam, "beam width");
    cap->add_option("--data-dir", data_dir, "dataset directory override");
    cap->add_option("--max-len", max_len, "maximum caption length");

    auto* div = app.add_subcommand("sample-diverse", "Sample diverse captions via the POS encoder");
    div->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    div->add_option("--video-id", video_id, "video id")->required();
    div->add_option("--n", n_samples, "number of samples");
    div->add_option("--seed", sample_seed, "rollout seed");
    div->add_option("--beam", beam, "beam width per sample");
    div->add_option("--data-dir", data_dir, "dataset directory override");
    div->add_option("--max-len", max_len, "maximum caption length");

    auto* ev = app.add_subcommand("evaluate", "Score a predictions file");
    ev->add_option("--predictions", predictions, "JSON-lines predictions file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // bad arguments are config errors
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, seed_override);
        if (tr->parsed()) return cmd_train(config_path, seed_override);
        if (cap->parsed()) return cmd_caption(ckpt, video_id, beam, data_dir, max_len);
        if (div->parsed())
            return cmd_sample_diverse(ckpt, video_id, n_samples, sample_seed, beam, data_dir,
                                      max_len);
        if (ev->parsed()) return cmd_evaluate(predictions);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::numeric: return 4;
        case ErrorKind::reward: return 5;
        }
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
