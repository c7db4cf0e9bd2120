#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vslan/errors.hpp"

namespace vslan {

using json = nlohmann::json;

struct Dims {
    size_t z = 1024;      // unified attention size
    size_t z_prime = 512; // score-projection width
    size_t x = 256;       // squeeze width
    size_t y = 512;       // aggregation pooling width
    size_t delta = 64;    // latent size
    size_t d_h = 1024;    // LSTM hidden size (decoder and POS encoder)
    size_t embed = 300;   // word embedding
    size_t pos_embed = 64;

    static Dims paper() { return Dims{}; }
    static Dims desk() { return Dims{64, 32, 16, 32, 16, 64, 32, 16}; }

    void validate() const {
        if (!z || !z_prime || !x || !y || !delta || !d_h || !embed || !pos_embed)
            throw ConfigError("dims: all dimensions must be positive");
        if (x >= z) throw ConfigError("dims: squeeze dim x must be strictly smaller than z");
    }
};

struct RewardConfig {
    std::string kind = "builtin-cider"; // or "remote-entailment"
    std::string endpoint;               // required for remote-entailment
};

struct PathsConfig {
    std::string data_dir;
    std::string out_dir;
    std::string checkpoint; // optional resume point
};

struct DataGenConfig {
    size_t n_videos = 200;
    size_t n_clips = 8;
    std::vector<size_t> stream_dims = {24, 16, 20};
    size_t captions_per_video = 4;
};

struct RunConfig {
    std::string profile = "desk"; // "paper" | "desk"
    uint64_t seed = 1;

    double eta = 0.3;
    double lr = 1e-4;
    size_t batch_size = 64;
    double clip_norm = 10.0;
    size_t xe_pretrain_epochs = 10;
    size_t vapen_warmup_epochs = 50;
    size_t epochs = 70; // total across all phases
    size_t beam_width = 5;
    size_t max_len = 25;

    Dims dims; // resolved from profile, then overridden field by field
    PathsConfig paths;
    RewardConfig reward;
    DataGenConfig data;

    void validate() const {
        if (profile != "paper" && profile != "desk")
            throw ConfigError("profile must be \"paper\" or \"desk\"");
        if (eta < 0.0 || eta > 1.0) throw ConfigError("eta must lie in [0, 1]");
        if (lr <= 0.0) throw ConfigError("lr must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
        if (beam_width == 0) throw ConfigError("beam_width must be positive");
        if (max_len == 0) throw ConfigError("max_len must be positive");
        if (reward.kind != "builtin-cider" && reward.kind != "remote-entailment")
            throw ConfigError("reward.kind must be builtin-cider or remote-entailment");
        if (reward.kind == "remote-entailment" && reward.endpoint.empty())
            throw ConfigError("reward.endpoint is required for remote-entailment");
        if (data.stream_dims.empty()) throw ConfigError("data.stream_dims must not be empty");
        for (size_t d : data.stream_dims)
            if (d == 0) throw ConfigError("data.stream_dims entries must be positive");
        dims.validate();
    }

    json to_json() const {
        json j;
        j["profile"] = profile;
        j["seed"] = seed;
        j["eta"] = eta;
        j["lr"] = lr;
        j["batch_size"] = batch_size;
        j["clip_norm"] = clip_norm;
        j["xe_pretrain_epochs"] = xe_pretrain_epochs;
        j["vapen_warmup_epochs"] = vapen_warmup_epochs;
        j["epochs"] = epochs;
        j["beam_width"] = beam_width;
        j["max_len"] = max_len;
        j["dims"] = {{"z", dims.z},         {"z_prime", dims.z_prime},
                     {"x", dims.x},         {"y", dims.y},
                     {"delta", dims.delta}, {"d_h", dims.d_h},
                     {"embed", dims.embed}, {"pos_embed", dims.pos_embed}};
        j["paths"] = {{"data_dir", paths.data_dir},
                      {"out_dir", paths.out_dir},
                      {"checkpoint", paths.checkpoint}};
        j["reward"] = {{"kind", reward.kind}, {"endpoint", reward.endpoint}};
        j["data"] = {{"n_videos", data.n_videos},
                     {"n_clips", data.n_clips},
                     {"stream_dims", data.stream_dims},
                     {"captions_per_video", data.captions_per_video}};
        return j;
    }

    static RunConfig from_json(const json& j);
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const char* where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad type for ") + where + "." + key);
    }
}

} // namespace detail

inline RunConfig RunConfig::from_json(const json& j) {
    using detail::get_or;
    detail::reject_unknown_keys(
        j,
        {"profile", "seed", "eta", "lr", "batch_size", "clip_norm", "xe_pretrain_epochs",
         "vapen_warmup_epochs", "epochs", "beam_width", "max_len", "dims", "paths", "reward",
         "data"},
        "config");
    RunConfig cfg;
    cfg.profile = get_or<std::string>(j, "profile", cfg.profile, "config");
    if (cfg.profile == "paper")
        cfg.dims = Dims::paper();
    else
        cfg.dims = Dims::desk();
    cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed, "config");
    cfg.eta = get_or<double>(j, "eta", cfg.eta, "config");
    cfg.lr = get_or<double>(j, "lr", cfg.lr, "config");
    cfg.batch_size = get_or<size_t>(j, "batch_size", cfg.batch_size, "config");
    cfg.clip_norm = get_or<double>(j, "clip_norm", cfg.clip_norm, "config");
    cfg.xe_pretrain_epochs = get_or<size_t>(j, "xe_pretrain_epochs", cfg.xe_pretrain_epochs, "config");
    cfg.vapen_warmup_epochs =
        get_or<size_t>(j, "vapen_warmup_epochs", cfg.vapen_warmup_epochs, "config");
    cfg.epochs = get_or<size_t>(j, "epochs", cfg.epochs, "config");
    cfg.beam_width = get_or<size_t>(j, "beam_width", cfg.beam_width, "config");
    cfg.max_len = get_or<size_t>(j, "max_len", cfg.max_len, "config");

    if (j.contains("dims")) {
        const json& d = j.at("dims");
        detail::reject_unknown_keys(
            d, {"z", "z_prime", "x", "y", "delta", "d_h", "embed", "pos_embed"}, "config.dims");
        cfg.dims.z = get_or<size_t>(d, "z", cfg.dims.z, "dims");
        cfg.dims.z_prime = get_or<size_t>(d, "z_prime", cfg.dims.z_prime, "dims");
        cfg.dims.x = get_or<size_t>(d, "x", cfg.dims.x, "dims");
        cfg.dims.y = get_or<size_t>(d, "y", cfg.dims.y, "dims");
        cfg.dims.delta = get_or<size_t>(d, "delta", cfg.dims.delta, "dims");
        cfg.dims.d_h = get_or<size_t>(d, "d_h", cfg.dims.d_h, "dims");
        cfg.dims.embed = get_or<size_t>(d, "embed", cfg.dims.embed, "dims");
        cfg.dims.pos_embed = get_or<size_t>(d, "pos_embed", cfg.dims.pos_embed, "dims");
    }
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        detail::reject_unknown_keys(p, {"data_dir", "out_dir", "checkpoint"}, "config.paths");
        cfg.paths.data_dir = get_or<std::string>(p, "data_dir", "", "paths");
        cfg.paths.out_dir = get_or<std::string>(p, "out_dir", "", "paths");
        cfg.paths.checkpoint = get_or<std::string>(p, "checkpoint", "", "paths");
    }
    if (j.contains("reward")) {
        const json& r = j.at("reward");
        detail::reject_unknown_keys(r, {"kind", "endpoint"}, "config.reward");
        cfg.reward.kind = get_or<std::string>(r, "kind", cfg.reward.kind, "reward");
        cfg.reward.endpoint = get_or<std::string>(r, "endpoint", cfg.reward.endpoint, "reward");
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        detail::reject_unknown_keys(d, {"n_videos", "n_clips", "stream_dims", "captions_per_video"},
                                    "config.data");
        cfg.data.n_videos = get_or<size_t>(d, "n_videos", cfg.data.n_videos, "data");
        cfg.data.n_clips = get_or<size_t>(d, "n_clips", cfg.data.n_clips, "data");
        cfg.data.stream_dims =
            get_or<std::vector<size_t>>(d, "stream_dims", cfg.data.stream_dims, "data");
        cfg.data.captions_per_video =
            get_or<size_t>(d, "captions_per_video", cfg.data.captions_per_video, "data");
    }
    cfg.validate();
    return cfg;
}

} // namespace vslan
