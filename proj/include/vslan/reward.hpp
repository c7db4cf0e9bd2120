#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vslan/config.hpp"
#include "vslan/data.hpp"
#include "vslan/errors.hpp"
#include "vslan/metrics.hpp"
#include "vslan/rng.hpp"

namespace vslan {

class RewardProvider {
public:
    virtual ~RewardProvider() = default;
    virtual double score(const std::string& candidate, const std::vector<std::string>& references,
                         Rng& rng) = 0;
    virtual std::string kind() const = 0;
};

class CiderReward final : public RewardProvider {
public:
    explicit CiderReward(metrics::CorpusStats stats) : stats_(std::move(stats)) {}

    double score(const std::string& candidate, const std::vector<std::string>& references,
                 Rng&) override {
        if (candidate.empty()) return 0.0;
        return metrics::cider(candidate, references, stats_);
    }

    std::string kind() const override { return "builtin-cider"; }

    const metrics::CorpusStats& stats() const { return stats_; }

private:
    metrics::CorpusStats stats_;
};

// JSON-over-HTTP entailment scorer client. POSTs {"premise", "hypothesis"} to
// <endpoint>/score with a 5 s timeout and one retry; failures raise
// RewardError so a training step aborts instead of silently scoring 0.
class RemoteEntailmentReward final : public RewardProvider {
public:
    explicit RemoteEntailmentReward(std::string endpoint) : endpoint_(std::move(endpoint)) {
        if (endpoint_.empty()) throw ConfigError("remote-entailment: endpoint required");
    }

    double score(const std::string& candidate, const std::vector<std::string>& references,
                 Rng& rng) override {
        if (references.empty()) throw RewardError("remote-entailment: no reference premise");
        const std::string& premise = references[rng.uniform_index(references.size())];
        json body{{"premise", premise}, {"hypothesis", candidate}};
        std::string payload = body.dump();

        auto start = std::chrono::steady_clock::now();
        std::string last_error;
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (attempt > 0) {
                double elapsed =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                if (elapsed > 5.5) break; // a retry would blow the budget
            }
            httplib::Client client(endpoint_);
            client.set_connection_timeout(5, 0);
            client.set_read_timeout(5, 0);
            client.set_write_timeout(5, 0);
            httplib::Result res = client.Post("/score", payload, "application/json");
            if (!res) {
                last_error = "transport error (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP status " + std::to_string(res->status);
                continue;
            }
            json reply;
            try {
                reply = json::parse(res->body);
            } catch (const json::exception& e) {
                throw RewardError(std::string("entailment scorer protocol error: bad JSON: ") +
                                  e.what());
            }
            if (!reply.contains("score") || !reply["score"].is_number())
                throw RewardError("entailment scorer protocol error: missing numeric \"score\"");
            double s = reply["score"].get<double>();
            if (s < 0.0 || s > 1.0)
                throw RewardError("entailment scorer protocol error: score " +
                                  std::to_string(s) + " outside [0,1]");
            return s;
        }
        throw RewardError("entailment reward unavailable from " + endpoint_ + ": " + last_error);
    }

    std::string kind() const override { return "remote-entailment"; }

private:
    std::string endpoint_;
};

// Reference corpus for reward scoring: one document per video.
inline metrics::CorpusStats training_reference_stats(const data::Dataset& ds) {
    std::vector<std::vector<std::string>> sets;
    sets.reserve(ds.videos.size());
    for (const auto& v : ds.videos) sets.push_back(v.caption_text);
    return metrics::build_corpus_stats(sets);
}

inline std::unique_ptr<RewardProvider> make_reward_provider(const RewardConfig& cfg,
                                                            const data::Dataset& train_set) {
    if (cfg.kind == "builtin-cider")
        return std::make_unique<CiderReward>(training_reference_stats(train_set));
    if (cfg.kind == "remote-entailment")
        return std::make_unique<RemoteEntailmentReward>(cfg.endpoint);
    throw ConfigError("unknown reward kind: " + cfg.kind);
}

} // namespace vslan
