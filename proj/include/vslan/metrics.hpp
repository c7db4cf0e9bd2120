#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "vslan/errors.hpp"

namespace vslan::metrics {

// lowercase, strip punctuation, split on spaces
inline std::vector<std::string> tokenize(const std::string& s) {
    std::string clean;
    clean.reserve(s.size());
    for (unsigned char c : s) {
        if (std::isalnum(c))
            clean.push_back(static_cast<char>(std::tolower(c)));
        else if (std::isspace(c))
            clean.push_back(' ');
        // punctuation dropped
    }
    std::vector<std::string> out;
    size_t i = 0;
    while (i < clean.size()) {
        while (i < clean.size() && clean[i] == ' ') ++i;
        size_t j = i;
        while (j < clean.size() && clean[j] != ' ') ++j;
        if (j > i) out.push_back(clean.substr(i, j - i));
        i = j;
    }
    return out;
}

namespace detail {

using Key = std::vector<int>;

struct KeyHash {
    size_t operator()(const Key& k) const {
        uint64_t h = 1469598103934665603ull;
        for (int v : k) {
            h ^= static_cast<uint64_t>(v) + 0x9e3779b9u;
            h *= 1099511628211ull;
        }
        return static_cast<size_t>(h);
    }
};

struct Interner {
    std::unordered_map<std::string, int> ids;
    int intern(const std::string& tok) {
        auto [it, inserted] = ids.emplace(tok, static_cast<int>(ids.size()));
        return it->second;
    }
    std::vector<int> intern_all(const std::vector<std::string>& toks) {
        std::vector<int> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(intern(t));
        return out;
    }
};

} // namespace detail

struct NGramCounts {
    int n = 1;
    std::unordered_map<detail::Key, int, detail::KeyHash> counts;
};

inline NGramCounts count_ngrams(const std::vector<int>& tokens, int n) {
    NGramCounts out;
    out.n = n;
    if (static_cast<int>(tokens.size()) >= n) {
        for (size_t i = 0; i + n <= tokens.size(); ++i)
            out.counts[detail::Key(tokens.begin() + i, tokens.begin() + i + n)] += 1;
    }
    return out;
}

// Document frequencies over reference sets, the TF-IDF base for CIDEr.
struct CorpusStats {
    std::shared_ptr<detail::Interner> vocab = std::make_shared<detail::Interner>();
    std::array<std::unordered_map<detail::Key, int, detail::KeyHash>, 4> doc_freq;
    size_t num_docs = 0;

    // log corpus size; pinned to 1 for a single-document corpus so idf
    // weights do not vanish
    double ref_len() const {
        return num_docs <= 1 ? 1.0 : std::log(static_cast<double>(num_docs));
    }
};

inline CorpusStats build_corpus_stats(const std::vector<std::vector<std::string>>& reference_sets) {
    CorpusStats stats;
    stats.num_docs = reference_sets.size();
    for (const auto& refs : reference_sets) {
        std::array<std::unordered_map<detail::Key, int, detail::KeyHash>, 4> seen;
        for (const auto& ref : refs) {
            auto toks = stats.vocab->intern_all(tokenize(ref));
            for (int n = 1; n <= 4; ++n)
                for (const auto& [key, c] : count_ngrams(toks, n).counts) seen[n - 1][key] = 1;
        }
        for (int n = 0; n < 4; ++n)
            for (const auto& [key, one] : seen[n]) stats.doc_freq[n][key] += 1;
    }
    return stats;
}

namespace detail {

struct BleuTally {
    std::array<long long, 4> matches{0, 0, 0, 0};
    std::array<long long, 4> totals{0, 0, 0, 0};
    long long cand_len = 0;
    long long ref_len = 0;
};

inline void bleu_accumulate(BleuTally& tally, const std::vector<std::string>& cand_toks,
                            const std::vector<std::vector<std::string>>& ref_toks) {
    Interner local;
    std::vector<int> cand = local.intern_all(cand_toks);
    std::vector<std::vector<int>> refs;
    refs.reserve(ref_toks.size());
    for (const auto& r : ref_toks) refs.push_back(local.intern_all(r));

    tally.cand_len += static_cast<long long>(cand.size());
    // closest reference length; ties resolved toward the shorter one
    long long best = refs.empty() ? 0 : static_cast<long long>(refs[0].size());
    for (const auto& r : refs) {
        long long len = static_cast<long long>(r.size());
        long long c = static_cast<long long>(cand.size());
        if (std::llabs(len - c) < std::llabs(best - c) ||
            (std::llabs(len - c) == std::llabs(best - c) && len < best))
            best = len;
    }
    tally.ref_len += best;

    for (int n = 1; n <= 4; ++n) {
        NGramCounts cc = count_ngrams(cand, n);
        std::unordered_map<Key, int, KeyHash> max_ref;
        for (const auto& r : refs)
            for (const auto& [key, c] : count_ngrams(r, n).counts)
                max_ref[key] = std::max(max_ref[key], c);
        for (const auto& [key, c] : cc.counts) {
            tally.totals[n - 1] += c;
            auto it = max_ref.find(key);
            if (it != max_ref.end()) tally.matches[n - 1] += std::min(c, it->second);
        }
    }
}

// Corpus BLEU from a tally: uniform weights over the orders that exist,
// add-one smoothing on zero matches for n >= 2, brevity penalty.
inline double bleu_finish(const BleuTally& tally) {
    if (tally.cand_len == 0) return 0.0;
    double log_sum = 0.0;
    int orders = 0;
    for (int n = 0; n < 4; ++n) {
        if (tally.totals[n] == 0) continue; // candidate has no n-grams of this order
        double m = static_cast<double>(tally.matches[n]);
        double t = static_cast<double>(tally.totals[n]);
        if (tally.matches[n] == 0) {
            if (n == 0) return 0.0; // no unigram overlap at all
            m = 1.0;
            t += 1.0;
        }
        log_sum += std::log(m / t);
        ++orders;
    }
    if (orders == 0) return 0.0;
    double bp = tally.cand_len >= tally.ref_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(tally.ref_len) /
                                         static_cast<double>(tally.cand_len));
    return bp * std::exp(log_sum / orders);
}

} // namespace detail

// Corpus-level BLEU-4.
inline double bleu4(const std::vector<std::string>& candidates,
                    const std::vector<std::vector<std::string>>& references) {
    if (candidates.empty() || candidates.size() != references.size())
        throw Error(ErrorKind::data, "bleu4: empty corpus or mismatched candidate/reference lists");
    detail::BleuTally tally;
    for (size_t i = 0; i < candidates.size(); ++i) {
        std::vector<std::vector<std::string>> ref_toks;
        for (const auto& r : references[i]) ref_toks.push_back(tokenize(r));
        detail::bleu_accumulate(tally, tokenize(candidates[i]), ref_toks);
    }
    return detail::bleu_finish(tally);
}

// Sentence-level BLEU-4 (a one-item corpus).
inline double bleu4_sentence(const std::string& candidate,
                             const std::vector<std::string>& references) {
    return bleu4({candidate}, {references});
}

// Mean over n of 1..4 of TF-IDF cosine similarity against each reference,
// averaged over references, scaled by 10. No length penalty.
inline double cider(const std::string& candidate, const std::vector<std::string>& references,
                    const CorpusStats& stats) {
    if (stats.num_docs == 0) throw Error(ErrorKind::data, "cider: empty corpus statistics");
    if (references.empty()) throw Error(ErrorKind::data, "cider: no references");

    auto tfidf = [&](const std::vector<int>& toks, int n,
                     std::unordered_map<detail::Key, double, detail::KeyHash>& vec) {
        double norm_sq = 0.0;
        for (const auto& [key, c] : count_ngrams(toks, n).counts) {
            auto it = stats.doc_freq[n - 1].find(key);
            double df = it == stats.doc_freq[n - 1].end() ? 0.0 : it->second;
            double idf = stats.ref_len() - std::log(std::max(1.0, df));
            double w = static_cast<double>(c) * idf;
            vec[key] = w;
            norm_sq += w * w;
        }
        return std::sqrt(norm_sq);
    };

    std::vector<int> cand = stats.vocab->intern_all(tokenize(candidate));
    std::array<std::unordered_map<detail::Key, double, detail::KeyHash>, 4> cand_vec;
    std::array<double, 4> cand_norm{};
    for (int n = 1; n <= 4; ++n) cand_norm[n - 1] = tfidf(cand, n, cand_vec[n - 1]);

    double total = 0.0;
    for (const auto& ref : references) {
        std::vector<int> rtoks = stats.vocab->intern_all(tokenize(ref));
        double per_ref = 0.0;
        for (int n = 1; n <= 4; ++n) {
            std::unordered_map<detail::Key, double, detail::KeyHash> rvec;
            double rnorm = tfidf(rtoks, n, rvec);
            if (cand_norm[n - 1] == 0.0 || rnorm == 0.0) continue;
            double dot = 0.0;
            for (const auto& [key, w] : cand_vec[n - 1]) {
                auto it = rvec.find(key);
                if (it != rvec.end()) dot += w * it->second;
            }
            per_ref += dot / (cand_norm[n - 1] * rnorm);
        }
        total += per_ref / 4.0;
    }
    return 10.0 * total / static_cast<double>(references.size());
}

// LCS-based F-measure with beta^2 = 1.2, max over references.
inline double rouge_l(const std::string& candidate, const std::vector<std::string>& references) {
    const double beta_sq = 1.2;
    std::vector<std::string> cand = tokenize(candidate);
    double best = 0.0;
    for (const auto& ref : references) {
        std::vector<std::string> r = tokenize(ref);
        if (cand.empty() || r.empty()) continue;
        std::vector<std::vector<int>> dp(cand.size() + 1, std::vector<int>(r.size() + 1, 0));
        for (size_t i = 1; i <= cand.size(); ++i)
            for (size_t j = 1; j <= r.size(); ++j)
                dp[i][j] = cand[i - 1] == r[j - 1] ? dp[i - 1][j - 1] + 1
                                                   : std::max(dp[i - 1][j], dp[i][j - 1]);
        double lcs = dp[cand.size()][r.size()];
        if (lcs == 0.0) continue;
        double prec = lcs / static_cast<double>(cand.size());
        double rec = lcs / static_cast<double>(r.size());
        best = std::max(best, (1.0 + beta_sq) * prec * rec / (rec + beta_sq * prec));
    }
    return best;
}

inline double rouge_l_corpus(const std::vector<std::string>& candidates,
                             const std::vector<std::vector<std::string>>& references) {
    if (candidates.empty() || candidates.size() != references.size())
        throw Error(ErrorKind::data, "rouge_l: empty corpus or mismatched lists");
    double total = 0.0;
    for (size_t i = 0; i < candidates.size(); ++i) total += rouge_l(candidates[i], references[i]);
    return total / static_cast<double>(candidates.size());
}

// Cross-caption BLEU-4 within one video's sample set; lower means more
// diverse.
inline double mbleu4(const std::vector<std::string>& captions) {
    if (captions.size() < 2)
        throw Error(ErrorKind::data, "mbleu4: needs at least two captions per video");
    double total = 0.0;
    for (size_t i = 0; i < captions.size(); ++i) {
        std::vector<std::string> others;
        for (size_t j = 0; j < captions.size(); ++j)
            if (j != i) others.push_back(captions[j]);
        total += bleu4_sentence(captions[i], others);
    }
    return total / static_cast<double>(captions.size());
}

inline double mbleu4_corpus(const std::vector<std::vector<std::string>>& captions_per_video) {
    if (captions_per_video.empty()) throw Error(ErrorKind::data, "mbleu4: empty corpus");
    double total = 0.0;
    for (const auto& caps : captions_per_video) total += mbleu4(caps);
    return total / static_cast<double>(captions_per_video.size());
}

// Distinct-to-total n-gram ratio over one video's caption set.
inline double div_n(const std::vector<std::string>& captions, int n) {
    detail::Interner local;
    std::unordered_map<detail::Key, int, detail::KeyHash> distinct;
    long long total = 0;
    for (const auto& cap : captions) {
        std::vector<int> toks = local.intern_all(tokenize(cap));
        for (const auto& [key, c] : count_ngrams(toks, n).counts) {
            distinct[key] += 1;
            total += c;
        }
    }
    if (total == 0) return 1.0;
    return static_cast<double>(distinct.size()) / static_cast<double>(total);
}

inline double div_n_corpus(const std::vector<std::vector<std::string>>& captions_per_video,
                           int n) {
    if (captions_per_video.empty()) throw Error(ErrorKind::data, "div_n: empty corpus");
    double total = 0.0;
    for (const auto& caps : captions_per_video) total += div_n(caps, n);
    return total / static_cast<double>(captions_per_video.size());
}

} // namespace vslan::metrics
