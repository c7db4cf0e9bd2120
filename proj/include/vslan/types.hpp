#pragma once

#include <array>
#include <string>
#include <vector>

namespace vslan {

// Reserved word-vocabulary indices.
namespace tok {
constexpr int PAD = 0;
constexpr int UNK = 1;
constexpr int BOS = 2;
constexpr int EOS = 3;
} // namespace tok

struct TokenSequence {
    std::vector<int> tokens;

    size_t size() const { return tokens.size(); }
    bool operator==(const TokenSequence&) const = default;
};

// POS tagset: 12 universal tags plus control symbols. Index layout is fixed;
// the synthetic corpus emits gold tags directly.
namespace pos {
constexpr int PAD = 0;
constexpr int BOS = 1;
constexpr int EOS = 2;

inline const std::vector<std::string>& tagset() {
    static const std::vector<std::string> tags = {
        "<pad>", "<bos>", "<eos>",
        "NOUN", "VERB", "DET", "ADJ", "ADV", "ADP",
        "PRON", "CONJ", "NUM", "PRT", "X", "PUNCT"};
    return tags;
}

inline size_t vocab_size() { return tagset().size(); }

inline int tag_index(const std::string& name) {
    const auto& t = tagset();
    for (size_t i = 0; i < t.size(); ++i)
        if (t[i] == name) return static_cast<int>(i);
    return -1;
}
} // namespace pos

struct PosSequence {
    std::vector<int> tags;

    size_t size() const { return tags.size(); }
    bool operator==(const PosSequence&) const = default;
};

} // namespace vslan
