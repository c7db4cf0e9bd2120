#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "vslan/errors.hpp"
#include "vslan/fan.hpp"
#include "vslan/rng.hpp"
#include "vslan/types.hpp"

namespace vslan::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- binary feature files ----------------------------------------------------

// Layout: "VSLF" | u32 version (=1) | u32 clip count | u32 dim |
// clip-major rows of little-endian f32.
struct FeatureFile {
    uint32_t version = 1;
    uint32_t clip_count = 0;
    uint32_t dim = 0;
    std::vector<float> payload; // row-major [clip_count, dim]
};

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw DataError(DataError::Kind::truncated, "feature file truncated while reading " + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

} // namespace detail

inline void write_features(const fs::path& path, uint32_t clip_count, uint32_t dim,
                           const std::vector<float>& payload) {
    if (payload.size() != static_cast<size_t>(clip_count) * dim)
        throw ShapeError("write_features: payload size does not match clip_count*dim");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(DataError::Kind::missing, "cannot open " + path.string() + " for writing");
    os.write("VSLF", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, clip_count);
    detail::put_u32(os, dim);
    for (float f : payload) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(os, bits);
    }
    if (!os) throw DataError(DataError::Kind::truncated, "short write to " + path.string());
}

inline FeatureFile read_features(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(DataError::Kind::missing, "feature file not found: " + path.string());
    char magic[4];
    if (!is.read(magic, 4))
        throw DataError(DataError::Kind::truncated, "feature file too short: " + path.string());
    if (std::memcmp(magic, "VSLF", 4) != 0)
        throw DataError(DataError::Kind::bad_magic, "bad magic in " + path.string());
    FeatureFile f;
    f.version = detail::get_u32(is, "version");
    if (f.version != 1)
        throw DataError(DataError::Kind::bad_version,
                        "unsupported feature file version " + std::to_string(f.version) + " in " +
                            path.string());
    f.clip_count = detail::get_u32(is, "clip count");
    f.dim = detail::get_u32(is, "dim");
    size_t n = static_cast<size_t>(f.clip_count) * f.dim;
    f.payload.resize(n);
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits = detail::get_u32(is, "payload");
        std::memcpy(&f.payload[i], &bits, 4);
    }
    char extra;
    if (is.read(&extra, 1))
        throw DataError(DataError::Kind::malformed, "trailing bytes in " + path.string());
    return f;
}

// ---- vocabulary ----------------------------------------------------------------

struct Vocabulary {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;

    static Vocabulary build(const std::vector<std::string>& words) {
        Vocabulary v;
        v.tokens = {"<pad>", "<unk>", "<bos>", "<eos>"};
        for (const auto& w : words)
            if (std::find(v.tokens.begin(), v.tokens.end(), w) == v.tokens.end())
                v.tokens.push_back(w);
        v.reindex();
        return v;
    }

    void reindex() {
        index.clear();
        for (size_t i = 0; i < tokens.size(); ++i) index[tokens[i]] = static_cast<int>(i);
    }

    size_t size() const { return tokens.size(); }

    int encode_token(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? tok::UNK : it->second;
    }

    TokenSequence encode(const std::string& text) const {
        TokenSequence seq;
        size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && text[i] == ' ') ++i;
            size_t j = i;
            while (j < text.size() && text[j] != ' ') ++j;
            if (j > i) seq.tokens.push_back(encode_token(text.substr(i, j - i)));
            i = j;
        }
        return seq;
    }

    std::string decode(const TokenSequence& seq) const {
        std::string out;
        for (int t : seq.tokens) {
            if (t == tok::PAD || t == tok::BOS || t == tok::EOS) continue;
            if (t < 0 || static_cast<size_t>(t) >= tokens.size()) continue;
            if (!out.empty()) out += ' ';
            out += tokens[static_cast<size_t>(t)];
        }
        return out;
    }

    void save(const fs::path& path) const {
        std::ofstream os(path);
        if (!os) throw DataError(DataError::Kind::missing, "cannot write " + path.string());
        for (const auto& t : tokens) os << t << '\n';
    }

    static Vocabulary load(const fs::path& path) {
        std::ifstream is(path);
        if (!is) throw DataError(DataError::Kind::missing, "vocabulary not found: " + path.string());
        Vocabulary v;
        std::string line;
        while (std::getline(is, line)) v.tokens.push_back(line);
        if (v.tokens.size() < 4 || v.tokens[tok::PAD] != "<pad>" || v.tokens[tok::UNK] != "<unk>" ||
            v.tokens[tok::BOS] != "<bos>" || v.tokens[tok::EOS] != "<eos>")
            throw DataError(DataError::Kind::malformed,
                            "vocabulary is missing the reserved control tokens: " + path.string());
        v.reindex();
        if (v.index.size() != v.tokens.size())
            throw DataError(DataError::Kind::malformed,
                            "vocabulary contains duplicate tokens: " + path.string());
        return v;
    }
};

// ---- in-memory dataset ----------------------------------------------------------

struct FeatureStream {
    int stream_id = 0;
    size_t clips = 0;
    size_t dim = 0;
    std::vector<double> values; // row-major [clips, dim]
};

struct VideoExample {
    std::string video_id;
    std::vector<FeatureStream> streams;
    std::vector<TokenSequence> captions; // raw word ids, no control tokens
    std::vector<PosSequence> pos;        // aligned 1:1 with captions, no control tags
    std::vector<std::string> caption_text;
};

struct Dataset {
    Vocabulary vocab;
    std::vector<VideoExample> videos;
    std::vector<StreamSpec> stream_specs;
    std::unordered_map<std::string, size_t> by_id;

    size_t num_streams() const { return stream_specs.size(); }
    std::vector<size_t> stream_dims() const {
        std::vector<size_t> d;
        for (const auto& s : stream_specs) d.push_back(s.dim);
        return d;
    }
    const VideoExample& video(const std::string& id) const {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw DataError(DataError::Kind::missing, "unknown video id: " + id);
        return videos[it->second];
    }
};

// ---- synthetic scene generator ----------------------------------------------------

struct SceneProgram {
    int subject_id = 0, verb_id = 0, object_id = 0, location_id = 0;
    int n_clips = 0;
};

struct SyntheticConfig {
    size_t n_videos = 200;
    size_t n_clips = 8;
    std::vector<size_t> stream_dims = {24, 16, 20};
    size_t captions_per_video = 4;
    uint64_t seed = 1;
    double noise_sigma = 0.1;
};

namespace synth {

inline const std::vector<std::string>& subjects() {
    static const std::vector<std::string> v = {"man", "woman", "dog",  "cat",
                                               "boy", "girl",  "bird", "horse"};
    return v;
}
inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {"play", "jump", "kick", "push",
                                               "lift", "walk", "pull", "throw"};
    return v;
}
inline const std::vector<std::string>& objects() {
    static const std::vector<std::string> v = {"ball",   "box",  "guitar", "book",
                                               "bottle", "drum", "stick",  "rope"};
    return v;
}
inline const std::vector<std::string>& locations() {
    static const std::vector<std::string> v = {"park", "room", "street", "garden", "yard", "field"};
    return v;
}

// one-hot block layout: [subject | verb | object | location]
inline size_t onehot_dim() {
    return subjects().size() + verbs().size() + objects().size() + locations().size();
}

inline std::vector<double> onehot(const SceneProgram& p) {
    std::vector<double> u(onehot_dim(), 0.0);
    size_t off = 0;
    u[off + p.subject_id] = 1.0;
    off += subjects().size();
    u[off + p.verb_id] = 1.0;
    off += verbs().size();
    u[off + p.object_id] = 1.0;
    off += objects().size();
    u[off + p.location_id] = 1.0;
    return u;
}

// Which one-hot blocks stream m of M carries. Stream 0 always carries the
// verb (coarse action); the last stream carries object and location; the
// union always covers every block.
inline std::array<bool, 4> stream_mask(size_t m, size_t M) {
    // order: subject, verb, object, location
    if (M <= 1) return {true, true, true, true};
    if (M == 2) return m == 0 ? std::array<bool, 4>{true, true, false, false}
                              : std::array<bool, 4>{false, false, true, true};
    if (M == 3) {
        if (m == 0) return {true, true, false, false};
        if (m == 1) return {true, false, true, false};
        return {false, false, true, true};
    }
    if (m == 0) return {false, true, false, false};
    if (m == 1) return {true, true, false, false};
    if (m + 1 == M) return {false, false, true, true};
    return {true, false, true, false};
}

inline std::vector<double> masked_onehot(const SceneProgram& p, size_t m, size_t M) {
    std::vector<double> u = onehot(p);
    auto mask = stream_mask(m, M);
    std::array<size_t, 4> sizes{subjects().size(), verbs().size(), objects().size(),
                                locations().size()};
    size_t off = 0;
    for (size_t b = 0; b < 4; ++b) {
        if (!mask[b])
            for (size_t i = 0; i < sizes[b]; ++i) u[off + i] = 0.0;
        off += sizes[b];
    }
    return u;
}

// fixed random projection for stream m, [dim, onehot_dim]
inline std::vector<double> projection(size_t m, size_t dim, uint64_t seed) {
    Rng rng(derive_seed(seed, "synth.projection", m));
    return rng.normal_vec(dim * onehot_dim());
}

// noiseless per-clip mean of stream m for a program
inline std::vector<double> clean_stream_mean(const SceneProgram& p, size_t m, size_t M, size_t dim,
                                             uint64_t seed) {
    std::vector<double> u = masked_onehot(p, m, M);
    std::vector<double> A = projection(m, dim, seed);
    std::vector<double> out(dim, 0.0);
    for (size_t r = 0; r < dim; ++r)
        for (size_t c = 0; c < u.size(); ++c) out[r] += A[r * u.size() + c] * u[c];
    return out;
}

inline SceneProgram draw_program(Rng& rng, size_t n_clips) {
    SceneProgram p;
    p.subject_id = static_cast<int>(rng.uniform_index(subjects().size()));
    p.verb_id = static_cast<int>(rng.uniform_index(verbs().size()));
    p.object_id = static_cast<int>(rng.uniform_index(objects().size()));
    p.location_id = static_cast<int>(rng.uniform_index(locations().size()));
    p.n_clips = static_cast<int>(n_clips);
    return p;
}

struct Template {
    // slots: literal words or placeholders <subj>, <verbs>, <verbing>, <obj>, <loc>
    std::vector<std::string> words;
    std::vector<std::string> tags;
};

// Templates with pairwise-distinct tag sequences, so a POS trajectory
// identifies its template. Determiner slots are drawn per caption, which puts
// several high-probability single-token variants of every caption into the
// corpus; template-specific adverbs and adjectives keep shared 4-gram windows
// between templates rare.
inline const std::vector<Template>& templates() {
    static const std::vector<Template> t = {
        {{"<det>", "<subj>", "is", "<verbing>", "<det>", "<obj>"},
         {"DET", "NOUN", "VERB", "VERB", "DET", "NOUN"}},
        {{"<det>", "<subj>", "quickly", "<verbs>", "<det>", "<obj>", "in", "<det>", "<loc>"},
         {"DET", "NOUN", "ADV", "VERB", "DET", "NOUN", "ADP", "DET", "NOUN"}},
        {{"<det>", "<subj>", "<verbs>", "<det>", "<obj>"},
         {"DET", "NOUN", "VERB", "DET", "NOUN"}},
        {{"<det>", "<subj>", "is", "<verbing>", "in", "<det>", "<loc>"},
         {"DET", "NOUN", "VERB", "VERB", "ADP", "DET", "NOUN"}},
        {{"<det>", "<subj>", "is", "slowly", "<verbing>", "<det>", "<obj>", "near", "<det>",
          "<loc>"},
         {"DET", "NOUN", "VERB", "ADV", "VERB", "DET", "NOUN", "ADP", "DET", "NOUN"}},
        {{"there", "is", "<det>", "<subj>", "<verbing>", "<det>", "<obj>"},
         {"PRT", "VERB", "DET", "NOUN", "VERB", "DET", "NOUN"}},
        {{"<det>", "<subj>", "<verbs>", "<det>", "small", "<obj>"},
         {"DET", "NOUN", "VERB", "DET", "ADJ", "NOUN"}},
        {{"<det>", "<subj>", "<verbs>", "near", "<det>", "<loc>"},
         {"DET", "NOUN", "VERB", "ADP", "DET", "NOUN"}},
        {{"in", "<det>", "<loc>", "<det>", "<subj>", "<verbs>", "<det>", "<obj>"},
         {"ADP", "DET", "NOUN", "DET", "NOUN", "VERB", "DET", "NOUN"}},
        {{"<subj>", "is", "<verbing>", "<det>", "<obj>", "near", "<det>", "<loc>"},
         {"NOUN", "VERB", "VERB", "DET", "NOUN", "ADP", "DET", "NOUN"}},
        {{"there", "is", "<det>", "<subj>", "in", "<det>", "<loc>"},
         {"PRT", "VERB", "DET", "NOUN", "ADP", "DET", "NOUN"}},
        {{"<det>", "<obj>", "is", "near", "<det>", "<subj>", "in", "<det>", "<loc>"},
         {"DET", "NOUN", "VERB", "ADP", "DET", "NOUN", "ADP", "DET", "NOUN"}},
        {{"<det>", "<subj>", "<verbs>", "<det>", "big", "<obj>", "at", "<det>", "<loc>"},
         {"DET", "NOUN", "VERB", "DET", "ADJ", "NOUN", "ADP", "DET", "NOUN"}},
        {{"now", "<det>", "<subj>", "is", "<verbing>", "<det>", "<obj>"},
         {"ADV", "DET", "NOUN", "VERB", "VERB", "DET", "NOUN"}},
        {{"<det>", "small", "<subj>", "<verbs>", "<det>", "<obj>"},
         {"DET", "ADJ", "NOUN", "VERB", "DET", "NOUN"}},
        {{"<subj>", "is", "<verbing>", "at", "<det>", "<loc>"},
         {"NOUN", "VERB", "VERB", "ADP", "DET", "NOUN"}},
        {{"there", "is", "<det>", "big", "<obj>", "near", "<det>", "<loc>"},
         {"PRT", "VERB", "DET", "ADJ", "NOUN", "ADP", "DET", "NOUN"}},
        {{"<det>", "<subj>", "and", "<det>", "<obj>", "are", "in", "<det>", "<loc>"},
         {"DET", "NOUN", "CONJ", "DET", "NOUN", "VERB", "ADP", "DET", "NOUN"}}};
    return t;
}

inline std::pair<std::string, std::vector<std::string>> realize(const Template& tpl,
                                                                const SceneProgram& p, Rng& rng) {
    std::string text;
    for (const auto& w : tpl.words) {
        std::string word = w;
        if (w == "<subj>") word = subjects()[p.subject_id];
        else if (w == "<verbs>") word = verbs()[p.verb_id] + "s";
        else if (w == "<verbing>") word = verbs()[p.verb_id] + "ing";
        else if (w == "<obj>") word = objects()[p.object_id];
        else if (w == "<loc>") word = locations()[p.location_id];
        else if (w == "<det>") word = rng.uniform() < 0.5 ? "a" : "the";
        if (!text.empty()) text += ' ';
        text += word;
    }
    return {text, tpl.tags};
}

inline Vocabulary make_vocabulary() {
    std::vector<std::string> words{"a",    "the",     "is",     "in",    "near", "there",
                                   "quickly", "slowly", "small", "big",   "at",   "now",
                                   "and",  "are"};
    for (const auto& w : subjects()) words.push_back(w);
    for (const auto& v : verbs()) {
        words.push_back(v + "s");
        words.push_back(v + "ing");
    }
    for (const auto& w : objects()) words.push_back(w);
    for (const auto& w : locations()) words.push_back(w);
    return Vocabulary::build(words);
}

} // namespace synth

inline std::string video_name(size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vid%04zu", i);
    return buf;
}

// Generates the on-disk dataset: per-stream feature files, captions with gold
// POS, vocabulary, and the manifest. Byte-identical for a fixed config.
inline void gen_synthetic(const SyntheticConfig& cfg, const fs::path& out_dir) {
    if (cfg.stream_dims.empty() || cfg.n_videos == 0 || cfg.n_clips == 0 ||
        cfg.captions_per_video == 0)
        throw ConfigError("gen_synthetic: videos, clips, captions and streams must be positive");
    size_t M = cfg.stream_dims.size();
    fs::create_directories(out_dir / "features");

    Vocabulary vocab = synth::make_vocabulary();
    vocab.save(out_dir / "vocab.txt");

    std::ofstream captions(out_dir / "captions.jsonl");
    if (!captions)
        throw DataError(DataError::Kind::missing, "cannot write captions.jsonl in " + out_dir.string());
    json manifest = json::object();

    for (size_t vi = 0; vi < cfg.n_videos; ++vi) {
        std::string vid = video_name(vi);
        Rng rng(derive_seed(cfg.seed, "synth.video", vi));
        SceneProgram prog = synth::draw_program(rng, cfg.n_clips);

        json entry;
        entry["captions"] = cfg.captions_per_video;
        entry["streams"] = json::array();
        for (size_t m = 0; m < M; ++m) {
            size_t dim = cfg.stream_dims[m];
            std::vector<double> mean = synth::clean_stream_mean(prog, m, M, dim, cfg.seed);
            std::vector<float> payload(cfg.n_clips * dim);
            for (size_t c = 0; c < cfg.n_clips; ++c)
                for (size_t d = 0; d < dim; ++d)
                    payload[c * dim + d] =
                        static_cast<float>(mean[d] + cfg.noise_sigma * rng.normal());
            std::string rel = "features/" + vid + "_s" + std::to_string(m) + ".vslf";
            write_features(out_dir / rel, static_cast<uint32_t>(cfg.n_clips),
                           static_cast<uint32_t>(dim), payload);
            entry["streams"].push_back(rel);
        }
        manifest[vid] = entry;

        // distinct templates per video, wrapping if more captions than templates
        std::vector<size_t> order(synth::templates().size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (size_t ci = 0; ci < cfg.captions_per_video; ++ci) {
            const auto& tpl = synth::templates()[order[ci % order.size()]];
            auto [text, tags] = synth::realize(tpl, prog, rng);
            json line;
            line["video_id"] = vid;
            line["caption"] = text;
            line["pos"] = tags;
            captions << line.dump() << '\n';
        }
    }
    std::ofstream mf(out_dir / "manifest.json");
    if (!mf)
        throw DataError(DataError::Kind::missing, "cannot write manifest.json in " + out_dir.string());
    mf << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const fs::path& dir) {
    Dataset ds;
    ds.vocab = Vocabulary::load(dir / "vocab.txt");

    std::ifstream mf(dir / "manifest.json");
    if (!mf)
        throw DataError(DataError::Kind::missing, "manifest.json not found in " + dir.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::malformed, std::string("manifest.json: ") + e.what());
    }
    if (!manifest.is_object())
        throw DataError(DataError::Kind::malformed, "manifest.json must be an object");

    for (auto it = manifest.begin(); it != manifest.end(); ++it) {
        VideoExample ex;
        ex.video_id = it.key();
        const json& entry = it.value();
        if (!entry.contains("streams") || !entry["streams"].is_array())
            throw DataError(DataError::Kind::malformed,
                            "manifest entry for " + ex.video_id + " lacks a streams array");
        int sid = 0;
        for (const auto& rel : entry["streams"]) {
            FeatureFile f = read_features(dir / rel.get<std::string>());
            FeatureStream s;
            s.stream_id = sid++;
            s.clips = f.clip_count;
            s.dim = f.dim;
            s.values.assign(f.payload.begin(), f.payload.end());
            ex.streams.push_back(std::move(s));
        }
        ds.by_id[ex.video_id] = ds.videos.size();
        ds.videos.push_back(std::move(ex));
    }

    std::ifstream cf(dir / "captions.jsonl");
    if (!cf)
        throw DataError(DataError::Kind::missing, "captions.jsonl not found in " + dir.string());
    std::string line;
    size_t lineno = 0;
    while (std::getline(cf, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(DataError::Kind::malformed,
                            "captions.jsonl line " + std::to_string(lineno) + ": " + e.what());
        }
        auto vit = ds.by_id.find(j.at("video_id").get<std::string>());
        if (vit == ds.by_id.end())
            throw DataError(DataError::Kind::malformed,
                            "captions.jsonl line " + std::to_string(lineno) +
                                " references an unknown video");
        VideoExample& ex = ds.videos[vit->second];
        std::string text = j.at("caption").get<std::string>();
        TokenSequence toks = ds.vocab.encode(text);
        PosSequence tags;
        for (const auto& t : j.at("pos")) {
            int idx = pos::tag_index(t.get<std::string>());
            if (idx < 0)
                throw DataError(DataError::Kind::malformed,
                                "captions.jsonl line " + std::to_string(lineno) +
                                    ": unknown POS tag " + t.get<std::string>());
            tags.tags.push_back(idx);
        }
        if (tags.tags.size() != toks.tokens.size())
            throw DataError(DataError::Kind::malformed,
                            "captions.jsonl line " + std::to_string(lineno) +
                                ": POS length does not match caption length");
        ex.caption_text.push_back(std::move(text));
        ex.captions.push_back(std::move(toks));
        ex.pos.push_back(std::move(tags));
    }

    if (!ds.videos.empty()) {
        const VideoExample& first = ds.videos.front();
        for (size_t m = 0; m < first.streams.size(); ++m)
            ds.stream_specs.push_back(
                {static_cast<int>(m), "stream" + std::to_string(m), first.streams[m].dim, m});
        for (const auto& v : ds.videos) {
            if (v.streams.size() != ds.stream_specs.size())
                throw DataError(DataError::Kind::malformed,
                                "video " + v.video_id + " has an inconsistent stream count");
            for (size_t m = 0; m < v.streams.size(); ++m)
                if (v.streams[m].dim != ds.stream_specs[m].dim)
                    throw DataError(DataError::Kind::malformed,
                                    "video " + v.video_id + " stream " + std::to_string(m) +
                                        " dim mismatch");
            if (v.captions.empty())
                throw DataError(DataError::Kind::malformed,
                                "video " + v.video_id + " has no captions");
        }
    }
    return ds;
}

// ---- batching -------------------------------------------------------------------

struct Batch {
    std::vector<std::pair<size_t, size_t>> items; // (video index, caption index)
    std::vector<std::vector<int>> padded_tokens;  // caption + EOS, padded with PAD
    size_t max_len = 0;
    size_t token_count = 0; // real (non-pad) targets including EOS
};

// Epoch-shuffled fixed-size batches; the shuffle is a pure function of
// (seed, epoch).
inline std::vector<Batch> make_batches(const Dataset& ds, size_t batch_size, uint64_t seed,
                                       uint64_t epoch) {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    std::vector<std::pair<size_t, size_t>> instances;
    for (size_t v = 0; v < ds.videos.size(); ++v)
        for (size_t c = 0; c < ds.videos[v].captions.size(); ++c) instances.emplace_back(v, c);
    Rng rng(derive_seed(seed, "shuffle", epoch));
    rng.shuffle(instances);

    std::vector<Batch> batches;
    for (size_t start = 0; start < instances.size(); start += batch_size) {
        Batch b;
        size_t end = std::min(start + batch_size, instances.size());
        for (size_t i = start; i < end; ++i) {
            b.items.push_back(instances[i]);
            const auto& cap = ds.videos[instances[i].first].captions[instances[i].second];
            b.max_len = std::max(b.max_len, cap.tokens.size() + 1); // + EOS
        }
        for (const auto& [v, c] : b.items) {
            const auto& cap = ds.videos[v].captions[c];
            std::vector<int> row = cap.tokens;
            row.push_back(tok::EOS);
            b.token_count += row.size();
            row.resize(b.max_len, tok::PAD);
            b.padded_tokens.push_back(std::move(row));
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

// Wraps one raw stream as a constant tensor for the encoder.
inline diff::Tensor stream_tensor(const FeatureStream& s) {
    return diff::Tensor::from({s.clips, s.dim}, s.values);
}

inline std::vector<diff::Tensor> video_streams(const VideoExample& v) {
    std::vector<diff::Tensor> out;
    out.reserve(v.streams.size());
    for (const auto& s : v.streams) out.push_back(stream_tensor(s));
    return out;
}

} // namespace vslan::data
