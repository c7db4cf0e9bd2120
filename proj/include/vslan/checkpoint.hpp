#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vslan/errors.hpp"
#include "vslan/optim.hpp"
#include "vslan/params.hpp"

namespace vslan {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Checkpoint layout: "VSLN" | u32 format version | u32 meta length | meta JSON
// (config echo plus progress counters) | records until EOF, each record being
// u32 name length | name | u32 rank | u32 dims... | f64 little-endian values.
// Optimizer state rides along as records named "opt.*".

struct CheckpointRecord {
    diff::Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    json meta;
    std::map<std::string, CheckpointRecord> records;
};

namespace ckpt_detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool try_u32(std::istream& is, uint32_t& out) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    out = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
          (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

inline uint32_t get_u32(std::istream& is, const char* what) {
    uint32_t v;
    if (!try_u32(is, v))
        throw DataError(DataError::Kind::truncated,
                        std::string("checkpoint truncated while reading ") + what);
    return v;
}

inline double get_f64(std::istream& is, const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw DataError(DataError::Kind::truncated,
                        std::string("checkpoint truncated while reading ") + what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_record(std::ostream& os, const std::string& name, const diff::Shape& shape,
                         const std::vector<double>& values) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<uint32_t>(shape.size()));
    for (size_t d : shape) put_u32(os, static_cast<uint32_t>(d));
    for (double v : values) put_f64(os, v);
}

} // namespace ckpt_detail

inline void save_checkpoint(const fs::path& path, const ParamMap& params, const AdamState& opt,
                            const json& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError(DataError::Kind::missing, "cannot write checkpoint " + path.string());
    os.write("VSLN", 4);
    ckpt_detail::put_u32(os, 1);
    std::string meta_str = meta.dump();
    ckpt_detail::put_u32(os, static_cast<uint32_t>(meta_str.size()));
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (const auto& [name, t] : params)
        ckpt_detail::write_record(os, name, t.shape(), t.data());
    for (const auto& [name, m] : opt.m)
        ckpt_detail::write_record(os, "opt.m." + name, {m.size()}, m);
    for (const auto& [name, v] : opt.v)
        ckpt_detail::write_record(os, "opt.v." + name, {v.size()}, v);
    ckpt_detail::write_record(os, "opt.t", {1}, {static_cast<double>(opt.step)});
    if (!os) throw DataError(DataError::Kind::truncated, "short write to " + path.string());
}

inline Checkpoint read_checkpoint(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError(DataError::Kind::missing, "checkpoint not found: " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "VSLN", 4) != 0)
        throw DataError(DataError::Kind::bad_magic, "bad checkpoint magic in " + path.string());
    uint32_t version = ckpt_detail::get_u32(is, "format version");
    if (version != 1)
        throw DataError(DataError::Kind::bad_version,
                        "unsupported checkpoint version " + std::to_string(version));
    uint32_t meta_len = ckpt_detail::get_u32(is, "meta length");
    std::string meta_str(meta_len, '\0');
    if (!is.read(meta_str.data(), meta_len))
        throw DataError(DataError::Kind::truncated, "checkpoint truncated in meta block");
    Checkpoint out;
    try {
        out.meta = json::parse(meta_str);
    } catch (const json::exception& e) {
        throw DataError(DataError::Kind::malformed,
                        std::string("checkpoint meta is not valid JSON: ") + e.what());
    }
    uint32_t name_len;
    while (ckpt_detail::try_u32(is, name_len)) {
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw DataError(DataError::Kind::truncated, "checkpoint truncated in record name");
        uint32_t rank = ckpt_detail::get_u32(is, "record rank");
        CheckpointRecord rec;
        size_t numel = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            uint32_t d = ckpt_detail::get_u32(is, "record dim");
            rec.shape.push_back(d);
            numel *= d;
        }
        rec.values.resize(numel);
        for (size_t i = 0; i < numel; ++i) rec.values[i] = ckpt_detail::get_f64(is, name.c_str());
        out.records.emplace(std::move(name), std::move(rec));
    }
    return out;
}

// Installs model parameters and optimizer state from a checkpoint.
inline void apply_checkpoint(const Checkpoint& ck, ParamMap& params, AdamState* opt = nullptr) {
    for (auto& [name, t] : params) {
        auto it = ck.records.find(name);
        if (it == ck.records.end())
            throw DataError(DataError::Kind::malformed,
                            "checkpoint is missing parameter '" + name + "'");
        if (it->second.shape != t.shape())
            throw DataError(DataError::Kind::malformed,
                            "checkpoint shape mismatch for '" + name + "': file has " +
                                diff::shape_str(it->second.shape) + ", model has " +
                                diff::shape_str(t.shape()));
        t.data() = it->second.values;
    }
    if (!opt) return;
    opt->m.clear();
    opt->v.clear();
    opt->step = 0;
    auto t_it = ck.records.find("opt.t");
    if (t_it == ck.records.end()) return; // fresh optimizer
    opt->step = static_cast<int64_t>(t_it->second.values.at(0));
    for (const auto& [name, t] : params) {
        auto m_it = ck.records.find("opt.m." + name);
        auto v_it = ck.records.find("opt.v." + name);
        if (m_it == ck.records.end() || v_it == ck.records.end())
            throw DataError(DataError::Kind::malformed,
                            "checkpoint optimizer state incomplete for '" + name + "'");
        opt->m[name] = m_it->second.values;
        opt->v[name] = v_it->second.values;
    }
}

} // namespace vslan
