#pragma once

#include <vector>

#include "vslan/config.hpp"
#include "vslan/decoder.hpp"
#include "vslan/fan.hpp"
#include "vslan/params.hpp"
#include "vslan/types.hpp"
#include "vslan/vapen.hpp"

namespace vslan {

// Full VSLAN model: multi-stream encoder, POS encoder, caption decoder, with
// one shared parameter registry.
struct Model {
    Dims dims;
    std::vector<size_t> stream_dims;
    size_t vocab_size = 0;

    ParamMap params;
    EncoderWeights enc;
    VapenWeights vapen;
    DecoderWeights dec;

    static Model build(const Dims& dims, const std::vector<size_t>& stream_dims,
                       size_t vocab_size, uint64_t seed) {
        dims.validate();
        if (stream_dims.empty()) throw ConfigError("model: at least one feature stream required");
        if (vocab_size <= 4) throw ConfigError("model: vocabulary too small");
        Model m;
        m.dims = dims;
        m.stream_dims = stream_dims;
        m.vocab_size = vocab_size;
        m.enc = EncoderWeights::create(m.params, stream_dims, dims.z, dims.z_prime, dims.x,
                                       dims.y, seed);
        m.vapen = VapenWeights::create(m.params, stream_dims.size() * dims.z, dims.d_h,
                                       dims.delta, dims.pos_embed, pos::vocab_size(), dims.z,
                                       seed);
        m.dec = DecoderWeights::create(m.params, vocab_size, dims.embed, dims.d_h, dims.z,
                                       dims.z_prime, dims.x, seed);
        return m;
    }
};

} // namespace vslan
