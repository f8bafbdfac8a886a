#include "dspas/digest.hpp"

#include <string>

#include "dspas/byte_io.hpp"
#include "dspas/error.hpp"
#include "dspas/quantizer.hpp"
#include "dspas/transform.hpp"

namespace dspas {

void DigestParams::validate() const {
    preprocess.validate();
    if (transform_size < 1 || transform_size > (std::size_t{1} << 24)) {
        throw ContractViolation("transform size must be in [1, 2^24], got " + std::to_string(transform_size));
    }
    if (quant_bits < kMinQuantBits || quant_bits > kMaxQuantBits) {
        throw ContractViolation("quantization bits must be in [2, 16], got " + std::to_string(quant_bits));
    }
    if (!is_known_codec(static_cast<std::uint8_t>(codec))) {
        throw ContractViolation("unknown codec id " + std::to_string(static_cast<int>(codec)));
    }
}

std::uint64_t pad_seed_for(const FlowKey& key, std::uint32_t chunk_index, const DigestParams& params) noexcept {
    return combine64(combine64(params.preprocess.hash_seed, key.hash()), chunk_index);
}

FlowDigest digest_words(const FlowKey& key, TimestampNs first_seen, std::vector<Word> words,
                        const DigestParams& params) {
    params.validate();
    const std::size_t L = params.transform_size;
    const auto last_chunk = static_cast<std::uint32_t>(words.size() / L);

    WordSignal sig;
    sig.words = std::move(words);
    sig = pad_chunk(std::move(sig), L, pad_seed_for(key, last_chunk, params), params.preprocess.word_size);

    const std::size_t chunk_count = sig.words.size() / L;
    std::vector<QuantizedChunk> chunks;
    chunks.reserve(chunk_count);
    std::vector<double> x(L);
    for (std::size_t c = 0; c < chunk_count; ++c) {
        for (std::size_t i = 0; i < L; ++i) {
            x[i] = static_cast<double>(sig.words[c * L + i]);
        }
        chunks.push_back(quantize(dct_forward(x, L, static_cast<std::uint32_t>(c)), params.quant_bits));
    }

    FlowDigest d;
    d.key = key;
    d.first_seen = first_seen;
    d.chunk_count = static_cast<std::uint32_t>(chunk_count);
    d.original_word_count = sig.original_word_count;
    d.exponents.reserve(chunk_count);
    for (const auto& c : chunks) {
        d.exponents.push_back(c.exponent);
    }
    d.coded = entropy_encode(chunks, params.quant_bits, params.codec);
    return d;
}

FlowDigest digest_flow(const FlowPayload& flow, const DigestParams& params) {
    params.validate();
    WordSignal sig = preprocess_payload(flow.bytes, params.preprocess);
    return digest_words(flow.key, flow.first_seen, std::move(sig.words), params);
}

FlowDigest parse_flow_digest(const FlowKey& key, TimestampNs first_seen, std::uint64_t original_word_count,
                             Bytes coded) {
    const std::string context = "flow " + key.to_string();
    ByteReader r(coded, context);
    FlowDigest d;
    d.key = key;
    d.first_seen = first_seen;
    d.original_word_count = original_word_count;
    d.chunk_count = r.u32();
    const ByteView exps = r.bytes(d.chunk_count);
    d.exponents.assign(exps.begin(), exps.end());
    d.coded = std::move(coded);
    return d;
}

ReconstructedSignal reconstruct_flow_signal(const FlowDigest& digest, const DigestParams& params) {
    params.validate();
    const std::size_t L = params.transform_size;
    if (digest.original_word_count > static_cast<std::uint64_t>(digest.chunk_count) * L) {
        throw IntegrityError(IntegrityError::Kind::corrupt_digest,
                             "flow " + digest.key.to_string() + ": word count exceeds its chunk capacity");
    }
    const auto chunks = entropy_decode(digest.coded, digest.chunk_count, params.quant_bits, L,
                                       "flow " + digest.key.to_string());
    ReconstructedSignal out;
    out.samples.reserve(chunks.size() * L);
    for (const auto& q : chunks) {
        const auto x = dct_inverse(dequantize(q), L);
        out.samples.insert(out.samples.end(), x.begin(), x.end());
    }
    out.valid_words = static_cast<std::size_t>(digest.original_word_count);
    return out;
}

} // namespace dspas
