#pragma once

#include <cstdint>
#include <vector>

#include "dspas/entropy.hpp"
#include "dspas/flow.hpp"
#include "dspas/preprocess.hpp"

namespace dspas {

/// Everything that must agree between the digest side and the query side.
struct DigestParams {
    PreprocessConfig preprocess;
    std::size_t transform_size = 1024; // L, words
    unsigned quant_bits = 4;           // q
    CodecId codec = CodecId::zero_run_lzma;

    /// Throws ContractViolation on out-of-range values.
    void validate() const;
};

/// Seed for the pad words of one chunk, keyed by archive seed, flow and chunk index.
std::uint64_t pad_seed_for(const FlowKey& key, std::uint32_t chunk_index, const DigestParams& params) noexcept;

struct FlowDigest {
    FlowKey key;
    TimestampNs first_seen = 0;
    std::uint32_t chunk_count = 0;
    std::uint64_t original_word_count = 0;
    std::vector<std::uint8_t> exponents;
    /// Full coded stream, exponents and codec id included.
    Bytes coded;

    bool operator==(const FlowDigest&) const = default;
};

/// Preprocess, pad, transform, quantize and entropy-code one flow payload.
FlowDigest digest_flow(const FlowPayload& flow, const DigestParams& params);

/// Same pipeline starting from already-hashed words (unpadded).
FlowDigest digest_words(const FlowKey& key, TimestampNs first_seen, std::vector<Word> words,
                        const DigestParams& params);

/// Rebuilds a FlowDigest's derived fields from a coded stream.
FlowDigest parse_flow_digest(const FlowKey& key, TimestampNs first_seen, std::uint64_t original_word_count,
                             Bytes coded);

struct ReconstructedSignal {
    std::vector<double> samples; // chunk_count * L
    std::size_t valid_words = 0; // samples past this index are pad
};

/// entropy_decode, dequantize and dct_inverse per chunk, chunks in order.
ReconstructedSignal reconstruct_flow_signal(const FlowDigest& digest, const DigestParams& params);

} // namespace dspas
