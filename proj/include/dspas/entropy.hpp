#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dspas/hash.hpp"
#include "dspas/quantizer.hpp"

namespace dspas {

/// Lossless stage applied after the zero-run pre-pass.
enum class CodecId : std::uint8_t {
    zero_run = 0,      // pre-pass only
    zero_run_lzma = 1, // pre-pass followed by raw LZMA2
};

bool is_known_codec(std::uint8_t id) noexcept;

/// Packs codes at q bits each, two's complement, chunk-major, LSB-first within bytes.
Bytes pack_codes(std::span<const QuantizedChunk> chunks, unsigned quant_bits);

/// Inverse of pack_codes; `chunk_count * transform_size` codes are read.
std::vector<std::int32_t> unpack_codes(ByteView packed, std::size_t code_count, unsigned quant_bits);

/// Zero-byte run-length pre-pass. Runs of >= 4 zero bytes become
/// [0x88][u16 run]; a literal 0x88 becomes [0x88][0x0000].
Bytes zero_run_encode(ByteView packed);
Bytes zero_run_decode(ByteView encoded, std::size_t expected_size);

/// Encodes chunks into the coded stream
///   [chunk_count:u32][exponent:u8 x chunk_count][codec_id:u8][compressed blob].
Bytes entropy_encode(std::span<const QuantizedChunk> chunks, unsigned quant_bits, CodecId codec);

/// Inverse of entropy_encode. Throws IntegrityError(corrupt_digest) mentioning
/// `context` on any malformed or truncated stream.
std::vector<QuantizedChunk> entropy_decode(ByteView stream, std::uint32_t chunk_count, unsigned quant_bits,
                                           std::size_t transform_size, const std::string& context = "digest");

/// Pre-entropy data reduction floor W*8/q as a reduced fraction.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Ratio&) const = default;
};

Ratio data_reduction_ratio(unsigned word_size, unsigned quant_bits);

} // namespace dspas
