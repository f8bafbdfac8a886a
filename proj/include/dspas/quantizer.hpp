#pragma once

#include <cstdint>
#include <vector>

#include "dspas/transform.hpp"

namespace dspas {

/// q-bit signed codes sharing one power-of-two scale 2^exponent.
struct QuantizedChunk {
    std::vector<std::int32_t> codes;
    std::uint8_t exponent = 0;
    std::uint32_t chunk_index = 0;

    bool operator==(const QuantizedChunk&) const = default;
};

inline constexpr unsigned kMinQuantBits = 2;
inline constexpr unsigned kMaxQuantBits = 16;

/// Keeps the q most significant bits of each coefficient relative to the
/// chunk's peak magnitude:
///   e = max(0, ceil(log2(max|X| + 1)) - (q - 1)), code = round(X / 2^e).
/// If the peak would round onto the unrepresentable +2^(q-1), e is raised by
/// one so that no code saturates and |X - code*2^e| <= 2^(e-1) always holds.
QuantizedChunk quantize(const CoefficientChunk& chunk, unsigned quant_bits);

/// X_k = code_k * 2^e.
CoefficientChunk dequantize(const QuantizedChunk& chunk);

} // namespace dspas
