#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dspas {

struct CoefficientChunk {
    std::vector<double> coeffs;
    std::uint32_t chunk_index = 0;
};

/// X_k = sum_{n=0}^{L-1} x_n cos[(pi/L)(n + 1/2)k], k = 0..L-1.
/// Throws ContractViolation if x.size() != transform_size.
CoefficientChunk dct_forward(std::span<const double> x, std::size_t transform_size, std::uint32_t chunk_index = 0);

/// x_n = X_0/L + (2/L) sum_{k=1}^{L-1} X_k cos[(pi/L)(n + 1/2)k]. Exact inverse of dct_forward.
std::vector<double> dct_inverse(const CoefficientChunk& chunk, std::size_t transform_size);

} // namespace dspas
