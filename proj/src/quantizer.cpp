#include "dspas/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dspas/error.hpp"

namespace dspas {

namespace {

// ceil(log2(v)) for v >= 1.
int ceil_log2(double v) {
    int exp = 0;
    const double mant = std::frexp(v, &exp); // v = mant * 2^exp, mant in [0.5, 1)
    return mant == 0.5 ? exp - 1 : exp;
}

} // namespace

QuantizedChunk quantize(const CoefficientChunk& chunk, unsigned quant_bits) {
    if (quant_bits < kMinQuantBits || quant_bits > kMaxQuantBits) {
        throw ContractViolation("quantization bits must be in [2, 16], got " + std::to_string(quant_bits));
    }
    double peak = 0.0;
    double peak_positive = 0.0;
    for (double x : chunk.coeffs) {
        if (!std::isfinite(x)) {
            throw ContractViolation("non-finite DCT coefficient");
        }
        peak = std::max(peak, std::abs(x));
        peak_positive = std::max(peak_positive, x);
    }
    const int q = static_cast<int>(quant_bits);
    const std::int32_t hi = (std::int32_t{1} << (q - 1)) - 1;
    const std::int32_t lo = -(std::int32_t{1} << (q - 1));
    int e = std::max(0, ceil_log2(peak + 1.0) - (q - 1));
    if (std::round(std::ldexp(peak_positive, -e)) > hi) {
        ++e;
    }

    QuantizedChunk out;
    out.chunk_index = chunk.chunk_index;
    out.exponent = static_cast<std::uint8_t>(e);
    out.codes.reserve(chunk.coeffs.size());
    for (double x : chunk.coeffs) {
        const double r = std::round(std::ldexp(x, -e));
        out.codes.push_back(static_cast<std::int32_t>(std::clamp(r, static_cast<double>(lo), static_cast<double>(hi))));
    }
    return out;
}

CoefficientChunk dequantize(const QuantizedChunk& chunk) {
    CoefficientChunk out;
    out.chunk_index = chunk.chunk_index;
    out.coeffs.reserve(chunk.codes.size());
    for (auto c : chunk.codes) {
        out.coeffs.push_back(std::ldexp(static_cast<double>(c), chunk.exponent));
    }
    return out;
}

} // namespace dspas
