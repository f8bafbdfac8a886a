#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dspas/digest.hpp"

namespace dspas {

/// Standard normal upper tail, 0.5 * erfc(x / sqrt(2)).
double q_function(double x) noexcept;

struct SystemParams {
    unsigned word_size = 8;           // W, bytes
    std::size_t transform_size = 1024; // L, words
    unsigned quant_bits = 4;          // q
    double amplitude = 0.0;           // A; 0 means 2^(8W-1) - 1
    std::size_t excerpt_words = 0;    // l, words

    double amp() const noexcept;

    /// l = floor(l_bytes / W).
    static SystemParams for_excerpt(const DigestParams& params, std::size_t l_bytes);
};

enum class NoiseSource : std::uint8_t { calibrated, table };

struct NoiseModel {
    double sigma_n_sq = 0.0;
    NoiseSource source = NoiseSource::table;
    // Filled by calibration only.
    double mean = 0.0;
    double lag1_autocorrelation = 0.0;
    double signal_variance = 0.0;
    std::size_t samples = 0;
};

/// Noise variances measured on the reference trace for q = 3, 4, 5.
/// Throws ContractViolation for other q.
NoiseModel table_noise(unsigned quant_bits);

/// 1 - (1 - Q(K))^(L - l + 1). Throws ContractViolation unless 1 <= l <= L.
double fp_probability(double k, std::size_t transform_size, std::size_t excerpt_words);

struct CorrelationStats {
    double sigma_cn = 0.0; // A sqrt(l A^2/9 + l sigma^2/3)
    double sigma_cz = 0.0; // A sqrt(sigma^2 l / 3)
    double mu_cz = 0.0;    // l A^2 / 3
};

CorrelationStats correlation_stats(const SystemParams& p, const NoiseModel& nm);

/// 1 - Q((K sigma_Cn - mu_CZ) / sigma_CZ), evaluated with A factored out.
/// Without noise: 0 if sqrt(l) > K, 1 if sqrt(l) < K, 0.5 at equality.
double fn_probability(double k, const SystemParams& p, const NoiseModel& nm);

struct ErrorTargets {
    double fp_max = 1e-3;
    double fn_max = 1e-6;
};

struct ThresholdChoice {
    double k = 0.0;
    bool feasible = true;
    bool from_table = false;
    double fp = 0.0; // achieved at k
    double fn = 0.0; // achieved at k
};

/// Reference anchors (bytes -> K).
inline constexpr std::size_t kTableLengths[] = {300, 400, 500, 600};
inline constexpr double kTableCoefficients[] = {4.2, 4.6, 5.0, 5.2};

/// Piecewise-linear interpolation over the anchors; l_bytes must lie in [300, 600].
double table_coefficient(std::size_t l_bytes);

/// Largest K with FN <= fn_max, then checked against fp_max.
ThresholdChoice solve_threshold_coefficient(const SystemParams& p, const NoiseModel& nm, const ErrorTargets& targets);

/// Table interpolation inside [300, 600] bytes. Outside, the solver result
/// clamped to stay at or below 4.2 for shorter excerpts and at or above 5.2
/// for longer ones, so K never decreases as l grows.
ThresholdChoice select_threshold_coefficient(std::size_t l_bytes, const SystemParams& p, const NoiseModel& nm,
                                             const ErrorTargets& targets = {});

/// K * (1 - budget) for an assumed corrupted-word fraction budget in [0, 0.2].
double similarity_adjusted_coefficient(double k, double mismatch_budget);

/// Digests and reconstructs every payload; sigma_n_sq is the sample variance
/// of P - I over non-pad words. Throws CalibrationError below `min_words`.
NoiseModel calibrate_noise(std::span<const Bytes> corpus, const DigestParams& params,
                           std::size_t min_words = 1'000'000);

/// calibrate_noise over pseudorandom payloads of `flow_bytes` each, totalling at least `words` words.
NoiseModel calibrate_noise_synthetic(const DigestParams& params, std::size_t words, std::uint64_t seed,
                                     std::size_t flow_bytes = 65536);

} // namespace dspas
