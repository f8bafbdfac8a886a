#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dspas/archive.hpp"
#include "dspas/preprocess.hpp"
#include "dspas/theory.hpp"

namespace dspas {

struct PeriodRange {
    std::uint64_t first = 0;
    std::uint64_t last = UINT64_MAX; // inclusive

    bool contains(std::uint64_t id) const noexcept { return id >= first && id <= last; }
};

struct Query {
    Bytes excerpt;
    WildcardMask mask;
    PeriodRange period_range;
    std::optional<double> threshold_override; // K
};

struct Threshold {
    double k = 0.0;
    double t = 0.0;
    double sigma_c = 0.0;
};

struct MatchResult {
    FlowKey key;
    std::uint64_t period_id = 0;
    TimestampNs first_seen = 0;
    std::size_t peak_position = 0; // Z, word index
    unsigned alignment_offset = 0;
    double peak_value = 0.0;
    Threshold threshold;
    std::uint64_t estimated_byte_offset = 0; // Z * W + alignment_offset

    double ratio() const noexcept { return peak_value / threshold.t; }
};

enum class CorrelationMethod : std::uint8_t { automatic, direct, fft };

/// C_n = sum_i P[n+i] S[i] for n = 0..M-l. Empty when l > M or l == 0.
std::vector<double> correlate(std::span<const double> p, std::span<const double> s,
                              CorrelationMethod method = CorrelationMethod::automatic);

/// T = K * sigma_c with sigma_c the sample standard deviation of C.
/// Throws ContractViolation if |C| < 2 and NoSignalError if sigma_c is zero.
Threshold compute_threshold(std::span<const double> c, double k);

/// Indices with C_n > T, clustered so that indices within `merge_radius` of
/// each other report once at their maximum. Clusters whose maximum starts at
/// or after `pad_start` (fully inside padding) are dropped.
std::vector<std::size_t> detect_peaks(std::span<const double> c, const Threshold& threshold, std::size_t pad_start,
                                      std::size_t merge_radius);

/// Work counters. Every counter depends only on excerpt length and corpus shape.
struct QueryStats {
    std::uint64_t queries = 0;
    std::uint64_t flows_scanned = 0;
    std::uint64_t flows_skipped_short = 0;
    std::uint64_t flows_no_signal = 0;
    std::uint64_t correlations = 0;
    std::uint64_t multiply_adds = 0; // nominal l * (M - l + 1) per correlation
    std::uint64_t thresholds = 0;
    std::uint64_t reconstructions = 0;

    bool operator==(const QueryStats&) const = default;
};

struct EngineOptions {
    /// Used for K outside the table range. Calibrated on synthetic data when unset.
    std::optional<NoiseModel> noise;
    ErrorTargets targets;
    CorrelationMethod method = CorrelationMethod::automatic;
    bool cache_reconstructions = true;
};

/// Runs queries against a fixed set of archives. All parameters come from the
/// archive headers.
class QueryEngine {
public:
    explicit QueryEngine(std::vector<DigestArchive> archives, EngineOptions options = {});

    std::vector<MatchResult> attribute(const Query& query);
    std::vector<MatchResult> find_similar(const Query& query, double mismatch_budget = 0.05);

    /// K used for an excerpt of `l_bytes` nominal bytes.
    double threshold_coefficient(std::size_t l_bytes);

    const DigestParams& params() const noexcept { return params_; }
    const std::vector<DigestArchive>& archives() const noexcept { return archives_; }
    const NoiseModel& noise_model();

    const QueryStats& stats() const noexcept { return stats_; }
    void reset_stats() noexcept { stats_ = {}; }

private:
    std::vector<MatchResult> run(const Query& query, double k);
    const ReconstructedSignal& signal(std::size_t archive, std::size_t flow, ReconstructedSignal& scratch);

    std::vector<DigestArchive> archives_;
    EngineOptions options_;
    DigestParams params_;
    std::map<std::pair<std::size_t, std::size_t>, ReconstructedSignal> cache_;
    QueryStats stats_;
};

std::vector<MatchResult> attribute_excerpt(const Query& query, const std::vector<DigestArchive>& archives,
                                           EngineOptions options = {});
std::vector<MatchResult> find_similar(const Query& query, const std::vector<DigestArchive>& archives,
                                      double mismatch_budget = 0.05, EngineOptions options = {});

/// Synthetic calibration for `params`, computed once per parameter set and cached.
const NoiseModel& default_noise_model(const DigestParams& params);

} // namespace dspas
