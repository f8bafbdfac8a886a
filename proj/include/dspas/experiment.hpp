#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dspas/corpus.hpp"
#include "dspas/csv.hpp"
#include "dspas/digest.hpp"
#include "dspas/theory.hpp"

namespace dspas {

enum class ExperimentKind : std::uint8_t {
    q_sweep,
    fp_vs_excerpt,
    transform_size_sweep,
    wildcard_fp,
    wildcard_fn,
    timing,
    similar_string,
};

const char* to_string(ExperimentKind kind) noexcept;
/// Throws InputError for unknown names.
ExperimentKind parse_experiment_kind(const std::string& name);

/// Empty lists fall back to each experiment's default grid.
struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::fp_vs_excerpt;
    SyntheticCorpusSpec corpus;
    DigestParams params;
    std::size_t repetitions = 20; // planted queries per grid cell
    std::uint64_t seed = 1;

    std::vector<unsigned> quant_bits;          // q_sweep: {3, 4, 5}
    std::vector<std::size_t> excerpt_sizes;    // {300, 400, 500, 600}
    std::vector<std::size_t> transform_sizes;  // {256, 512, 1024, 2048, 4096}
    std::vector<std::size_t> wildcard_counts;  // wildcard: {0, 5, ..., 30}; timing: {0, 2, 4, 6, 8}
    std::vector<std::size_t> spacings;         // similar_string: {0, 400, 200, 100, 50}
    std::size_t calibration_words = std::size_t{1} << 20;
    double mismatch_budget = 0.05;
    std::optional<NoiseModel> noise;           // skips synthetic calibration when set

    void validate() const;
};

struct ExperimentResult {
    CsvTable table;
    CsvTable trace; // q_sweep only: one correlation trace per q
};

/// Column schema of each experiment, fixed per kind.
std::vector<std::string> experiment_columns(ExperimentKind kind);

ExperimentResult run_experiment(const ExperimentSpec& spec);

} // namespace dspas
