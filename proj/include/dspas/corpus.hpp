#pragma once

#include <cstdint>
#include <vector>

#include "dspas/archive.hpp"
#include "dspas/flow.hpp"
#include "dspas/preprocess.hpp"

namespace dspas {

struct PlantSpec {
    std::size_t length = 300;
    std::size_t wildcards = 0;
    /// Substitute one payload byte every `corruption_spacing` bytes of the planted region (0 = none).
    std::size_t corruption_spacing = 0;
    /// Insert one payload byte every `insertion_spacing` bytes of the planted region (0 = none).
    std::size_t insertion_spacing = 0;
};

struct SyntheticCorpusSpec {
    std::size_t flow_count = 500;
    std::size_t min_bytes = 10 * 1024;
    std::size_t max_bytes = 40 * 1024;
    std::uint64_t seed = 1;
    std::uint64_t period_id = 0;
    std::uint64_t period_seconds = 3600;
    std::vector<PlantSpec> plants;
};

struct PlantedExcerpt {
    PlantSpec spec;
    std::size_t flow_index = 0;
    std::size_t byte_offset = 0;
    Bytes excerpt;       // query form; wildcard bytes hold 0x00
    Bytes truth;         // bytes the flow carried before any corruption
    WildcardMask mask;
    std::size_t corrupted_bytes = 0;
};

struct SyntheticCorpus {
    std::vector<FlowPayload> flows;
    std::vector<PlantedExcerpt> planted;

    std::size_t total_bytes() const noexcept;
};

/// Pseudorandom bytes from stream `seed`.
Bytes random_bytes(std::size_t n, std::uint64_t seed);

/// High-entropy flows with distinct keys, then every plant in order. Each
/// planted excerpt occurs in exactly one flow (checked by exhaustive scan);
/// a location that fails the check is redrawn.
SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec);

/// Adds one more plant to an existing corpus.
PlantedExcerpt plant_excerpt(SyntheticCorpus& corpus, const PlantSpec& spec, std::uint64_t seed);

/// `count` distinct random positions in [0, length).
WildcardMask random_mask(std::size_t length, std::size_t count, std::uint64_t seed);

/// Occurrences of `needle` across all flows, overlapping matches included.
std::size_t count_occurrences(const std::vector<FlowPayload>& flows, ByteView needle);

/// Random excerpt that occurs nowhere in the corpus.
Bytes absent_excerpt(const SyntheticCorpus& corpus, std::size_t length, std::uint64_t seed);

/// Digests every flow into one archive for `period`.
DigestArchive digest_corpus(const SyntheticCorpus& corpus, const DigestParams& params, const CapturePeriod& period);

} // namespace dspas
