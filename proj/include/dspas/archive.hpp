#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dspas/digest.hpp"
#include "dspas/flow.hpp"

namespace dspas {

inline constexpr std::uint16_t kArchiveVersion = 1;
inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::size_t kFlowRecordSize = 70;
inline constexpr std::size_t kTrailerSize = 8;

struct ArchiveHeader {
    std::uint16_t format_version = kArchiveVersion;
    DigestParams params;
    std::uint64_t period_id = 0;
    std::uint64_t period_start = 0; // epoch seconds
    std::uint64_t period_end = 0;   // epoch seconds, exclusive
    std::uint32_t flow_count = 0;
};

struct FlowRecord {
    FlowKey key;
    std::uint64_t digest_offset = 0; // into the blob region
    std::uint64_t digest_length = 0;
    std::uint64_t original_word_count = 0;
    TimestampNs first_seen = 0;

    bool operator==(const FlowRecord&) const = default;
};

/// One sealed capture period: header, flow table sorted by (key, first_seen), blobs.
struct DigestArchive {
    ArchiveHeader header;
    std::vector<FlowRecord> flows;
    Bytes blobs;

    CapturePeriod period() const;
    ByteView blob(const FlowRecord& record) const;
    FlowDigest digest(const FlowRecord& record) const;
    FlowDigest digest(std::size_t index) const { return digest(flows.at(index)); }
};

/// Builds an archive in memory. Digests are sorted by (key, first_seen); a
/// repeated (key, first_seen) pair is a ContractViolation.
DigestArchive build_archive(const CapturePeriod& period, std::vector<FlowDigest> digests, const DigestParams& params);

/// Canonical byte form: header, flow table, blobs, checksum trailer.
Bytes serialize(const DigestArchive& archive);

/// Validates magic, version and checksum before interpreting anything else.
/// Every failure is an IntegrityError with a distinct kind.
DigestArchive parse_archive(ByteView data, const std::string& source = "archive");

void write_archive(const std::string& path, const CapturePeriod& period, std::vector<FlowDigest> digests,
                   const DigestParams& params);
void write_archive(const std::string& path, const DigestArchive& archive);
DigestArchive read_archive(const std::string& path);

using FlowFilter = std::function<bool(const FlowRecord&)>;

/// Records accepted by `filter` (all if empty), in table order.
std::vector<FlowRecord> list_flows(const DigestArchive& archive, const FlowFilter& filter = {});

/// Throws ParameterMismatchError naming every field that differs.
void require_params(const DigestArchive& archive, const DigestParams& expected);

/// Throws ParameterMismatchError unless every archive shares the first one's parameters.
void require_consistent(const std::vector<DigestArchive>& archives);

} // namespace dspas
