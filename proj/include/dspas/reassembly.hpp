#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dspas/flow.hpp"
#include "dspas/pcap.hpp"

namespace dspas {

struct IngestConfig {
    std::uint64_t period_seconds = 3600;
    std::uint64_t idle_timeout_seconds = 300;

    std::uint64_t period_of(TimestampNs ts) const noexcept;
};

/// One captured payload fragment of a flow, in capture order.
struct Fragment {
    Bytes payload;
    TimestampNs timestamp = 0;
    TcpMeta tcp;
};

/// Builds the flow payload from fragments that share a key and a period.
///
/// UDP fragments are concatenated in capture order. TCP fragments are placed
/// by sequence number (modular, relative to the first fragment); bytes already
/// covered by an earlier-captured fragment are dropped. Holes are skipped, not
/// filled, and counted in `gap_count`.
FlowPayload reassemble_flow(const FlowKey& key, std::uint64_t period_id, std::span<const Fragment> fragments);

using PeriodBuckets = std::map<std::uint64_t, std::vector<FlowPayload>>;

/// Groups packets into flow records and closes each record at its period
/// boundary or after the idle timeout. A packet arriving after a close opens a
/// new record with the same key.
class FlowAssembler {
public:
    explicit FlowAssembler(IngestConfig config);

    void add(PacketRecord&& packet);

    /// Closes every open record and returns the flows grouped by period, each
    /// period sorted by (key, first_seen).
    PeriodBuckets finish();

    std::size_t open_flows() const noexcept { return open_.size(); }

private:
    struct OpenFlow {
        std::uint64_t period_id = 0;
        TimestampNs last_seen = 0;
        std::vector<Fragment> fragments;
    };

    void close(const FlowKey& key, OpenFlow& flow);

    IngestConfig config_;
    std::map<FlowKey, OpenFlow> open_;
    PeriodBuckets done_;
};

/// Convenience wrapper: all packets through a FlowAssembler.
PeriodBuckets bucket_periods(std::vector<PacketRecord> packets, const IngestConfig& config);

/// Reads a capture file end to end.
PeriodBuckets ingest_capture(const std::string& path, const IngestConfig& config, IngestStats& stats);

} // namespace dspas
