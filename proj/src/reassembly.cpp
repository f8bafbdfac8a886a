#include "dspas/reassembly.hpp"

#include <algorithm>

#include "dspas/error.hpp"

namespace dspas {

std::uint64_t IngestConfig::period_of(TimestampNs ts) const noexcept {
    const auto ns_per_period = static_cast<TimestampNs>(period_seconds) * 1'000'000'000;
    return ts <= 0 ? 0 : static_cast<std::uint64_t>(ts / ns_per_period);
}

FlowPayload reassemble_flow(const FlowKey& key, std::uint64_t period_id, std::span<const Fragment> fragments) {
    FlowPayload flow;
    flow.key = key;
    flow.period_id = period_id;
    if (fragments.empty()) {
        return flow;
    }
    flow.first_seen = fragments.front().timestamp;
    flow.last_seen = fragments.front().timestamp;
    for (const auto& f : fragments) {
        flow.first_seen = std::min(flow.first_seen, f.timestamp);
        flow.last_seen = std::max(flow.last_seen, f.timestamp);
    }

    if (key.protocol == Protocol::udp) {
        for (const auto& f : fragments) {
            flow.bytes.insert(flow.bytes.end(), f.payload.begin(), f.payload.end());
        }
        return flow;
    }

    // Disjoint covered ranges keyed by start offset relative to the first
    // fragment's sequence number. Earlier captures win overlaps.
    std::map<std::int64_t, Bytes> covered;
    const std::uint32_t base = fragments.front().tcp.seq + (fragments.front().tcp.syn ? 1u : 0u);
    for (const auto& f : fragments) {
        const std::uint32_t seq = f.tcp.seq + (f.tcp.syn ? 1u : 0u);
        std::int64_t start = static_cast<std::int32_t>(seq - base);
        std::int64_t end = start + static_cast<std::int64_t>(f.payload.size());
        std::int64_t cursor = start;
        // Walk existing ranges that could overlap [start, end).
        auto it = covered.upper_bound(start);
        if (it != covered.begin()) {
            --it;
        }
        std::vector<std::pair<std::int64_t, std::int64_t>> holes;
        for (; it != covered.end() && it->first < end; ++it) {
            const std::int64_t r0 = it->first;
            const std::int64_t r1 = r0 + static_cast<std::int64_t>(it->second.size());
            if (r1 <= cursor) {
                continue;
            }
            if (r0 > cursor) {
                holes.emplace_back(cursor, std::min(r0, end));
            }
            cursor = std::max(cursor, r1);
            if (cursor >= end) {
                break;
            }
        }
        if (cursor < end) {
            holes.emplace_back(cursor, end);
        }
        for (auto [h0, h1] : holes) {
            const auto* src = f.payload.data() + (h0 - start);
            covered.emplace(h0, Bytes(src, src + (h1 - h0)));
        }
    }

    if (covered.empty()) {
        return flow;
    }
    std::int64_t expected = covered.begin()->first;
    for (const auto& [start, bytes] : covered) {
        if (start != expected) {
            ++flow.gap_count;
        }
        flow.bytes.insert(flow.bytes.end(), bytes.begin(), bytes.end());
        expected = start + static_cast<std::int64_t>(bytes.size());
    }
    return flow;
}

FlowAssembler::FlowAssembler(IngestConfig config) : config_(config) {
    if (config_.period_seconds == 0) {
        throw ContractViolation("period duration must be positive");
    }
}

void FlowAssembler::add(PacketRecord&& packet) {
    const std::uint64_t period = config_.period_of(packet.timestamp);
    auto it = open_.find(packet.key);
    if (it != open_.end()) {
        const TimestampNs idle = static_cast<TimestampNs>(config_.idle_timeout_seconds) * 1'000'000'000;
        const bool timed_out = config_.idle_timeout_seconds > 0 && packet.timestamp - it->second.last_seen > idle;
        if (it->second.period_id != period || timed_out) {
            close(it->first, it->second);
            open_.erase(it);
            it = open_.end();
        }
    }
    if (it == open_.end()) {
        it = open_.emplace(packet.key, OpenFlow{period, packet.timestamp, {}}).first;
    }
    it->second.last_seen = std::max(it->second.last_seen, packet.timestamp);
    it->second.fragments.push_back(Fragment{std::move(packet.payload), packet.timestamp, packet.tcp});
}

void FlowAssembler::close(const FlowKey& key, OpenFlow& flow) {
    done_[flow.period_id].push_back(reassemble_flow(key, flow.period_id, flow.fragments));
}

PeriodBuckets FlowAssembler::finish() {
    for (auto& [key, flow] : open_) {
        close(key, flow);
    }
    open_.clear();
    for (auto& [period, flows] : done_) {
        std::sort(flows.begin(), flows.end(), [](const FlowPayload& a, const FlowPayload& b) {
            return std::tie(a.key, a.first_seen) < std::tie(b.key, b.first_seen);
        });
    }
    return std::move(done_);
}

PeriodBuckets bucket_periods(std::vector<PacketRecord> packets, const IngestConfig& config) {
    FlowAssembler assembler(config);
    for (auto& p : packets) {
        assembler.add(std::move(p));
    }
    return assembler.finish();
}

PeriodBuckets ingest_capture(const std::string& path, const IngestConfig& config, IngestStats& stats) {
    PcapReader reader(path);
    FlowAssembler assembler(config);
    classify_packets(reader, [&](PacketRecord&& rec) { assembler.add(std::move(rec)); }, stats);
    return assembler.finish();
}

} // namespace dspas
