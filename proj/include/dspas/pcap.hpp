#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include "dspas/flow.hpp"

namespace dspas {

// Link types we know how to strip down to the network header.
enum class LinkType : std::uint32_t {
    null_loopback = 0,
    ethernet = 1,
    raw_ip = 101,
    linux_sll = 113,
};

struct RawPacket {
    TimestampNs timestamp = 0;
    std::uint32_t original_length = 0;
    Bytes data; // captured bytes (may be shorter than original_length)
};

/// Sequential reader for classic libpcap files (microsecond and nanosecond
/// variants, either byte order).
class PcapReader {
public:
    explicit PcapReader(const std::string& path);

    std::optional<RawPacket> next();

    LinkType link_type() const noexcept { return link_type_; }
    bool nanosecond() const noexcept { return nanosecond_; }
    /// Records cut short at end of file.
    std::uint64_t truncated_records() const noexcept { return truncated_records_; }

private:
    std::uint32_t read_u32(const std::uint8_t* p) const noexcept;

    std::string path_;
    std::ifstream in_;
    bool swapped_ = false;
    bool nanosecond_ = false;
    LinkType link_type_ = LinkType::ethernet;
    std::uint64_t truncated_records_ = 0;
};

/// Writes classic libpcap files. Used for fixtures and synthetic captures.
class PcapWriter {
public:
    PcapWriter(const std::string& path, LinkType link_type = LinkType::ethernet, bool nanosecond = false);

    void write(TimestampNs timestamp, ByteView frame, std::uint32_t original_length = 0);

private:
    std::ofstream out_;
    bool nanosecond_;
};

struct TcpMeta {
    std::uint32_t seq = 0;
    bool syn = false;
};

/// One transport payload, attributed to its unidirectional flow.
struct PacketRecord {
    FlowKey key;
    Bytes payload;
    TimestampNs timestamp = 0;
    TcpMeta tcp;
};

struct IngestStats {
    std::uint64_t packets = 0;
    std::uint64_t emitted = 0;
    std::uint64_t non_transport_dropped = 0;
    std::uint64_t truncated_skipped = 0;
    std::uint64_t empty_payload = 0;
    std::uint64_t non_first_fragments = 0;
    std::uint64_t payload_bytes = 0;
};

/// Decodes one captured frame. Returns nothing (and bumps a counter) for
/// packets that carry no TCP/UDP payload or are cut short.
std::optional<PacketRecord> decode_packet(const RawPacket& packet, LinkType link, IngestStats& stats);

/// Streams every TCP/UDP packet with non-empty payload to `sink`, in capture order.
void classify_packets(PcapReader& reader, const std::function<void(PacketRecord&&)>& sink, IngestStats& stats);

// Frame builders for fixtures and synthetic captures.
Bytes build_ipv4_frame(const FlowKey& key, ByteView payload, std::uint32_t tcp_seq = 0, bool syn = false);
Bytes build_ipv6_frame(const FlowKey& key, ByteView payload, std::uint32_t tcp_seq = 0);

} // namespace dspas
