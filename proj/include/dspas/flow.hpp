#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "dspas/hash.hpp"

namespace dspas {

/// IPv4 or IPv6 address. IPv4 is held in its IPv4-mapped IPv6 form.
struct IpAddress {
    std::array<std::uint8_t, 16> bytes{};
    bool is_v6 = false;

    static IpAddress v4(std::uint32_t host_order);
    static IpAddress v6(const std::array<std::uint8_t, 16>& raw);
    static IpAddress parse(const std::string& text);

    std::uint32_t v4_host_order() const noexcept;
    std::string to_string() const;

    auto operator<=>(const IpAddress&) const = default;
};

enum class Protocol : std::uint8_t { tcp = 6, udp = 17 };

const char* to_string(Protocol p) noexcept;

/// Unidirectional 5-tuple. The reverse direction is a different key.
struct FlowKey {
    IpAddress src_addr;
    IpAddress dst_addr;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    Protocol protocol = Protocol::tcp;

    std::uint64_t hash() const noexcept;
    std::string to_string() const;
    FlowKey reversed() const;

    auto operator<=>(const FlowKey&) const = default;
};

/// Nanoseconds since the Unix epoch.
using TimestampNs = std::int64_t;

/// Reassembled application payload of one flow inside one capture period.
struct FlowPayload {
    FlowKey key;
    std::uint64_t period_id = 0;
    Bytes bytes;
    TimestampNs first_seen = 0;
    TimestampNs last_seen = 0;
    std::uint32_t gap_count = 0;
};

struct CapturePeriod {
    std::uint64_t period_id = 0;
    std::uint64_t start_time = 0; // epoch seconds
    std::uint64_t end_time = 0;   // epoch seconds, exclusive
    std::uint32_t flow_count = 0;

    static CapturePeriod for_id(std::uint64_t period_id, std::uint64_t period_seconds);
};

} // namespace dspas
