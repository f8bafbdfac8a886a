#include "dspas/flow.hpp"

#include <arpa/inet.h>

#include <cstring>

#include "dspas/error.hpp"

namespace dspas {

IpAddress IpAddress::v4(std::uint32_t host_order) {
    IpAddress a;
    a.bytes[10] = 0xff;
    a.bytes[11] = 0xff;
    a.bytes[12] = static_cast<std::uint8_t>(host_order >> 24);
    a.bytes[13] = static_cast<std::uint8_t>(host_order >> 16);
    a.bytes[14] = static_cast<std::uint8_t>(host_order >> 8);
    a.bytes[15] = static_cast<std::uint8_t>(host_order);
    return a;
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& raw) {
    IpAddress a;
    a.bytes = raw;
    a.is_v6 = true;
    return a;
}

IpAddress IpAddress::parse(const std::string& text) {
    in_addr v4addr{};
    if (inet_pton(AF_INET, text.c_str(), &v4addr) == 1) {
        return v4(ntohl(v4addr.s_addr));
    }
    std::array<std::uint8_t, 16> raw{};
    if (inet_pton(AF_INET6, text.c_str(), raw.data()) == 1) {
        return v6(raw);
    }
    throw InputError("not an IP address: '" + text + "'");
}

std::uint32_t IpAddress::v4_host_order() const noexcept {
    return (std::uint32_t{bytes[12]} << 24) | (std::uint32_t{bytes[13]} << 16) | (std::uint32_t{bytes[14]} << 8) |
           std::uint32_t{bytes[15]};
}

std::string IpAddress::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    if (is_v6) {
        inet_ntop(AF_INET6, bytes.data(), buf, sizeof(buf));
    } else {
        inet_ntop(AF_INET, bytes.data() + 12, buf, sizeof(buf));
    }
    return buf;
}

const char* to_string(Protocol p) noexcept {
    return p == Protocol::tcp ? "TCP" : "UDP";
}

std::uint64_t FlowKey::hash() const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (auto b : src_addr.bytes) {
        h = combine64(h, b);
    }
    for (auto b : dst_addr.bytes) {
        h = combine64(h, b);
    }
    h = combine64(h, (std::uint64_t{src_port} << 32) | (std::uint64_t{dst_port} << 8) |
                         static_cast<std::uint64_t>(protocol));
    h = combine64(h, (src_addr.is_v6 ? 2u : 0u) | (dst_addr.is_v6 ? 1u : 0u));
    return h;
}

std::string FlowKey::to_string() const {
    auto endpoint = [](const IpAddress& a, std::uint16_t port) {
        return a.is_v6 ? "[" + a.to_string() + "]:" + std::to_string(port) : a.to_string() + ":" + std::to_string(port);
    };
    return std::string(dspas::to_string(protocol)) + " " + endpoint(src_addr, src_port) + " -> " +
           endpoint(dst_addr, dst_port);
}

FlowKey FlowKey::reversed() const {
    return FlowKey{dst_addr, src_addr, dst_port, src_port, protocol};
}

CapturePeriod CapturePeriod::for_id(std::uint64_t period_id, std::uint64_t period_seconds) {
    return CapturePeriod{period_id, period_id * period_seconds, (period_id + 1) * period_seconds, 0};
}

} // namespace dspas
