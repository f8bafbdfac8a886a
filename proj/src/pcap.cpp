#include "dspas/pcap.hpp"

#include <algorithm>

#include "dspas/error.hpp"

namespace dspas {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kMaxRecordBytes = 1u << 20;

std::uint32_t bswap32(std::uint32_t v) noexcept {
    return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

std::uint16_t be16(const std::uint8_t* p) noexcept {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t be32(const std::uint8_t* p) noexcept {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_be16(Bytes& b, std::size_t at, std::uint16_t v) {
    b[at] = static_cast<std::uint8_t>(v >> 8);
    b[at + 1] = static_cast<std::uint8_t>(v);
}

void put_be32(Bytes& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        b[at + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
    }
}

void put_le32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
    }
}

// Payload bytes of a TCP/UDP segment starting at `l4`, bounded by `end`.
std::optional<PacketRecord> decode_transport(const std::uint8_t* l4, const std::uint8_t* end, std::uint8_t proto,
                                             IpAddress src, IpAddress dst, TimestampNs ts, IngestStats& stats) {
    PacketRecord rec;
    rec.timestamp = ts;
    rec.key.src_addr = src;
    rec.key.dst_addr = dst;
    const std::size_t avail = static_cast<std::size_t>(end - l4);
    const std::uint8_t* payload = nullptr;
    std::size_t payload_len = 0;
    if (proto == 6) {
        if (avail < 20) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        const std::size_t data_offset = static_cast<std::size_t>(l4[12] >> 4) * 4;
        if (data_offset < 20 || data_offset > avail) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        rec.key.protocol = Protocol::tcp;
        rec.key.src_port = be16(l4);
        rec.key.dst_port = be16(l4 + 2);
        rec.tcp.seq = be32(l4 + 4);
        rec.tcp.syn = (l4[13] & 0x02) != 0;
        payload = l4 + data_offset;
        payload_len = avail - data_offset;
    } else if (proto == 17) {
        if (avail < 8) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        const std::size_t udp_len = be16(l4 + 4);
        if (udp_len < 8 || udp_len > avail) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        rec.key.protocol = Protocol::udp;
        rec.key.src_port = be16(l4);
        rec.key.dst_port = be16(l4 + 2);
        payload = l4 + 8;
        payload_len = udp_len - 8;
    } else {
        ++stats.non_transport_dropped;
        return std::nullopt;
    }
    if (payload_len == 0) {
        ++stats.empty_payload;
        return std::nullopt;
    }
    rec.payload.assign(payload, payload + payload_len);
    return rec;
}

std::optional<PacketRecord> decode_ipv4(const std::uint8_t* ip, const std::uint8_t* end, TimestampNs ts,
                                        IngestStats& stats) {
    const std::size_t avail = static_cast<std::size_t>(end - ip);
    if (avail < 20) {
        ++stats.truncated_skipped;
        return std::nullopt;
    }
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    const std::size_t total = be16(ip + 2);
    if (ihl < 20 || total < ihl) {
        ++stats.truncated_skipped;
        return std::nullopt;
    }
    if (total > avail) {
        // Snap length cut the packet short.
        ++stats.truncated_skipped;
        return std::nullopt;
    }
    const std::uint16_t frag = be16(ip + 6);
    if ((frag & 0x1fff) != 0) {
        ++stats.non_first_fragments;
        return std::nullopt;
    }
    const std::uint8_t proto = ip[9];
    if (proto != 6 && proto != 17) {
        ++stats.non_transport_dropped;
        return std::nullopt;
    }
    return decode_transport(ip + ihl, ip + total, proto, IpAddress::v4(be32(ip + 12)), IpAddress::v4(be32(ip + 16)),
                            ts, stats);
}

std::optional<PacketRecord> decode_ipv6(const std::uint8_t* ip, const std::uint8_t* end, TimestampNs ts,
                                        IngestStats& stats) {
    const std::size_t avail = static_cast<std::size_t>(end - ip);
    if (avail < 40) {
        ++stats.truncated_skipped;
        return std::nullopt;
    }
    const std::size_t payload_len = be16(ip + 4);
    if (40 + payload_len > avail) {
        ++stats.truncated_skipped;
        return std::nullopt;
    }
    std::array<std::uint8_t, 16> src{};
    std::array<std::uint8_t, 16> dst{};
    std::copy(ip + 8, ip + 24, src.begin());
    std::copy(ip + 24, ip + 40, dst.begin());
    const std::uint8_t* p = ip + 40;
    const std::uint8_t* stop = ip + 40 + payload_len;
    std::uint8_t next = ip[6];
    // Walk extension headers until we reach a transport header.
    for (int hops = 0; hops < 16; ++hops) {
        if (next == 6 || next == 17) {
            return decode_transport(p, stop, next, IpAddress::v6(src), IpAddress::v6(dst), ts, stats);
        }
        std::size_t len = 0;
        switch (next) {
        case 0:
        case 43:
        case 60:
            if (stop - p < 8) {
                ++stats.truncated_skipped;
                return std::nullopt;
            }
            len = (static_cast<std::size_t>(p[1]) + 1) * 8;
            break;
        case 44:
            if (stop - p < 8) {
                ++stats.truncated_skipped;
                return std::nullopt;
            }
            if ((be16(p + 2) & 0xfff8) != 0) {
                ++stats.non_first_fragments;
                return std::nullopt;
            }
            len = 8;
            break;
        case 51:
            if (stop - p < 8) {
                ++stats.truncated_skipped;
                return std::nullopt;
            }
            len = (static_cast<std::size_t>(p[1]) + 2) * 4;
            break;
        default:
            ++stats.non_transport_dropped;
            return std::nullopt;
        }
        if (static_cast<std::size_t>(stop - p) < len) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        next = p[0];
        p += len;
    }
    ++stats.non_transport_dropped;
    return std::nullopt;
}

std::optional<PacketRecord> decode_network(std::uint16_t ethertype, const std::uint8_t* p, const std::uint8_t* end,
                                           TimestampNs ts, IngestStats& stats) {
    if (ethertype == 0x0800) {
        return decode_ipv4(p, end, ts, stats);
    }
    if (ethertype == 0x86dd) {
        return decode_ipv6(p, end, ts, stats);
    }
    ++stats.non_transport_dropped;
    return std::nullopt;
}

} // namespace

PcapReader::PcapReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) {
        throw InputError("cannot open capture file '" + path + "'");
    }
    std::uint8_t header[24];
    if (!in_.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw InputError("capture file '" + path + "' is too short for a pcap header");
    }
    const std::uint32_t magic = header[0] | (header[1] << 8) | (header[2] << 16) | (std::uint32_t{header[3]} << 24);
    if (magic == kMagicMicro || magic == kMagicNano) {
        swapped_ = false;
        nanosecond_ = magic == kMagicNano;
    } else if (bswap32(magic) == kMagicMicro || bswap32(magic) == kMagicNano) {
        swapped_ = true;
        nanosecond_ = bswap32(magic) == kMagicNano;
    } else {
        throw InputError("capture file '" + path + "' has an unknown magic number");
    }
    link_type_ = static_cast<LinkType>(read_u32(header + 20) & 0x0fffffff);
    switch (link_type_) {
    case LinkType::null_loopback:
    case LinkType::ethernet:
    case LinkType::raw_ip:
    case LinkType::linux_sll:
        break;
    default:
        if (static_cast<std::uint32_t>(link_type_) == 12 || static_cast<std::uint32_t>(link_type_) == 14) {
            link_type_ = LinkType::raw_ip;
            break;
        }
        throw InputError("capture file '" + path + "' uses unsupported link type " +
                         std::to_string(static_cast<std::uint32_t>(link_type_)));
    }
}

std::uint32_t PcapReader::read_u32(const std::uint8_t* p) const noexcept {
    std::uint32_t v = p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24);
    return swapped_ ? bswap32(v) : v;
}

std::optional<RawPacket> PcapReader::next() {
    std::uint8_t rec[16];
    in_.read(reinterpret_cast<char*>(rec), sizeof(rec));
    if (in_.gcount() == 0) {
        return std::nullopt;
    }
    if (in_.gcount() < static_cast<std::streamsize>(sizeof(rec))) {
        ++truncated_records_;
        return std::nullopt;
    }
    const std::uint32_t sec = read_u32(rec);
    const std::uint32_t frac = read_u32(rec + 4);
    const std::uint32_t incl = read_u32(rec + 8);
    const std::uint32_t orig = read_u32(rec + 12);
    if (incl > kMaxRecordBytes) {
        throw InputError("capture file '" + path_ + "' has an implausible record length " + std::to_string(incl));
    }
    RawPacket pkt;
    pkt.timestamp = static_cast<TimestampNs>(sec) * 1'000'000'000 +
                    static_cast<TimestampNs>(frac) * (nanosecond_ ? 1 : 1000);
    pkt.original_length = orig;
    pkt.data.resize(incl);
    in_.read(reinterpret_cast<char*>(pkt.data.data()), incl);
    if (static_cast<std::uint32_t>(in_.gcount()) < incl) {
        ++truncated_records_;
        return std::nullopt;
    }
    return pkt;
}

PcapWriter::PcapWriter(const std::string& path, LinkType link_type, bool nanosecond)
    : out_(path, std::ios::binary | std::ios::trunc), nanosecond_(nanosecond) {
    if (!out_) {
        throw InputError("cannot create capture file '" + path + "'");
    }
    std::uint8_t header[24] = {};
    put_le32(header, nanosecond ? kMagicNano : kMagicMicro);
    header[4] = 2; // version 2.4
    header[6] = 4;
    put_le32(header + 16, 262144);
    put_le32(header + 20, static_cast<std::uint32_t>(link_type));
    out_.write(reinterpret_cast<const char*>(header), sizeof(header));
}

void PcapWriter::write(TimestampNs timestamp, ByteView frame, std::uint32_t original_length) {
    std::uint8_t rec[16];
    const auto sec = static_cast<std::uint32_t>(timestamp / 1'000'000'000);
    const auto ns = static_cast<std::uint32_t>(timestamp % 1'000'000'000);
    put_le32(rec, sec);
    put_le32(rec + 4, nanosecond_ ? ns : ns / 1000);
    put_le32(rec + 8, static_cast<std::uint32_t>(frame.size()));
    put_le32(rec + 12, original_length ? original_length : static_cast<std::uint32_t>(frame.size()));
    out_.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
}

std::optional<PacketRecord> decode_packet(const RawPacket& packet, LinkType link, IngestStats& stats) {
    const std::uint8_t* p = packet.data.data();
    const std::uint8_t* end = p + packet.data.size();
    const std::size_t len = packet.data.size();
    switch (link) {
    case LinkType::ethernet: {
        if (len < 14) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        std::size_t off = 12;
        std::uint16_t ethertype = be16(p + off);
        while (ethertype == 0x8100 || ethertype == 0x88a8) {
            off += 4;
            if (off + 2 > len) {
                ++stats.truncated_skipped;
                return std::nullopt;
            }
            ethertype = be16(p + off);
        }
        return decode_network(ethertype, p + off + 2, end, packet.timestamp, stats);
    }
    case LinkType::linux_sll:
        if (len < 16) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        return decode_network(be16(p + 14), p + 16, end, packet.timestamp, stats);
    case LinkType::null_loopback: {
        if (len < 4) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        // Address family is in the capturing host's byte order.
        std::uint32_t af = p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24);
        if (af > 0xffff) {
            af = bswap32(af);
        }
        const std::uint16_t ethertype = af == 2 ? 0x0800 : (af == 24 || af == 28 || af == 30) ? 0x86dd : 0;
        return decode_network(ethertype, p + 4, end, packet.timestamp, stats);
    }
    case LinkType::raw_ip:
        if (len < 1) {
            ++stats.truncated_skipped;
            return std::nullopt;
        }
        return decode_network((p[0] >> 4) == 6 ? 0x86dd : 0x0800, p, end, packet.timestamp, stats);
    }
    ++stats.non_transport_dropped;
    return std::nullopt;
}

void classify_packets(PcapReader& reader, const std::function<void(PacketRecord&&)>& sink, IngestStats& stats) {
    while (auto pkt = reader.next()) {
        ++stats.packets;
        if (auto rec = decode_packet(*pkt, reader.link_type(), stats)) {
            ++stats.emitted;
            stats.payload_bytes += rec->payload.size();
            sink(std::move(*rec));
        }
    }
    stats.truncated_skipped += reader.truncated_records();
}

Bytes build_ipv4_frame(const FlowKey& key, ByteView payload, std::uint32_t tcp_seq, bool syn) {
    const bool tcp = key.protocol == Protocol::tcp;
    const std::size_t l4 = tcp ? 20 : 8;
    const std::size_t ip_total = 20 + l4 + payload.size();
    Bytes f(14 + ip_total, 0);
    f[12] = 0x08; // IPv4 ethertype
    f[13] = 0x00;
    const std::size_t ip = 14;
    f[ip] = 0x45;
    put_be16(f, ip + 2, static_cast<std::uint16_t>(ip_total));
    f[ip + 8] = 64;
    f[ip + 9] = tcp ? 6 : 17;
    put_be32(f, ip + 12, key.src_addr.v4_host_order());
    put_be32(f, ip + 16, key.dst_addr.v4_host_order());
    const std::size_t t = ip + 20;
    put_be16(f, t, key.src_port);
    put_be16(f, t + 2, key.dst_port);
    if (tcp) {
        put_be32(f, t + 4, tcp_seq);
        f[t + 12] = 0x50;
        f[t + 13] = static_cast<std::uint8_t>(0x18 | (syn ? 0x02 : 0));
    } else {
        put_be16(f, t + 4, static_cast<std::uint16_t>(8 + payload.size()));
    }
    std::copy(payload.begin(), payload.end(), f.begin() + static_cast<std::ptrdiff_t>(t + l4));
    return f;
}

Bytes build_ipv6_frame(const FlowKey& key, ByteView payload, std::uint32_t tcp_seq) {
    const bool tcp = key.protocol == Protocol::tcp;
    const std::size_t l4 = tcp ? 20 : 8;
    Bytes f(14 + 40 + l4 + payload.size(), 0);
    f[12] = 0x86;
    f[13] = 0xdd;
    const std::size_t ip = 14;
    f[ip] = 0x60;
    put_be16(f, ip + 4, static_cast<std::uint16_t>(l4 + payload.size()));
    f[ip + 6] = tcp ? 6 : 17;
    f[ip + 7] = 64;
    std::copy(key.src_addr.bytes.begin(), key.src_addr.bytes.end(), f.begin() + ip + 8);
    std::copy(key.dst_addr.bytes.begin(), key.dst_addr.bytes.end(), f.begin() + ip + 24);
    const std::size_t t = ip + 40;
    put_be16(f, t, key.src_port);
    put_be16(f, t + 2, key.dst_port);
    if (tcp) {
        put_be32(f, t + 4, tcp_seq);
        f[t + 12] = 0x50;
        f[t + 13] = 0x18;
    } else {
        put_be16(f, t + 4, static_cast<std::uint16_t>(8 + payload.size()));
    }
    std::copy(payload.begin(), payload.end(), f.begin() + static_cast<std::ptrdiff_t>(t + l4));
    return f;
}

} // namespace dspas
