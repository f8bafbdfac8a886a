#include "dspas/archive.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "dspas/byte_io.hpp"
#include "dspas/error.hpp"

namespace dspas {

namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'S', 'P', 'A'};

using Kind = IntegrityError::Kind;

auto record_order(const FlowRecord& r) { return std::tie(r.key, r.first_seen); }

void write_key(ByteWriter& w, const FlowKey& key) {
    w.bytes(key.src_addr.bytes);
    w.bytes(key.dst_addr.bytes);
    w.u16(key.src_port);
    w.u16(key.dst_port);
    w.u8(static_cast<std::uint8_t>(key.protocol));
    w.u8(static_cast<std::uint8_t>((key.src_addr.is_v6 ? 2 : 0) | (key.dst_addr.is_v6 ? 1 : 0)));
}

FlowKey read_key(ByteReader& r, const std::string& source) {
    FlowKey key;
    auto src = r.bytes(16);
    auto dst = r.bytes(16);
    std::copy(src.begin(), src.end(), key.src_addr.bytes.begin());
    std::copy(dst.begin(), dst.end(), key.dst_addr.bytes.begin());
    key.src_port = r.u16();
    key.dst_port = r.u16();
    const std::uint8_t proto = r.u8();
    if (proto != static_cast<std::uint8_t>(Protocol::tcp) && proto != static_cast<std::uint8_t>(Protocol::udp)) {
        throw IntegrityError(Kind::bad_layout, source + ": flow record has protocol " + std::to_string(proto));
    }
    key.protocol = static_cast<Protocol>(proto);
    const std::uint8_t family = r.u8();
    if (family > 3) {
        throw IntegrityError(Kind::bad_layout, source + ": flow record has family flags " + std::to_string(family));
    }
    key.src_addr.is_v6 = (family & 2) != 0;
    key.dst_addr.is_v6 = (family & 1) != 0;
    return key;
}

} // namespace

CapturePeriod DigestArchive::period() const {
    return {header.period_id, header.period_start, header.period_end, header.flow_count};
}

ByteView DigestArchive::blob(const FlowRecord& record) const {
    return ByteView(blobs).subspan(record.digest_offset, record.digest_length);
}

FlowDigest DigestArchive::digest(const FlowRecord& record) const {
    const auto b = blob(record);
    return parse_flow_digest(record.key, record.first_seen, record.original_word_count, Bytes(b.begin(), b.end()));
}

DigestArchive build_archive(const CapturePeriod& period, std::vector<FlowDigest> digests, const DigestParams& params) {
    params.validate();
    std::sort(digests.begin(), digests.end(), [](const FlowDigest& a, const FlowDigest& b) {
        return std::tie(a.key, a.first_seen) < std::tie(b.key, b.first_seen);
    });
    DigestArchive a;
    a.header.params = params;
    a.header.period_id = period.period_id;
    a.header.period_start = period.start_time;
    a.header.period_end = period.end_time;
    a.header.flow_count = static_cast<std::uint32_t>(digests.size());
    for (std::size_t i = 0; i < digests.size(); ++i) {
        const auto& d = digests[i];
        if (i > 0 && d.key == digests[i - 1].key && d.first_seen == digests[i - 1].first_seen) {
            throw ContractViolation("duplicate flow " + d.key.to_string() + " in period " +
                                    std::to_string(period.period_id));
        }
        FlowRecord rec;
        rec.key = d.key;
        rec.first_seen = d.first_seen;
        rec.original_word_count = d.original_word_count;
        rec.digest_offset = a.blobs.size();
        rec.digest_length = d.coded.size();
        a.blobs.insert(a.blobs.end(), d.coded.begin(), d.coded.end());
        a.flows.push_back(rec);
    }
    return a;
}

Bytes serialize(const DigestArchive& a) {
    const auto& p = a.header.params;
    Bytes out;
    ByteWriter w(out);
    w.bytes(kMagic);
    w.u16(a.header.format_version);
    w.u8(static_cast<std::uint8_t>(p.preprocess.word_size));
    w.u32(static_cast<std::uint32_t>(p.transform_size));
    w.u8(static_cast<std::uint8_t>(p.quant_bits));
    w.u64(p.preprocess.hash_seed);
    w.u32(static_cast<std::uint32_t>(p.preprocess.run_threshold));
    w.u8(static_cast<std::uint8_t>(p.codec));
    w.u64(a.header.period_id);
    w.u64(a.header.period_start);
    w.u64(a.header.period_end);
    w.u32(static_cast<std::uint32_t>(a.flows.size()));
    w.zeros(kHeaderSize - out.size());
    for (const auto& rec : a.flows) {
        write_key(w, rec.key);
        w.u64(rec.digest_offset);
        w.u64(rec.digest_length);
        w.u64(rec.original_word_count);
        w.u64(static_cast<std::uint64_t>(rec.first_seen));
    }
    w.bytes(a.blobs);
    w.u64(checksum64(out));
    return out;
}

DigestArchive parse_archive(ByteView data, const std::string& source) {
    if (data.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), data.begin())) {
        throw IntegrityError(Kind::bad_magic, source + ": not a digest archive (bad magic)");
    }
    if (data.size() < kHeaderSize + kTrailerSize) {
        throw IntegrityError(Kind::truncated, source + ": file is shorter than header and trailer");
    }
    ByteReader r(data, source);
    r.skip(4);
    DigestArchive a;
    a.header.format_version = r.u16();
    if (a.header.format_version != kArchiveVersion) {
        throw IntegrityError(Kind::unsupported_version,
                             source + ": unsupported format version " + std::to_string(a.header.format_version));
    }
    const ByteView body = data.first(data.size() - kTrailerSize);
    ByteReader trailer(data.last(kTrailerSize), source);
    if (trailer.u64() != checksum64(body)) {
        throw IntegrityError(Kind::checksum_mismatch, source + ": checksum mismatch");
    }

    auto& p = a.header.params;
    p.preprocess.word_size = r.u8();
    p.transform_size = r.u32();
    p.quant_bits = r.u8();
    p.preprocess.hash_seed = r.u64();
    p.preprocess.run_threshold = r.u32();
    const std::uint8_t codec = r.u8();
    a.header.period_id = r.u64();
    a.header.period_start = r.u64();
    a.header.period_end = r.u64();
    a.header.flow_count = r.u32();
    const ByteView pad = r.bytes(kHeaderSize - r.position());
    if (std::any_of(pad.begin(), pad.end(), [](std::uint8_t b) { return b != 0; })) {
        throw IntegrityError(Kind::bad_layout, source + ": reserved header bytes are not zero");
    }
    if (!is_known_codec(codec)) {
        throw IntegrityError(Kind::bad_layout, source + ": unknown codec id " + std::to_string(codec));
    }
    p.codec = static_cast<CodecId>(codec);
    try {
        p.validate();
    } catch (const ContractViolation& e) {
        throw IntegrityError(Kind::bad_layout, source + ": " + e.what());
    }

    const std::size_t table_bytes = static_cast<std::size_t>(a.header.flow_count) * kFlowRecordSize;
    if (table_bytes > body.size() - kHeaderSize) {
        throw IntegrityError(Kind::bad_layout, source + ": flow table runs past the end of the file");
    }
    ByteReader table(body.subspan(kHeaderSize, table_bytes), source);
    std::uint64_t expected_offset = 0;
    a.flows.reserve(a.header.flow_count);
    for (std::uint32_t i = 0; i < a.header.flow_count; ++i) {
        FlowRecord rec;
        rec.key = read_key(table, source);
        rec.digest_offset = table.u64();
        rec.digest_length = table.u64();
        rec.original_word_count = table.u64();
        rec.first_seen = static_cast<TimestampNs>(table.u64());
        if (rec.digest_offset != expected_offset) {
            throw IntegrityError(Kind::bad_layout, source + ": flow record " + std::to_string(i) +
                                                       " is not contiguous with its predecessor");
        }
        if (!a.flows.empty() && !(record_order(a.flows.back()) < record_order(rec))) {
            throw IntegrityError(Kind::bad_layout, source + ": flow table is not strictly sorted");
        }
        expected_offset += rec.digest_length;
        a.flows.push_back(rec);
    }
    const ByteView blobs = body.subspan(kHeaderSize + table_bytes);
    if (expected_offset != blobs.size()) {
        throw IntegrityError(Kind::bad_layout, source + ": blob region holds " + std::to_string(blobs.size()) +
                                                   " bytes, flow table covers " + std::to_string(expected_offset));
    }
    a.blobs.assign(blobs.begin(), blobs.end());
    return a;
}

void write_archive(const std::string& path, const DigestArchive& archive) {
    const Bytes bytes = serialize(archive);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open " + path + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw InputError("write to " + path + " failed");
    }
}

void write_archive(const std::string& path, const CapturePeriod& period, std::vector<FlowDigest> digests,
                   const DigestParams& params) {
    write_archive(path, build_archive(period, std::move(digests), params));
}

DigestArchive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open archive " + path);
    }
    const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_archive(data, path);
}

std::vector<FlowRecord> list_flows(const DigestArchive& archive, const FlowFilter& filter) {
    std::vector<FlowRecord> out;
    for (const auto& rec : archive.flows) {
        if (!filter || filter(rec)) {
            out.push_back(rec);
        }
    }
    return out;
}

void require_params(const DigestArchive& archive, const DigestParams& expected) {
    const auto& got = archive.header.params;
    std::string diff;
    auto check = [&diff](const char* name, auto have, auto want) {
        if (have != want) {
            diff += std::string(diff.empty() ? "" : ", ") + name + " is " + std::to_string(have) + " (expected " +
                    std::to_string(want) + ")";
        }
    };
    check("W", got.preprocess.word_size, expected.preprocess.word_size);
    check("L", got.transform_size, expected.transform_size);
    check("q", got.quant_bits, expected.quant_bits);
    check("hash_seed", got.preprocess.hash_seed, expected.preprocess.hash_seed);
    check("R", got.preprocess.run_threshold, expected.preprocess.run_threshold);
    if (!diff.empty()) {
        throw ParameterMismatchError("archive for period " + std::to_string(archive.header.period_id) +
                                     " has mismatched parameters: " + diff);
    }
}

void require_consistent(const std::vector<DigestArchive>& archives) {
    for (std::size_t i = 1; i < archives.size(); ++i) {
        require_params(archives[i], archives[0].header.params);
    }
}

} // namespace dspas
