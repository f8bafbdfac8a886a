#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "dspas/error.hpp"
#include "dspas/pcap.hpp"
#include "dspas/reassembly.hpp"
#include "support.hpp"

using namespace dspas;
using dspas::testing::TempDir;
using dspas::testing::text;

namespace {

FlowKey make_key(std::uint32_t src, std::uint32_t dst, std::uint16_t sp, std::uint16_t dp, Protocol p) {
    FlowKey k;
    k.src_addr = IpAddress::v4(src);
    k.dst_addr = IpAddress::v4(dst);
    k.src_port = sp;
    k.dst_port = dp;
    k.protocol = p;
    return k;
}

constexpr TimestampNs kSec = 1'000'000'000;

std::vector<PacketRecord> read_all(const std::string& path, IngestStats& stats) {
    PcapReader reader(path);
    std::vector<PacketRecord> out;
    classify_packets(reader, [&](PacketRecord&& r) { out.push_back(std::move(r)); }, stats);
    return out;
}

// Minimal big-endian packet encoder, written independently of the library's frame builders.
void be(std::vector<std::uint8_t>& b, std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) {
        b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}
void le(std::vector<std::uint8_t>& b, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
        b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

struct ScriptPacket {
    std::uint32_t src, dst;
    std::uint16_t sport, dport;
    int proto;
    std::string payload;
};

std::vector<std::uint8_t> hand_built_capture(const std::vector<ScriptPacket>& script) {
    std::vector<std::uint8_t> file;
    le(file, 0xa1b2c3d4, 4);
    le(file, 2, 2);
    le(file, 4, 2);
    le(file, 0, 4);
    le(file, 0, 4);
    le(file, 65535, 4);
    le(file, 1, 4);
    std::uint32_t t = 100;
    for (const auto& p : script) {
        std::vector<std::uint8_t> frame(12, 0);
        be(frame, 0x0800, 2);
        const int l4 = p.proto == 6 ? 20 : 8;
        be(frame, 0x45, 1);
        be(frame, 0, 1);
        be(frame, 20 + l4 + p.payload.size(), 2);
        be(frame, 0, 4);
        be(frame, 64, 1);
        be(frame, p.proto, 1);
        be(frame, 0, 2);
        be(frame, p.src, 4);
        be(frame, p.dst, 4);
        be(frame, p.sport, 2);
        be(frame, p.dport, 2);
        if (p.proto == 6) {
            be(frame, 1000, 4);
            be(frame, 0, 4);
            be(frame, 0x5018, 2);
            be(frame, 0xffff, 2);
            be(frame, 0, 4);
        } else {
            be(frame, 8 + p.payload.size(), 2);
            be(frame, 0, 2);
        }
        frame.insert(frame.end(), p.payload.begin(), p.payload.end());
        le(file, t++, 4);
        le(file, 0, 4);
        le(file, frame.size(), 4);
        le(file, frame.size(), 4);
        file.insert(file.end(), frame.begin(), frame.end());
    }
    return file;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                                static_cast<std::streamsize>(b.size()));
}

} // namespace

TEST(ClassifyPackets, ReverseDirectionIsADistinctFlow) {
    TempDir dir("classify");
    const auto ab = make_key(0x0a000001, 0x0a000002, 1234, 80, Protocol::tcp);
    {
        PcapWriter w(dir.file("c.pcap"));
        w.write(1 * kSec, build_ipv4_frame(ab, text("one"), 1));
        w.write(2 * kSec, build_ipv4_frame(ab, text("two"), 4));
        w.write(3 * kSec, build_ipv4_frame(ab.reversed(), text("back"), 9));
    }
    IngestStats stats;
    const auto recs = read_all(dir.file("c.pcap"), stats);
    std::map<FlowKey, int> sizes;
    for (const auto& r : recs) {
        ++sizes[r.key];
    }
    ASSERT_EQ(sizes.size(), 2u);
    EXPECT_EQ(sizes[ab], 2);
    EXPECT_EQ(sizes[ab.reversed()], 1);
}

TEST(ClassifyPackets, EmptyCaptureYieldsNothing) {
    TempDir dir("empty");
    { PcapWriter w(dir.file("e.pcap")); }
    IngestStats stats;
    EXPECT_TRUE(read_all(dir.file("e.pcap"), stats).empty());
    EXPECT_EQ(stats.packets, 0u);
    const auto buckets = ingest_capture(dir.file("e.pcap"), {}, stats);
    EXPECT_TRUE(buckets.empty());
}

TEST(ClassifyPackets, InterleavedTcpAndUdpMatchHandBuiltScript) {
    std::vector<ScriptPacket> script;
    for (int i = 0; i < 15; ++i) {
        if (i % 3 == 2) {
            script.push_back({0xc0a80001, 0xc0a80002, 5353, 53, 17, "udp" + std::to_string(i)});
        } else {
            script.push_back({0x0a000001, 0x0a000009, 40000, 443, 6, "tcp" + std::to_string(i)});
        }
    }
    // Oracle: counts straight from the script.
    std::map<std::tuple<std::uint32_t, std::uint32_t, int, int, int>, int> expected;
    for (const auto& p : script) {
        ++expected[{p.src, p.dst, p.sport, p.dport, p.proto}];
    }
    ASSERT_EQ(expected.size(), 2u);

    TempDir dir("script");
    write_bytes(dir.file("s.pcap"), hand_built_capture(script));
    IngestStats stats;
    const auto recs = read_all(dir.file("s.pcap"), stats);
    std::map<std::tuple<std::uint32_t, std::uint32_t, int, int, int>, int> got;
    for (const auto& r : recs) {
        ++got[{r.key.src_addr.v4_host_order(), r.key.dst_addr.v4_host_order(), r.key.src_port, r.key.dst_port,
               static_cast<int>(r.key.protocol)}];
    }
    EXPECT_EQ(got, expected);
    EXPECT_EQ(got.begin()->second + std::next(got.begin())->second, 15);
    EXPECT_EQ(stats.emitted, 15u);
}

TEST(ClassifyPackets, NonTransportIsCountedAndDropped) {
    TempDir dir("icmp");
    {
        PcapWriter w(dir.file("i.pcap"));
        auto frame = build_ipv4_frame(make_key(1, 2, 3, 4, Protocol::udp), text("x"));
        frame[14 + 9] = 1; // ICMP
        w.write(kSec, frame);
        w.write(kSec, build_ipv4_frame(make_key(1, 2, 3, 4, Protocol::udp), text("y")));
    }
    IngestStats stats;
    EXPECT_EQ(read_all(dir.file("i.pcap"), stats).size(), 1u);
    EXPECT_EQ(stats.non_transport_dropped, 1u);
}

TEST(ClassifyPackets, TruncatedPacketIsSkippedWithCounter) {
    TempDir dir("trunc");
    {
        PcapWriter w(dir.file("t.pcap"));
        const auto frame = build_ipv4_frame(make_key(1, 2, 3, 4, Protocol::tcp), text("hello world"), 5);
        w.write(kSec, ByteView(frame).first(40), static_cast<std::uint32_t>(frame.size()));
        w.write(kSec, frame);
    }
    IngestStats stats;
    EXPECT_EQ(read_all(dir.file("t.pcap"), stats).size(), 1u);
    EXPECT_EQ(stats.truncated_skipped, 1u);
}

TEST(ClassifyPackets, UnreadableCaptureIsFatal) {
    TempDir dir("bad");
    EXPECT_THROW(PcapReader(dir.file("missing.pcap")), InputError);
    write_bytes(dir.file("junk.pcap"), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21,
                                        22, 23, 24});
    EXPECT_THROW(PcapReader(dir.file("junk.pcap")), InputError);
}

TEST(ClassifyPackets, NanosecondAndSwappedHeadersAndIpv6) {
    TempDir dir("ns");
    auto key6 = make_key(0, 0, 1000, 2000, Protocol::udp);
    key6.src_addr = IpAddress::parse("2001:db8::1");
    key6.dst_addr = IpAddress::parse("2001:db8::2");
    {
        PcapWriter w(dir.file("n.pcap"), LinkType::ethernet, true);
        w.write(5 * kSec + 123, build_ipv6_frame(key6, text("six")));
    }
    IngestStats stats;
    const auto recs = read_all(dir.file("n.pcap"), stats);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].key, key6);
    EXPECT_EQ(recs[0].timestamp, 5 * kSec + 123);
    EXPECT_EQ(recs[0].payload, text("six"));

    // Big-endian microsecond header.
    auto file = hand_built_capture({{1, 2, 3, 4, 17, "abc"}});
    std::reverse(file.begin(), file.begin() + 4);
    for (std::size_t off : {4, 6}) {
        std::swap(file[off], file[off + 1]);
    }
    for (std::size_t off : {8, 12, 16, 20, 24, 28, 32, 36}) {
        std::reverse(file.begin() + static_cast<std::ptrdiff_t>(off),
                     file.begin() + static_cast<std::ptrdiff_t>(off + 4));
    }
    write_bytes(dir.file("be.pcap"), file);
    IngestStats s2;
    const auto be_recs = read_all(dir.file("be.pcap"), s2);
    ASSERT_EQ(be_recs.size(), 1u);
    EXPECT_EQ(be_recs[0].payload, text("abc"));
}

TEST(ReassembleFlow, UdpConcatenatesInCaptureOrder) {
    const auto key = make_key(1, 2, 3, 4, Protocol::udp);
    std::vector<Fragment> frags{{text("ab"), 1, {}}, {text("cd"), 2, {}}};
    EXPECT_EQ(reassemble_flow(key, 0, frags).bytes, text("abcd"));
}

TEST(ReassembleFlow, TcpSortsBySequenceNumber) {
    const auto key = make_key(1, 2, 3, 4, Protocol::tcp);
    std::vector<Fragment> frags{{text("wor"), 1, {1000, false}}, {text("hel"), 2, {997, false}}};
    const auto flow = reassemble_flow(key, 0, frags);
    EXPECT_EQ(flow.bytes, text("helwor"));
    EXPECT_EQ(flow.gap_count, 0u);
}

TEST(ReassembleFlow, SequenceWraparound) {
    const auto key = make_key(1, 2, 3, 4, Protocol::tcp);
    std::vector<Fragment> frags{{text("tail"), 1, {2, false}}, {text("head"), 2, {0xfffffffe, false}}};
    EXPECT_EQ(reassemble_flow(key, 0, frags).bytes, text("headtail"));
}

TEST(ReassembleFlow, GapsAreSkippedAndCounted) {
    const auto key = make_key(1, 2, 3, 4, Protocol::tcp);
    std::vector<Fragment> frags{{text("aaa"), 1, {100, false}}, {text("ccc"), 2, {110, false}}};
    const auto flow = reassemble_flow(key, 0, frags);
    EXPECT_EQ(flow.bytes, text("aaaccc"));
    EXPECT_EQ(flow.gap_count, 1u);
}

TEST(ReassembleFlow, RetransmissionsMatchIntervalUnionOracle) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t stream_len = 50 + rng() % 400;
        Bytes stream(stream_len);
        for (auto& b : stream) {
            b = static_cast<std::uint8_t>(rng());
        }
        const std::uint32_t isn = static_cast<std::uint32_t>(rng());
        std::vector<Fragment> frags;
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        const int n = 3 + static_cast<int>(rng() % 20);
        // First segment anchors offset 0 so that relative offsets are non-negative.
        for (int i = 0; i < n; ++i) {
            const std::size_t start = i == 0 ? 0 : rng() % stream_len;
            const std::size_t len = 1 + rng() % std::min<std::size_t>(60, stream_len - start);
            frags.push_back({Bytes(stream.begin() + static_cast<std::ptrdiff_t>(start),
                                   stream.begin() + static_cast<std::ptrdiff_t>(start + len)),
                             i, {isn + static_cast<std::uint32_t>(start), false}});
            ranges.emplace_back(start, start + len);
        }
        // Oracle: covered byte set, concatenated in offset order.
        std::vector<bool> covered(stream_len, false);
        for (auto [a, b] : ranges) {
            std::fill(covered.begin() + static_cast<std::ptrdiff_t>(a), covered.begin() + static_cast<std::ptrdiff_t>(b),
                      true);
        }
        Bytes expected;
        std::uint32_t gaps = 0;
        for (std::size_t i = 0; i < stream_len; ++i) {
            if (covered[i]) {
                if (!expected.empty() && !covered[i - 1]) {
                    ++gaps;
                }
                expected.push_back(stream[i]);
            }
        }
        const auto flow = reassemble_flow(make_key(1, 2, 3, 4, Protocol::tcp), 0, frags);
        ASSERT_EQ(flow.bytes.size(), expected.size()) << "trial " << trial;
        ASSERT_EQ(flow.bytes, expected) << "trial " << trial;
        ASSERT_EQ(flow.gap_count, gaps) << "trial " << trial;
    }
}

TEST(ReassembleFlow, FirstWriterWinsOnConflictingOverlap) {
    const auto key = make_key(1, 2, 3, 4, Protocol::tcp);
    std::vector<Fragment> frags{{text("abcd"), 1, {10, false}}, {text("XXXXef"), 2, {10, false}}};
    EXPECT_EQ(reassemble_flow(key, 0, frags).bytes, text("abcdef"));
}

TEST(BucketPeriods, SingleFlowInsidePeriodZero) {
    const auto key = make_key(1, 2, 3, 4, Protocol::udp);
    std::vector<PacketRecord> pkts{{key, text("a"), 10 * kSec, {}}, {key, text("b"), 20 * kSec, {}}};
    const auto buckets = bucket_periods(pkts, {});
    ASSERT_EQ(buckets.size(), 1u);
    ASSERT_EQ(buckets.at(0).size(), 1u);
    EXPECT_EQ(buckets.at(0)[0].bytes, text("ab"));
}

TEST(BucketPeriods, FlowSpanningBoundaryIsSplit) {
    const auto key = make_key(1, 2, 3, 4, Protocol::udp);
    std::vector<PacketRecord> pkts;
    for (int t = 3595; t <= 3605; t += 2) {
        pkts.push_back({key, text(std::to_string(t)), t * kSec, {}});
    }
    const auto buckets = bucket_periods(pkts, {});
    ASSERT_EQ(buckets.size(), 2u);
    EXPECT_EQ(buckets.at(0).at(0).bytes, text("359535973599"));
    EXPECT_EQ(buckets.at(1).at(0).bytes, text("360136033605"));
    EXPECT_EQ(buckets.at(0)[0].key, buckets.at(1)[0].key);
}

TEST(BucketPeriods, IdleTimeoutOpensANewRecord) {
    const auto key = make_key(1, 2, 3, 4, Protocol::udp);
    std::vector<PacketRecord> pkts{{key, text("a"), 10 * kSec, {}}, {key, text("b"), 400 * kSec, {}}};
    const auto buckets = bucket_periods(pkts, {});
    ASSERT_EQ(buckets.at(0).size(), 2u);
    EXPECT_EQ(buckets.at(0)[0].bytes, text("a"));
    EXPECT_EQ(buckets.at(0)[1].bytes, text("b"));
}

TEST(BucketPeriods, ThousandFlowsMatchHistogramOracle) {
    std::mt19937_64 rng(11);
    std::vector<PacketRecord> pkts;
    std::map<std::uint64_t, std::size_t> histogram;
    std::uint64_t total_bytes = 0;
    for (std::uint32_t i = 0; i < 1000; ++i) {
        const auto key = make_key(0x0a000000 + i, 0x0b000000, static_cast<std::uint16_t>(1000 + i % 50000), 80,
                                  i % 2 ? Protocol::udp : Protocol::tcp);
        const TimestampNs t0 = static_cast<TimestampNs>(rng() % (3 * 3600 - 100)) * kSec;
        ++histogram[static_cast<std::uint64_t>(t0 / (3600 * kSec))];
        // Two packets 1 ms apart, never straddling a boundary unless t0 is within 1 ms of one.
        Bytes p1(10, static_cast<std::uint8_t>(i)), p2(7, static_cast<std::uint8_t>(i + 1));
        pkts.push_back({key, p1, t0, {1, false}});
        pkts.push_back({key, p2, t0 + 1'000'000, {11, false}});
        total_bytes += 17;
    }
    std::shuffle(pkts.begin(), pkts.end(), rng);
    std::stable_sort(pkts.begin(), pkts.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
    const auto buckets = bucket_periods(pkts, {});
    std::map<std::uint64_t, std::size_t> got;
    std::uint64_t bytes = 0;
    for (const auto& [id, flows] : buckets) {
        got[id] = flows.size();
        for (const auto& f : flows) {
            bytes += f.bytes.size();
            EXPECT_EQ(f.period_id, id);
        }
    }
    EXPECT_EQ(got, histogram);
    EXPECT_EQ(bytes, total_bytes);
}

TEST(BucketPeriods, DeterministicAcrossRuns) {
    TempDir dir("det");
    std::mt19937_64 rng(3);
    {
        PcapWriter w(dir.file("d.pcap"));
        for (int i = 0; i < 300; ++i) {
            const auto key = make_key(1 + rng() % 5, 2, static_cast<std::uint16_t>(rng() % 3), 80,
                                      rng() % 2 ? Protocol::tcp : Protocol::udp);
            Bytes payload(1 + rng() % 100);
            for (auto& b : payload) {
                b = static_cast<std::uint8_t>(rng());
            }
            w.write(static_cast<TimestampNs>(i) * 30 * kSec,
                    build_ipv4_frame(key, payload, static_cast<std::uint32_t>(rng())));
        }
    }
    IngestStats s1, s2;
    const auto a = ingest_capture(dir.file("d.pcap"), {}, s1);
    const auto b = ingest_capture(dir.file("d.pcap"), {}, s2);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [id, flows] : a) {
        const auto& other = b.at(id);
        ASSERT_EQ(flows.size(), other.size());
        for (std::size_t i = 0; i < flows.size(); ++i) {
            EXPECT_EQ(flows[i].key, other[i].key);
            EXPECT_EQ(flows[i].bytes, other[i].bytes);
            EXPECT_EQ(flows[i].first_seen, other[i].first_seen);
        }
    }
}

TEST(BucketPeriods, NoFlowCrossesAPeriodBoundary) {
    std::mt19937_64 rng(5);
    std::vector<PacketRecord> pkts;
    const auto key = make_key(1, 2, 3, 4, Protocol::udp);
    for (int i = 0; i < 2000; ++i) {
        pkts.push_back({key, text("x"), static_cast<TimestampNs>(i) * 7 * kSec, {}});
    }
    IngestConfig cfg;
    cfg.period_seconds = 600;
    for (const auto& [id, flows] : bucket_periods(pkts, cfg)) {
        const auto period = CapturePeriod::for_id(id, cfg.period_seconds);
        for (const auto& f : flows) {
            EXPECT_GE(f.first_seen, static_cast<TimestampNs>(period.start_time) * kSec);
            EXPECT_LT(f.last_seen, static_cast<TimestampNs>(period.end_time) * kSec);
        }
    }
}
