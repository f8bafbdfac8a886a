#include "dspas/corpus.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "dspas/error.hpp"

namespace dspas {

std::size_t SyntheticCorpus::total_bytes() const noexcept {
    std::size_t n = 0;
    for (const auto& f : flows) {
        n += f.bytes.size();
    }
    return n;
}

Bytes random_bytes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes b(n);
    for (std::size_t i = 0; i < n; i += 8) {
        const std::uint64_t v = rng();
        for (std::size_t j = 0; j < 8 && i + j < n; ++j) {
            b[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
        }
    }
    return b;
}

WildcardMask random_mask(std::size_t length, std::size_t count, std::uint64_t seed) {
    if (count > length) {
        throw ContractViolation("cannot place " + std::to_string(count) + " wildcards in " + std::to_string(length) +
                                " bytes");
    }
    std::vector<std::size_t> all(length);
    for (std::size_t i = 0; i < length; ++i) {
        all[i] = i;
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, length - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(count);
    return WildcardMask(std::move(all));
}

std::size_t count_occurrences(const std::vector<FlowPayload>& flows, ByteView needle) {
    if (needle.empty()) {
        return 0;
    }
    const std::boyer_moore_horspool_searcher searcher(needle.begin(), needle.end());
    std::size_t n = 0;
    for (const auto& f : flows) {
        auto it = f.bytes.begin();
        while (true) {
            it = std::search(it, f.bytes.end(), searcher);
            if (it == f.bytes.end()) {
                break;
            }
            ++n;
            ++it;
        }
    }
    return n;
}

SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec) {
    if (spec.min_bytes > spec.max_bytes) {
        throw ContractViolation("flow size range is empty");
    }
    SyntheticCorpus corpus;
    std::mt19937_64 rng(combine64(spec.seed, 0x636f72707573ULL));
    std::set<FlowKey> keys;
    const CapturePeriod period = CapturePeriod::for_id(spec.period_id, spec.period_seconds);
    std::uniform_int_distribution<std::size_t> size_dist(spec.min_bytes, spec.max_bytes);
    std::uniform_int_distribution<std::int64_t> time_dist(
        0, static_cast<std::int64_t>(spec.period_seconds) * 1'000'000'000 - 1);
    while (corpus.flows.size() < spec.flow_count) {
        FlowPayload f;
        const std::uint64_t r = rng();
        f.key.src_addr = IpAddress::v4(0x0a000000u | static_cast<std::uint32_t>(r & 0xffffff));
        f.key.dst_addr = IpAddress::v4(0xc0a80000u | static_cast<std::uint32_t>((r >> 24) & 0xffff));
        f.key.src_port = static_cast<std::uint16_t>(1024 + ((r >> 40) % 60000));
        f.key.dst_port = static_cast<std::uint16_t>((r >> 56) & 1 ? 443 : 80);
        f.key.protocol = Protocol::tcp;
        if (!keys.insert(f.key).second) {
            continue;
        }
        f.period_id = spec.period_id;
        f.first_seen = static_cast<TimestampNs>(period.start_time) * 1'000'000'000 + time_dist(rng);
        f.last_seen = f.first_seen;
        f.bytes = random_bytes(size_dist(rng), combine64(spec.seed, corpus.flows.size()));
        corpus.flows.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < spec.plants.size(); ++i) {
        plant_excerpt(corpus, spec.plants[i], combine64(spec.seed ^ 0x706c616e74ULL, i));
    }
    return corpus;
}

PlantedExcerpt plant_excerpt(SyntheticCorpus& corpus, const PlantSpec& spec, std::uint64_t seed) {
    if (spec.length == 0) {
        throw ContractViolation("planted excerpt must be non-empty");
    }
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < corpus.flows.size(); ++i) {
        if (corpus.flows[i].bytes.size() >= spec.length) {
            eligible.push_back(i);
        }
    }
    if (eligible.empty()) {
        throw ContractViolation("no flow is long enough for a " + std::to_string(spec.length) + "-byte excerpt");
    }
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        PlantedExcerpt p;
        p.spec = spec;
        p.flow_index = eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)];
        auto& bytes = corpus.flows[p.flow_index].bytes;
        p.byte_offset = std::uniform_int_distribution<std::size_t>(0, bytes.size() - spec.length)(rng);
        p.truth.assign(bytes.begin() + static_cast<std::ptrdiff_t>(p.byte_offset),
                       bytes.begin() + static_cast<std::ptrdiff_t>(p.byte_offset + spec.length));
        if (count_occurrences(corpus.flows, p.truth) != 1) {
            continue;
        }
        p.mask = random_mask(spec.length, spec.wildcards, rng());
        p.excerpt = p.truth;
        for (std::size_t pos : p.mask.positions()) {
            p.excerpt[pos] = 0;
        }
        if (spec.corruption_spacing > 0) {
            for (std::size_t pos = spec.corruption_spacing / 2; pos < spec.length; pos += spec.corruption_spacing) {
                auto& b = bytes[p.byte_offset + pos];
                b = static_cast<std::uint8_t>(b ^ (1 + rng() % 255));
                ++p.corrupted_bytes;
            }
        }
        if (spec.insertion_spacing > 0) {
            std::vector<std::size_t> at;
            for (std::size_t pos = spec.insertion_spacing / 2; pos < spec.length; pos += spec.insertion_spacing) {
                at.push_back(p.byte_offset + pos);
            }
            for (auto it = at.rbegin(); it != at.rend(); ++it) {
                bytes.insert(bytes.begin() + static_cast<std::ptrdiff_t>(*it), static_cast<std::uint8_t>(rng()));
                ++p.corrupted_bytes;
            }
        }
        corpus.planted.push_back(p);
        return p;
    }
    throw Error("could not find a unique location for a planted excerpt");
}

Bytes absent_excerpt(const SyntheticCorpus& corpus, std::size_t length, std::uint64_t seed) {
    for (std::uint64_t i = 0; i < 100; ++i) {
        Bytes b = random_bytes(length, combine64(seed, i));
        if (count_occurrences(corpus.flows, b) == 0) {
            return b;
        }
    }
    throw Error("could not draw an absent excerpt");
}

DigestArchive digest_corpus(const SyntheticCorpus& corpus, const DigestParams& params, const CapturePeriod& period) {
    std::vector<FlowDigest> digests;
    digests.reserve(corpus.flows.size());
    for (const auto& f : corpus.flows) {
        digests.push_back(digest_flow(f, params));
    }
    return build_archive(period, std::move(digests), params);
}

} // namespace dspas
