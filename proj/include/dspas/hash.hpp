#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dspas {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// SplitMix64 finalizer. Bijective on 64-bit values.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine64(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Keyed 64-bit hash of a block of at most 8 bytes.
///
/// The block is loaded little-endian and zero-extended, then passed through two
/// keyed rounds of the SplitMix64 finalizer. Archives record the seed, and this
/// exact function must not change between the digest and query sides.
std::uint64_t hash_block(ByteView block, std::uint64_t seed) noexcept;

/// Whole-buffer 64-bit checksum used for archive trailers.
std::uint64_t checksum64(ByteView data) noexcept;

/// Counter-based generator: value i of stream `key` is mix64(key + i * golden).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

    std::uint64_t operator()(std::uint64_t counter) const noexcept {
        return mix64(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
    }

private:
    std::uint64_t key_;
};

} // namespace dspas
