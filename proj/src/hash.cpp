#include "dspas/hash.hpp"

namespace dspas {

namespace {

std::uint64_t load_le(ByteView bytes) noexcept {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes.size() && i < 8; ++i) {
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return v;
}

} // namespace

std::uint64_t hash_block(ByteView block, std::uint64_t seed) noexcept {
    const std::uint64_t k0 = mix64(seed ^ 0x243f6a8885a308d3ULL);
    const std::uint64_t k1 = mix64(seed ^ 0x13198a2e03707344ULL);
    const std::uint64_t v = load_le(block);
    std::uint64_t h = mix64(v ^ k0);
    h = mix64(h + k1 + block.size());
    return h;
}

std::uint64_t checksum64(ByteView data) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    std::size_t i = 0;
    for (; i + 8 <= data.size(); i += 8) {
        h = mix64(h ^ load_le(data.subspan(i, 8))) + 0x9e3779b97f4a7c15ULL;
    }
    if (i < data.size()) {
        h = mix64(h ^ load_le(data.subspan(i))) + 0x9e3779b97f4a7c15ULL;
    }
    return mix64(h ^ static_cast<std::uint64_t>(data.size()));
}

} // namespace dspas
