#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dspas/hash.hpp"

namespace dspas {

/// Signed word sample. Words narrower than 8 bytes are sign-extended.
using Word = std::int64_t;

enum class WildcardMode : std::uint8_t {
    /// Hash first, then replace every word touched by a wildcard with 0.
    word_zero = 0,
    /// Replace wildcard bytes with 0x00, then hash as an ordinary excerpt.
    byte_zero = 1,
};

inline constexpr std::uint64_t kDefaultHashSeed = 0x5d5a9e3c0fb4a3a1ULL;

struct PreprocessConfig {
    unsigned word_size = 8;          // W, bytes
    std::size_t run_threshold = 64;  // R, bytes
    std::uint64_t hash_seed = kDefaultHashSeed;
    WildcardMode wildcard_mode = WildcardMode::word_zero;

    /// A = 2^(8W-1) - 1.
    double amplitude() const noexcept;
    Word max_word() const noexcept;
    Word min_word() const noexcept;

    /// Throws ContractViolation unless 1 <= W <= 8 and R >= 2W.
    void validate() const;
};

struct WordSignal {
    std::vector<Word> words;
    std::size_t source_len_bytes = 0;
    unsigned alignment_offset = 0;
    /// Words before padding; equals words.size() for unpadded signals.
    std::size_t original_word_count = 0;
};

/// Byte indices of an excerpt whose values are unknown. Kept sorted and unique.
class WildcardMask {
public:
    WildcardMask() = default;
    explicit WildcardMask(std::vector<std::size_t> positions);

    /// Parses text where '?' marks an unknown byte and "\?" / "\\" escape literals.
    static WildcardMask from_pattern(const std::string& pattern, Bytes& excerpt_out);

    bool empty() const noexcept { return positions_.empty(); }
    std::size_t size() const noexcept { return positions_.size(); }
    bool contains(std::size_t index) const noexcept;
    const std::vector<std::size_t>& positions() const noexcept { return positions_; }

    /// Throws ContractViolation if any position is >= excerpt_len.
    void validate(std::size_t excerpt_len) const;

private:
    std::vector<std::size_t> positions_;
};

/// Truncates every maximal run of one repeated byte of length >= R to exactly R bytes.
Bytes strip_repetitive_runs(ByteView bytes, std::size_t run_threshold);

/// Hashes consecutive non-overlapping W-byte blocks of bytes[offset..]. The
/// trailing partial block is dropped. No stripping is applied here.
WordSignal window_hash(ByteView bytes, const PreprocessConfig& cfg, unsigned alignment_offset);

/// Hashes one W-byte block to a signed word.
Word hash_word(ByteView block, const PreprocessConfig& cfg) noexcept;

/// Extends the signal to the next multiple of `chunk_words` with pseudorandom
/// words. Zero-length input becomes one whole pad chunk.
WordSignal pad_chunk(WordSignal signal, std::size_t chunk_words, std::uint64_t pad_seed, unsigned word_size = 8);

/// Digest-side preprocessing: strip runs, then hash from offset 0.
WordSignal preprocess_payload(ByteView payload, const PreprocessConfig& cfg);

/// Query-side preprocessing: one signal per alignment offset 0..W-1, with
/// wildcard handling per `cfg.wildcard_mode`. Throws QueryTooShortError when
/// the excerpt is shorter than 2W.
std::vector<WordSignal> preprocess_excerpt(ByteView excerpt, const WildcardMask& mask, const PreprocessConfig& cfg);

/// Number of words zeroed by the wildcard step for each alignment (word_zero mode).
std::vector<std::size_t> count_wildcard_words(ByteView excerpt, const WildcardMask& mask, const PreprocessConfig& cfg);

} // namespace dspas
