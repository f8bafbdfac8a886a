#include "dspas/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dspas/error.hpp"

namespace dspas {

namespace {

Word sign_extend(std::uint64_t v, unsigned word_size) noexcept {
    if (word_size >= 8) {
        return static_cast<Word>(v);
    }
    const unsigned bits = 8 * word_size;
    const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
    v &= mask;
    const std::uint64_t sign = std::uint64_t{1} << (bits - 1);
    return static_cast<Word>(v ^ sign) - static_cast<Word>(sign);
}

struct Stripped {
    Bytes bytes;
    std::vector<bool> wild; // parallel to bytes
};

// Run stripping with wildcard bytes acting as run breakers: an unknown byte
// cannot be proven equal to its neighbours.
Stripped strip_masked(ByteView bytes, std::size_t run_threshold, const WildcardMask* mask) {
    Stripped out;
    out.bytes.reserve(bytes.size());
    out.wild.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const bool wild_i = mask != nullptr && mask->contains(i);
        std::size_t j = i + 1;
        if (!wild_i) {
            while (j < bytes.size() && bytes[j] == bytes[i] && !(mask != nullptr && mask->contains(j))) {
                ++j;
            }
        }
        const std::size_t keep = std::min(j - i, run_threshold);
        for (std::size_t k = 0; k < keep; ++k) {
            out.bytes.push_back(bytes[i]);
            out.wild.push_back(wild_i);
        }
        i = j;
    }
    return out;
}

} // namespace

double PreprocessConfig::amplitude() const noexcept {
    return std::ldexp(1.0, static_cast<int>(8 * word_size - 1)) - 1.0;
}

Word PreprocessConfig::max_word() const noexcept {
    return word_size >= 8 ? std::numeric_limits<Word>::max() : (Word{1} << (8 * word_size - 1)) - 1;
}

Word PreprocessConfig::min_word() const noexcept {
    return word_size >= 8 ? std::numeric_limits<Word>::min() : -(Word{1} << (8 * word_size - 1));
}

void PreprocessConfig::validate() const {
    if (word_size < 1 || word_size > 8) {
        throw ContractViolation("word size must be in [1, 8], got " + std::to_string(word_size));
    }
    if (run_threshold < 2 * static_cast<std::size_t>(word_size)) {
        throw ContractViolation("run threshold must be at least 2W, got " + std::to_string(run_threshold));
    }
}

WildcardMask::WildcardMask(std::vector<std::size_t> positions) : positions_(std::move(positions)) {
    std::sort(positions_.begin(), positions_.end());
    positions_.erase(std::unique(positions_.begin(), positions_.end()), positions_.end());
}

WildcardMask WildcardMask::from_pattern(const std::string& pattern, Bytes& excerpt_out) {
    excerpt_out.clear();
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const char c = pattern[i];
        if (c == '\\' && i + 1 < pattern.size() && (pattern[i + 1] == '?' || pattern[i + 1] == '\\')) {
            excerpt_out.push_back(static_cast<std::uint8_t>(pattern[++i]));
        } else if (c == '?') {
            positions.push_back(excerpt_out.size());
            excerpt_out.push_back(0);
        } else {
            excerpt_out.push_back(static_cast<std::uint8_t>(c));
        }
    }
    return WildcardMask(std::move(positions));
}

bool WildcardMask::contains(std::size_t index) const noexcept {
    return std::binary_search(positions_.begin(), positions_.end(), index);
}

void WildcardMask::validate(std::size_t excerpt_len) const {
    if (!positions_.empty() && positions_.back() >= excerpt_len) {
        throw ContractViolation("wildcard position " + std::to_string(positions_.back()) +
                                " is outside an excerpt of " + std::to_string(excerpt_len) + " bytes");
    }
}

Bytes strip_repetitive_runs(ByteView bytes, std::size_t run_threshold) {
    if (run_threshold < 2) {
        throw ContractViolation("run threshold must be >= 2");
    }
    return strip_masked(bytes, run_threshold, nullptr).bytes;
}

Word hash_word(ByteView block, const PreprocessConfig& cfg) noexcept {
    return sign_extend(hash_block(block, cfg.hash_seed), cfg.word_size);
}

WordSignal window_hash(ByteView bytes, const PreprocessConfig& cfg, unsigned alignment_offset) {
    cfg.validate();
    if (alignment_offset >= cfg.word_size) {
        throw ContractViolation("alignment offset must be < W");
    }
    WordSignal sig;
    sig.source_len_bytes = bytes.size();
    sig.alignment_offset = alignment_offset;
    const std::size_t w = cfg.word_size;
    if (bytes.size() >= alignment_offset + w) {
        const std::size_t count = (bytes.size() - alignment_offset) / w;
        sig.words.reserve(count);
        for (std::size_t k = 0; k < count; ++k) {
            sig.words.push_back(hash_word(bytes.subspan(alignment_offset + k * w, w), cfg));
        }
    }
    sig.original_word_count = sig.words.size();
    return sig;
}

WordSignal pad_chunk(WordSignal signal, std::size_t chunk_words, std::uint64_t pad_seed, unsigned word_size) {
    if (chunk_words < 1) {
        throw ContractViolation("chunk size must be >= 1");
    }
    signal.original_word_count = signal.words.size();
    std::size_t target = (signal.words.size() + chunk_words - 1) / chunk_words * chunk_words;
    if (target == 0) {
        target = chunk_words;
    }
    const CounterRng rng(pad_seed);
    for (std::uint64_t i = 0; signal.words.size() < target; ++i) {
        signal.words.push_back(sign_extend(rng(i), word_size));
    }
    return signal;
}

WordSignal preprocess_payload(ByteView payload, const PreprocessConfig& cfg) {
    const Bytes stripped = strip_repetitive_runs(payload, cfg.run_threshold);
    WordSignal sig = window_hash(stripped, cfg, 0);
    sig.source_len_bytes = payload.size();
    return sig;
}

std::vector<WordSignal> preprocess_excerpt(ByteView excerpt, const WildcardMask& mask, const PreprocessConfig& cfg) {
    cfg.validate();
    mask.validate(excerpt.size());
    if (excerpt.size() < 2 * static_cast<std::size_t>(cfg.word_size)) {
        throw QueryTooShortError("excerpt of " + std::to_string(excerpt.size()) + " bytes is shorter than 2W = " +
                                 std::to_string(2 * cfg.word_size));
    }

    Stripped stripped;
    if (cfg.wildcard_mode == WildcardMode::byte_zero) {
        Bytes substituted(excerpt.begin(), excerpt.end());
        for (auto p : mask.positions()) {
            substituted[p] = 0;
        }
        stripped = strip_masked(substituted, cfg.run_threshold, nullptr);
    } else {
        stripped = strip_masked(excerpt, cfg.run_threshold, &mask);
    }

    const std::size_t w = cfg.word_size;
    std::vector<WordSignal> signals;
    signals.reserve(w);
    for (unsigned a = 0; a < w; ++a) {
        WordSignal sig = window_hash(stripped.bytes, cfg, a);
        sig.source_len_bytes = excerpt.size();
        if (cfg.wildcard_mode == WildcardMode::word_zero && !mask.empty()) {
            for (std::size_t k = 0; k < sig.words.size(); ++k) {
                const auto first = stripped.wild.begin() + static_cast<std::ptrdiff_t>(a + k * w);
                if (std::find(first, first + static_cast<std::ptrdiff_t>(w), true) != first + static_cast<std::ptrdiff_t>(w)) {
                    sig.words[k] = 0;
                }
            }
        }
        signals.push_back(std::move(sig));
    }
    return signals;
}

std::vector<std::size_t> count_wildcard_words(ByteView excerpt, const WildcardMask& mask, const PreprocessConfig& cfg) {
    const Stripped stripped = strip_masked(excerpt, cfg.run_threshold, &mask);
    std::vector<std::size_t> counts;
    const std::size_t w = cfg.word_size;
    for (unsigned a = 0; a < w; ++a) {
        std::size_t zeroed = 0;
        for (std::size_t k = 0; a + (k + 1) * w <= stripped.bytes.size(); ++k) {
            for (std::size_t j = 0; j < w; ++j) {
                if (stripped.wild[a + k * w + j]) {
                    ++zeroed;
                    break;
                }
            }
        }
        counts.push_back(zeroed);
    }
    return counts;
}

} // namespace dspas
