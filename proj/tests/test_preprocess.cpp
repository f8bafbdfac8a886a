#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dspas/error.hpp"
#include "dspas/preprocess.hpp"
#include "support.hpp"

using namespace dspas;
using dspas::testing::text;

namespace {

Bytes random_payload(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Bytes b(n);
    for (auto& x : b) {
        x = static_cast<std::uint8_t>(rng());
    }
    return b;
}

// Lengths of maximal single-byte runs, scanned independently.
std::vector<std::size_t> run_lengths(const Bytes& b) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < b.size();) {
        std::size_t j = i;
        while (j < b.size() && b[j] == b[i]) {
            ++j;
        }
        out.push_back(j - i);
        i = j;
    }
    return out;
}

} // namespace

TEST(PreprocessConfig, AmplitudeMatchesWordSize) {
    PreprocessConfig cfg;
    EXPECT_DOUBLE_EQ(cfg.amplitude(), 9223372036854775807.0);
    EXPECT_NEAR(cfg.amplitude(), 9.2e18, 0.1e18);
    cfg.word_size = 2;
    EXPECT_DOUBLE_EQ(cfg.amplitude(), 32767.0);
    EXPECT_EQ(cfg.min_word(), -32768);
    cfg.word_size = 0;
    EXPECT_THROW(cfg.validate(), ContractViolation);
    cfg.word_size = 8;
    cfg.run_threshold = 15;
    EXPECT_THROW(cfg.validate(), ContractViolation);
}

TEST(StripRepetitiveRuns, LongRunTruncatedToThreshold) {
    EXPECT_EQ(strip_repetitive_runs(Bytes(100, 0), 64), Bytes(64, 0));
}

TEST(StripRepetitiveRuns, NoLongRunIsIdentity) {
    Bytes b;
    for (int i = 0; i < 300; ++i) {
        b.push_back(static_cast<std::uint8_t>("abc"[i % 3]));
    }
    EXPECT_EQ(strip_repetitive_runs(b, 64), b);
}

TEST(StripRepetitiveRuns, InjectedRunsMatchRunScanOracle) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Bytes b;
        auto noise = [&](std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                std::uint8_t v = static_cast<std::uint8_t>(rng());
                if (!b.empty() && v == b.back()) {
                    v ^= 1;
                }
                b.push_back(v);
            }
        };
        noise(50);
        std::vector<std::pair<std::uint8_t, std::size_t>> runs{{0x41, 63}, {0x42, 64}, {0x43, 200}};
        for (auto [v, n] : runs) {
            b.insert(b.end(), n, v);
            noise(30 + rng() % 20);
        }
        const Bytes out = strip_repetitive_runs(b, 64);
        const auto in_runs = run_lengths(b);
        const auto out_runs = run_lengths(out);
        ASSERT_EQ(in_runs.size(), out_runs.size());
        for (std::size_t i = 0; i < in_runs.size(); ++i) {
            EXPECT_EQ(out_runs[i], std::min<std::size_t>(in_runs[i], 64));
        }
        std::size_t count63 = 0, count64 = 0;
        for (auto r : out_runs) {
            count63 += r == 63;
            count64 += r == 64;
        }
        EXPECT_EQ(count63, 1u);
        EXPECT_EQ(count64, 2u);
    }
}

TEST(StripRepetitiveRuns, Idempotent) {
    Bytes b = random_payload(1000, 1);
    b.insert(b.begin() + 500, 300, 0xff);
    b.insert(b.begin() + 100, 90, 0x00);
    const Bytes once = strip_repetitive_runs(b, 64);
    EXPECT_EQ(strip_repetitive_runs(once, 64), once);
}

TEST(WindowHash, LengthArithmetic) {
    PreprocessConfig cfg;
    const Bytes b = random_payload(24, 2);
    EXPECT_EQ(window_hash(b, cfg, 0).words.size(), 3u);
    EXPECT_EQ(window_hash(b, cfg, 1).words.size(), 2u);
    EXPECT_TRUE(window_hash(ByteView(b).first(8), cfg, 1).words.empty());
    EXPECT_THROW(window_hash(b, cfg, 8), ContractViolation);
}

TEST(WindowHash, IdenticalBlocksGiveIdenticalWords) {
    PreprocessConfig cfg;
    Bytes b = text("ABCDEFGHABCDEFGH");
    const auto sig = window_hash(b, cfg, 0);
    ASSERT_EQ(sig.words.size(), 2u);
    EXPECT_EQ(sig.words[0], sig.words[1]);
    PreprocessConfig other = cfg;
    other.hash_seed ^= 1;
    EXPECT_NE(window_hash(b, other, 0).words[0], sig.words[0]);
}

TEST(WindowHash, WordsAreUniformOverSignedRange) {
    PreprocessConfig cfg;
    const std::size_t n = 100000;
    const Bytes b = random_payload(n * 8, 3);
    const auto sig = window_hash(b, cfg, 0);
    ASSERT_EQ(sig.words.size(), n);
    const double a = cfg.amplitude();
    double sum = 0.0, sq = 0.0;
    for (auto w : sig.words) {
        const double x = static_cast<double>(w) / a;
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // Mean within 3 sigma/sqrt(n) of zero, variance within 5% of A^2/3 (in units of A).
    EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(1.0 / 3.0) / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(var, 1.0 / 3.0, 0.05 / 3.0);
}

TEST(WindowHash, NarrowWordsStayInRange) {
    PreprocessConfig cfg;
    cfg.word_size = 2;
    cfg.run_threshold = 64;
    const auto sig = window_hash(random_payload(20000, 4), cfg, 0);
    for (auto w : sig.words) {
        ASSERT_GE(w, cfg.min_word());
        ASSERT_LE(w, cfg.max_word());
    }
}

TEST(PadChunk, AlignedInputUnchanged) {
    WordSignal s;
    s.words.assign(1024, 7);
    const auto out = pad_chunk(s, 1024, 1);
    EXPECT_EQ(out.words, s.words);
    EXPECT_EQ(out.original_word_count, 1024u);
}

TEST(PadChunk, EmptyInputBecomesOneFullChunk) {
    const auto out = pad_chunk(WordSignal{}, 1024, 1);
    EXPECT_EQ(out.words.size(), 1024u);
    EXPECT_EQ(out.original_word_count, 0u);
}

TEST(PadChunk, PadIsReproducibleAndOriginalsUntouched) {
    WordSignal s;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 1500; ++i) {
        s.words.push_back(static_cast<Word>(rng()));
    }
    const auto a = pad_chunk(s, 1024, 0xabc);
    const auto b = pad_chunk(s, 1024, 0xabc);
    const auto c = pad_chunk(s, 1024, 0xabd);
    ASSERT_EQ(a.words.size(), 2048u);
    EXPECT_EQ(a.original_word_count, 1500u);
    EXPECT_TRUE(std::equal(s.words.begin(), s.words.end(), a.words.begin()));
    EXPECT_EQ(a.words, b.words);
    EXPECT_FALSE(std::equal(a.words.begin() + 1500, a.words.end(), c.words.begin() + 1500));
}

TEST(PreprocessExcerpt, ThreeHundredBytesGiveThirtySevenOrThirtySixWords) {
    PreprocessConfig cfg;
    const auto sigs = preprocess_excerpt(random_payload(300, 5), {}, cfg);
    ASSERT_EQ(sigs.size(), 8u);
    for (unsigned a = 0; a < 8; ++a) {
        EXPECT_EQ(sigs[a].alignment_offset, a);
        EXPECT_EQ(sigs[a].words.size(), (300 - a) / 8);
        EXPECT_TRUE(sigs[a].words.size() == 37 || sigs[a].words.size() == 36);
    }
}

TEST(PreprocessExcerpt, MaskedFirstWordIsZero) {
    PreprocessConfig cfg;
    const Bytes ex = random_payload(64, 6);
    const auto sigs = preprocess_excerpt(ex, WildcardMask({0, 1, 2, 3, 4, 5, 6, 7}), cfg);
    EXPECT_EQ(sigs[0].words[0], 0);
    EXPECT_NE(sigs[0].words[1], 0);
}

TEST(PreprocessExcerpt, ZeroedWordCountMatchesOverlapOracle) {
    PreprocessConfig cfg;
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const Bytes ex = random_payload(300, rng());
        std::vector<std::size_t> pos;
        while (pos.size() < 10) {
            const std::size_t p = rng() % 300;
            if (std::find(pos.begin(), pos.end(), p) == pos.end()) {
                pos.push_back(p);
            }
        }
        const WildcardMask mask(pos);
        const auto sigs = preprocess_excerpt(ex, mask, cfg);
        const auto plain = preprocess_excerpt(ex, {}, cfg);
        const auto counts = count_wildcard_words(ex, mask, cfg);
        for (unsigned a = 0; a < 8; ++a) {
            // Oracle: window [a + 8k, a + 8k + 8) intersects the mask.
            std::size_t expected = 0;
            for (std::size_t k = 0; a + 8 * (k + 1) <= 300; ++k) {
                bool hit = false;
                for (auto p : pos) {
                    hit = hit || (p >= a + 8 * k && p < a + 8 * k + 8);
                }
                expected += hit;
                if (!hit) {
                    EXPECT_EQ(sigs[a].words[k], plain[a].words[k]);
                } else {
                    EXPECT_EQ(sigs[a].words[k], 0);
                }
            }
            std::size_t zeros = 0;
            for (auto w : sigs[a].words) {
                zeros += w == 0;
            }
            EXPECT_EQ(zeros, expected);
            EXPECT_EQ(counts[a], expected);
            EXPECT_EQ(sigs[a].words.size(), plain[a].words.size());
        }
    }
}

TEST(PreprocessExcerpt, TooShortIsRejected) {
    PreprocessConfig cfg;
    EXPECT_THROW(preprocess_excerpt(random_payload(15, 1), {}, cfg), QueryTooShortError);
    EXPECT_NO_THROW(preprocess_excerpt(random_payload(16, 1), {}, cfg));
    EXPECT_THROW(preprocess_excerpt(random_payload(20, 1), WildcardMask({25}), cfg), ContractViolation);
}

TEST(PreprocessExcerpt, ByteModeZeroesBytesBeforeHashing) {
    PreprocessConfig cfg;
    cfg.wildcard_mode = WildcardMode::byte_zero;
    Bytes ex = random_payload(64, 7);
    const auto sigs = preprocess_excerpt(ex, WildcardMask({3}), cfg);
    Bytes zeroed = ex;
    zeroed[3] = 0;
    PreprocessConfig plain_cfg;
    EXPECT_EQ(sigs[0].words, window_hash(zeroed, plain_cfg, 0).words);
}

TEST(PreprocessSymmetry, PayloadAndExcerptAgree) {
    PreprocessConfig cfg;
    Bytes b = random_payload(4000, 9);
    b.insert(b.begin() + 1000, 500, 0x20);
    const auto payload = preprocess_payload(b, cfg);
    const auto excerpt = preprocess_excerpt(b, {}, cfg);
    EXPECT_EQ(payload.words, excerpt[0].words);
}

TEST(PreprocessSymmetry, AlignmentConsistency) {
    PreprocessConfig cfg;
    const Bytes b = random_payload(800, 10);
    for (unsigned a = 0; a < 8; ++a) {
        const auto full = window_hash(b, cfg, a);
        const std::size_t k = 20;
        const auto part = window_hash(ByteView(b).subspan(a, k * 8), cfg, 0);
        ASSERT_EQ(part.words.size(), k);
        EXPECT_TRUE(std::equal(part.words.begin(), part.words.end(), full.words.begin()));
    }
}

TEST(WildcardMask, PatternNotation) {
    Bytes ex;
    const auto mask = WildcardMask::from_pattern("ab?d\\?e\\\\", ex);
    EXPECT_EQ(ex, (Bytes{'a', 'b', 0, 'd', '?', 'e', '\\'}));
    EXPECT_EQ(mask.positions(), std::vector<std::size_t>{2});
    EXPECT_TRUE(mask.contains(2));
    EXPECT_FALSE(mask.contains(4));
}
