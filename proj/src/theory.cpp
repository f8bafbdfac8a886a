#include "dspas/theory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dspas/error.hpp"

namespace dspas {

double q_function(double x) noexcept {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

double SystemParams::amp() const noexcept {
    return amplitude > 0.0 ? amplitude : std::ldexp(1.0, static_cast<int>(8 * word_size - 1)) - 1.0;
}

SystemParams SystemParams::for_excerpt(const DigestParams& params, std::size_t l_bytes) {
    SystemParams p;
    p.word_size = params.preprocess.word_size;
    p.transform_size = params.transform_size;
    p.quant_bits = params.quant_bits;
    p.amplitude = params.preprocess.amplitude();
    p.excerpt_words = l_bytes / p.word_size;
    return p;
}

NoiseModel table_noise(unsigned quant_bits) {
    NoiseModel nm;
    nm.source = NoiseSource::table;
    switch (quant_bits) {
    case 3: nm.sigma_n_sq = 6.2e38; break;
    case 4: nm.sigma_n_sq = 1.2e38; break;
    case 5: nm.sigma_n_sq = 3.5e37; break;
    default: throw ContractViolation("no reference noise variance for q = " + std::to_string(quant_bits));
    }
    return nm;
}

double fp_probability(double k, std::size_t transform_size, std::size_t excerpt_words) {
    if (excerpt_words < 1 || excerpt_words > transform_size) {
        throw ContractViolation("fp_probability needs 1 <= l <= L, got l = " + std::to_string(excerpt_words) +
                                ", L = " + std::to_string(transform_size));
    }
    const double q = q_function(k);
    const double n = static_cast<double>(transform_size - excerpt_words + 1);
    if (n == 1.0) {
        return q;
    }
    return -std::expm1(n * std::log1p(-q));
}

CorrelationStats correlation_stats(const SystemParams& p, const NoiseModel& nm) {
    const double a = p.amp();
    const double l = static_cast<double>(p.excerpt_words);
    const double rho = nm.sigma_n_sq / (a * a);
    CorrelationStats s;
    s.sigma_cn = a * a * std::sqrt(l / 9.0 + l * rho / 3.0);
    s.sigma_cz = a * a * std::sqrt(rho * l / 3.0);
    s.mu_cz = l * a * a / 3.0;
    return s;
}

double fn_probability(double k, const SystemParams& p, const NoiseModel& nm) {
    const double a = p.amp();
    const double l = static_cast<double>(p.excerpt_words);
    const double rho = nm.sigma_n_sq / (a * a);
    if (rho <= 0.0) {
        const double root = std::sqrt(l);
        return root > k ? 0.0 : (root < k ? 1.0 : 0.5);
    }
    const double arg = (k * std::sqrt(l / 9.0 + l * rho / 3.0) - l / 3.0) / std::sqrt(rho * l / 3.0);
    return q_function(-arg);
}

double table_coefficient(std::size_t l_bytes) {
    constexpr std::size_t n = std::size(kTableLengths);
    if (l_bytes < kTableLengths[0] || l_bytes > kTableLengths[n - 1]) {
        throw ContractViolation("table coefficient defined for 300..600 bytes, got " + std::to_string(l_bytes));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (l_bytes <= kTableLengths[i + 1]) {
            const double t = static_cast<double>(l_bytes - kTableLengths[i]) /
                             static_cast<double>(kTableLengths[i + 1] - kTableLengths[i]);
            return kTableCoefficients[i] + t * (kTableCoefficients[i + 1] - kTableCoefficients[i]);
        }
    }
    return kTableCoefficients[n - 1];
}

ThresholdChoice solve_threshold_coefficient(const SystemParams& p, const NoiseModel& nm, const ErrorTargets& targets) {
    if (!(targets.fp_max > 0.0 && targets.fp_max < 1.0 && targets.fn_max > 0.0 && targets.fn_max < 1.0)) {
        throw ContractViolation("error targets must lie in (0, 1)");
    }
    if (p.excerpt_words < 1) {
        throw ContractViolation("excerpt must hold at least one word");
    }
    const std::size_t l = std::min(p.excerpt_words, p.transform_size);
    auto fn = [&](double k) { return fn_probability(k, p, nm); };

    ThresholdChoice c;
    if (fn(0.0) > targets.fn_max) {
        c.k = 0.0;
    } else {
        double lo = 0.0;
        double hi = 1.0;
        while (fn(hi) <= targets.fn_max && hi < 1e6) {
            lo = hi;
            hi *= 2.0;
        }
        for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (fn(mid) <= targets.fn_max ? lo : hi) = mid;
        }
        c.k = lo;
    }
    c.fn = fn(c.k);
    c.fp = fp_probability(c.k, p.transform_size, l);
    c.feasible = c.fn <= targets.fn_max && c.fp <= targets.fp_max;
    return c;
}

ThresholdChoice select_threshold_coefficient(std::size_t l_bytes, const SystemParams& p, const NoiseModel& nm,
                                             const ErrorTargets& targets) {
    SystemParams sp = p;
    sp.excerpt_words = l_bytes / sp.word_size;
    const std::size_t l = std::clamp<std::size_t>(sp.excerpt_words, 1, sp.transform_size);

    ThresholdChoice c;
    if (l_bytes >= kTableLengths[0] && l_bytes <= kTableLengths[std::size(kTableLengths) - 1]) {
        c.k = table_coefficient(l_bytes);
        c.from_table = true;
        c.fn = fn_probability(c.k, sp, nm);
        c.fp = fp_probability(c.k, sp.transform_size, l);
        c.feasible = c.fn <= targets.fn_max && c.fp <= targets.fp_max;
        return c;
    }
    c = solve_threshold_coefficient(sp, nm, targets);
    const double clamped = l_bytes < kTableLengths[0] ? std::min(c.k, kTableCoefficients[0])
                                                       : std::max(c.k, kTableCoefficients[3]);
    if (clamped != c.k) {
        c.k = clamped;
        c.fn = fn_probability(c.k, sp, nm);
        c.fp = fp_probability(c.k, sp.transform_size, l);
        c.feasible = c.fn <= targets.fn_max && c.fp <= targets.fp_max;
    }
    return c;
}

double similarity_adjusted_coefficient(double k, double mismatch_budget) {
    if (!(mismatch_budget >= 0.0 && mismatch_budget <= 0.2)) {
        throw ContractViolation("mismatch budget must lie in [0, 0.2]");
    }
    return k * (1.0 - mismatch_budget);
}

NoiseModel calibrate_noise(std::span<const Bytes> corpus, const DigestParams& params, std::size_t min_words) {
    params.validate();
    std::vector<std::vector<double>> diffs;
    std::size_t n = 0;
    double sum = 0.0;
    double sig_sum = 0.0;
    double sig_sq = 0.0;
    for (std::size_t f = 0; f < corpus.size(); ++f) {
        WordSignal sig = preprocess_payload(corpus[f], params.preprocess);
        const std::vector<Word> original = sig.words;
        FlowKey key;
        key.src_port = static_cast<std::uint16_t>(f);
        const auto rec = reconstruct_flow_signal(digest_words(key, 0, std::move(sig.words), params), params);
        auto& d = diffs.emplace_back(original.size());
        for (std::size_t i = 0; i < original.size(); ++i) {
            const double x = static_cast<double>(original[i]);
            d[i] = rec.samples[i] - x;
            sum += d[i];
            sig_sum += x;
            sig_sq += x * x;
        }
        n += original.size();
    }
    if (n < min_words || n < 2) {
        throw CalibrationError("calibration needs at least " + std::to_string(min_words) + " words, corpus holds " +
                               std::to_string(n));
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    double lag = 0.0;
    for (const auto& d : diffs) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double c = d[i] - mean;
            ss += c * c;
            if (i + 1 < d.size()) {
                lag += c * (d[i + 1] - mean);
            }
        }
    }
    NoiseModel nm;
    nm.source = NoiseSource::calibrated;
    nm.samples = n;
    nm.mean = mean;
    nm.sigma_n_sq = ss / static_cast<double>(n - 1);
    nm.lag1_autocorrelation = ss > 0.0 ? lag / ss : 0.0;
    const double sig_mean = sig_sum / static_cast<double>(n);
    nm.signal_variance = (sig_sq - static_cast<double>(n) * sig_mean * sig_mean) / static_cast<double>(n - 1);
    return nm;
}

NoiseModel calibrate_noise_synthetic(const DigestParams& params, std::size_t words, std::uint64_t seed,
                                     std::size_t flow_bytes) {
    const std::size_t word_size = params.preprocess.word_size;
    if (flow_bytes < word_size) {
        throw ContractViolation("synthetic calibration flows must hold at least one word");
    }
    std::mt19937_64 rng(seed);
    std::vector<Bytes> corpus;
    std::size_t have = 0;
    while (have < words) {
        Bytes b(flow_bytes);
        for (std::size_t i = 0; i < b.size(); i += 8) {
            const std::uint64_t v = rng();
            for (std::size_t j = 0; j < 8 && i + j < b.size(); ++j) {
                b[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
            }
        }
        corpus.push_back(std::move(b));
        have += flow_bytes / word_size;
    }
    return calibrate_noise(corpus, params, std::min(words, have));
}

} // namespace dspas
