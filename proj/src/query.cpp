#include "dspas/query.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <string>

#include "dspas/error.hpp"

namespace dspas {

namespace {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

// r2c/c2r plans keyed by size; planning is serialised, execution is not.
class FftPlans {
public:
    static FftPlans& instance() {
        static FftPlans plans;
        return plans;
    }

    std::pair<fftw_plan, fftw_plan> get(std::size_t n) {
        std::lock_guard lock(mutex_);
        auto& slot = plans_[n];
        if (slot.first == nullptr) {
            std::vector<double> real(n);
            std::vector<fftw_complex> spec(n / 2 + 1);
            slot.first = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(), spec.data(),
                                              FFTW_ESTIMATE | FFTW_UNALIGNED);
            slot.second = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.data(), real.data(),
                                               FFTW_ESTIMATE | FFTW_UNALIGNED);
            if (slot.first == nullptr || slot.second == nullptr) {
                throw Error("FFTW could not plan a correlation of size " + std::to_string(n));
            }
        }
        return slot;
    }

    ~FftPlans() {
        for (auto& [n, p] : plans_) {
            fftw_destroy_plan(p.first);
            fftw_destroy_plan(p.second);
        }
    }

private:
    std::mutex mutex_;
    std::map<std::size_t, std::pair<fftw_plan, fftw_plan>> plans_;
};

std::vector<double> correlate_direct(std::span<const double> p, std::span<const double> s) {
    const std::size_t out = p.size() - s.size() + 1;
    std::vector<double> c(out, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double si = s[i];
        const double* pi = p.data() + i;
        for (std::size_t n = 0; n < out; ++n) {
            c[n] += pi[n] * si;
        }
    }
    return c;
}

// Spectrum of P, reusable across every alignment of one flow.
class SpectrumCorrelator {
public:
    explicit SpectrumCorrelator(std::span<const double> p) : m_(p.size()), n_(next_pow2(p.size())) {
        std::tie(forward_, inverse_) = FftPlans::instance().get(n_);
        std::vector<double> buf(n_, 0.0);
        std::copy(p.begin(), p.end(), buf.begin());
        spectrum_.resize(n_ / 2 + 1);
        fftw_execute_dft_r2c(forward_, buf.data(), reinterpret_cast<fftw_complex*>(spectrum_.data()));
    }

    std::vector<double> correlate(std::span<const double> s) const {
        std::vector<double> buf(n_, 0.0);
        std::copy(s.begin(), s.end(), buf.begin());
        std::vector<std::complex<double>> spec(n_ / 2 + 1);
        fftw_execute_dft_r2c(forward_, buf.data(), reinterpret_cast<fftw_complex*>(spec.data()));
        for (std::size_t k = 0; k < spec.size(); ++k) {
            spec[k] = spectrum_[k] * std::conj(spec[k]);
        }
        fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(spec.data()), buf.data());
        const double scale = 1.0 / static_cast<double>(n_);
        std::vector<double> c(m_ - s.size() + 1);
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] = buf[i] * scale;
        }
        return c;
    }

private:
    std::size_t m_;
    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
    std::vector<std::complex<double>> spectrum_;
};

bool prefer_fft(std::size_t m, std::size_t l) {
    const double n = static_cast<double>(next_pow2(m));
    return static_cast<double>(l) * static_cast<double>(m - l + 1) > 6.0 * n * std::log2(std::max(n, 2.0));
}

} // namespace

std::vector<double> correlate(std::span<const double> p, std::span<const double> s, CorrelationMethod method) {
    if (s.empty() || s.size() > p.size()) {
        return {};
    }
    if (method == CorrelationMethod::automatic) {
        method = prefer_fft(p.size(), s.size()) ? CorrelationMethod::fft : CorrelationMethod::direct;
    }
    if (method == CorrelationMethod::direct) {
        return correlate_direct(p, s);
    }
    return SpectrumCorrelator(p).correlate(s);
}

Threshold compute_threshold(std::span<const double> c, double k) {
    if (c.size() < 2) {
        throw ContractViolation("threshold needs a correlation signal of at least 2 points");
    }
    double mean = 0.0;
    for (double v : c) {
        mean += v;
    }
    mean /= static_cast<double>(c.size());
    double ss = 0.0;
    for (double v : c) {
        ss += (v - mean) * (v - mean);
    }
    Threshold t;
    t.k = k;
    t.sigma_c = std::sqrt(ss / static_cast<double>(c.size() - 1));
    if (!(t.sigma_c > 0.0)) {
        throw NoSignalError("correlation signal is constant");
    }
    t.t = k * t.sigma_c;
    return t;
}

std::vector<std::size_t> detect_peaks(std::span<const double> c, const Threshold& threshold, std::size_t pad_start,
                                      std::size_t merge_radius) {
    std::vector<std::size_t> peaks;
    std::size_t best = 0;
    std::size_t last = 0;
    bool open = false;
    auto flush = [&] {
        if (open && best < pad_start) {
            peaks.push_back(best);
        }
    };
    for (std::size_t n = 0; n < c.size(); ++n) {
        if (!(c[n] > threshold.t)) {
            continue;
        }
        if (open && n - last <= merge_radius) {
            if (c[n] > c[best]) {
                best = n;
            }
        } else {
            flush();
            open = true;
            best = n;
        }
        last = n;
    }
    flush();
    return peaks;
}

const NoiseModel& default_noise_model(const DigestParams& params) {
    static std::mutex mutex;
    static std::map<std::tuple<unsigned, std::size_t, unsigned, std::uint64_t, std::size_t, int>, NoiseModel> cache;
    std::lock_guard lock(mutex);
    const auto key = std::make_tuple(params.preprocess.word_size, params.transform_size, params.quant_bits,
                                     params.preprocess.hash_seed, params.preprocess.run_threshold,
                                     static_cast<int>(params.codec));
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, calibrate_noise_synthetic(params, std::size_t{1} << 20, 0x6e6f697365ULL)).first;
    }
    return it->second;
}

QueryEngine::QueryEngine(std::vector<DigestArchive> archives, EngineOptions options)
    : archives_(std::move(archives)), options_(std::move(options)) {
    require_consistent(archives_);
    if (!archives_.empty()) {
        params_ = archives_.front().header.params;
    }
}

const NoiseModel& QueryEngine::noise_model() {
    if (!options_.noise) {
        options_.noise = default_noise_model(params_);
    }
    return *options_.noise;
}

double QueryEngine::threshold_coefficient(std::size_t l_bytes) {
    if (l_bytes >= kTableLengths[0] && l_bytes <= kTableLengths[std::size(kTableLengths) - 1]) {
        return table_coefficient(l_bytes);
    }
    const SystemParams sp = SystemParams::for_excerpt(params_, l_bytes);
    return select_threshold_coefficient(l_bytes, sp, noise_model(), options_.targets).k;
}

const ReconstructedSignal& QueryEngine::signal(std::size_t archive, std::size_t flow, ReconstructedSignal& scratch) {
    if (options_.cache_reconstructions) {
        auto it = cache_.find({archive, flow});
        if (it != cache_.end()) {
            return it->second;
        }
    }
    ++stats_.reconstructions;
    auto rec = reconstruct_flow_signal(archives_[archive].digest(flow), params_);
    if (options_.cache_reconstructions) {
        return cache_.emplace(std::make_pair(archive, flow), std::move(rec)).first->second;
    }
    scratch = std::move(rec);
    return scratch;
}

std::vector<MatchResult> QueryEngine::run(const Query& query, double k) {
    ++stats_.queries;
    std::vector<MatchResult> results;
    if (archives_.empty()) {
        return results;
    }
    const unsigned w = params_.preprocess.word_size;
    PreprocessConfig cfg = params_.preprocess;
    const auto words = preprocess_excerpt(query.excerpt, query.mask, cfg);
    std::vector<std::vector<double>> excerpt(words.size());
    for (std::size_t a = 0; a < words.size(); ++a) {
        excerpt[a].assign(words[a].words.begin(), words[a].words.end());
    }

    ReconstructedSignal scratch;
    for (std::size_t ai = 0; ai < archives_.size(); ++ai) {
        const auto& archive = archives_[ai];
        if (!query.period_range.contains(archive.header.period_id)) {
            continue;
        }
        for (std::size_t fi = 0; fi < archive.flows.size(); ++fi) {
            ++stats_.flows_scanned;
            const auto& p = signal(ai, fi, scratch);
            std::optional<SpectrumCorrelator> spectrum;
            std::optional<MatchResult> best;
            bool any = false;
            for (std::size_t a = 0; a < excerpt.size(); ++a) {
                const auto& s = excerpt[a];
                const std::size_t m = p.samples.size();
                if (s.empty() || s.size() > m) {
                    continue;
                }
                any = true;
                ++stats_.correlations;
                stats_.multiply_adds += static_cast<std::uint64_t>(s.size()) * (m - s.size() + 1);
                CorrelationMethod method = options_.method;
                if (method == CorrelationMethod::automatic) {
                    method = prefer_fft(m, s.size()) ? CorrelationMethod::fft : CorrelationMethod::direct;
                }
                std::vector<double> c;
                if (method == CorrelationMethod::fft) {
                    if (!spectrum) {
                        spectrum.emplace(p.samples);
                    }
                    c = spectrum->correlate(s);
                } else {
                    c = correlate_direct(p.samples, s);
                }
                if (c.size() < 2) {
                    continue;
                }
                Threshold th;
                try {
                    th = compute_threshold(c, k);
                } catch (const NoSignalError&) {
                    ++stats_.flows_no_signal;
                    continue;
                }
                ++stats_.thresholds;
                const unsigned dropped = words[a].alignment_offset;
                for (std::size_t n : detect_peaks(c, th, p.valid_words, w)) {
                    if (dropped > 0 && n == 0) {
                        continue; // would place the excerpt before the flow start
                    }
                    MatchResult r;
                    r.key = archive.flows[fi].key;
                    r.period_id = archive.header.period_id;
                    r.first_seen = archive.flows[fi].first_seen;
                    r.peak_position = n - (dropped > 0 ? 1 : 0);
                    r.alignment_offset = (w - dropped) % w;
                    r.peak_value = c[n];
                    r.threshold = th;
                    r.estimated_byte_offset = static_cast<std::uint64_t>(r.peak_position) * w + r.alignment_offset;
                    if (!best || r.ratio() > best->ratio()) {
                        best = r;
                    }
                }
            }
            if (!any) {
                ++stats_.flows_skipped_short;
            }
            if (best) {
                results.push_back(*best);
            }
        }
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const MatchResult& a, const MatchResult& b) { return a.ratio() > b.ratio(); });
    return results;
}

namespace {

void require_excerpt_length(const Query& query, const DigestParams& params) {
    const std::size_t min_len = 2 * static_cast<std::size_t>(params.preprocess.word_size);
    if (query.excerpt.size() < min_len) {
        throw QueryTooShortError("excerpt of " + std::to_string(query.excerpt.size()) +
                                 " bytes is shorter than 2W = " + std::to_string(min_len));
    }
}

} // namespace

std::vector<MatchResult> QueryEngine::attribute(const Query& query) {
    require_excerpt_length(query, params_);
    const double k = query.threshold_override ? *query.threshold_override : threshold_coefficient(query.excerpt.size());
    return run(query, k);
}

std::vector<MatchResult> QueryEngine::find_similar(const Query& query, double mismatch_budget) {
    require_excerpt_length(query, params_);
    const double base =
        query.threshold_override ? *query.threshold_override : threshold_coefficient(query.excerpt.size());
    return run(query, similarity_adjusted_coefficient(base, mismatch_budget));
}

std::vector<MatchResult> attribute_excerpt(const Query& query, const std::vector<DigestArchive>& archives,
                                           EngineOptions options) {
    QueryEngine engine(archives, std::move(options));
    return engine.attribute(query);
}

std::vector<MatchResult> find_similar(const Query& query, const std::vector<DigestArchive>& archives,
                                      double mismatch_budget, EngineOptions options) {
    QueryEngine engine(archives, std::move(options));
    return engine.find_similar(query, mismatch_budget);
}

} // namespace dspas
