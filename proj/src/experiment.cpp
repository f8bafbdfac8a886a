#include "dspas/experiment.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "dspas/archive.hpp"
#include "dspas/error.hpp"
#include "dspas/query.hpp"
#include "dspas/theory.hpp"

namespace dspas {

namespace {

using Clock = std::chrono::steady_clock;

constexpr const char* kKindNames[] = {"q_sweep",   "fp_vs_excerpt", "transform_size_sweep", "wildcard_fp",
                                      "wildcard_fn", "timing",      "similar_string"};

template <typename T>
std::vector<T> or_default(const std::vector<T>& v, std::vector<T> fallback) {
    return v.empty() ? fallback : v;
}

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return format_number(static_cast<std::uint64_t>(v)); }

struct Outcome {
    bool detected = false;
    std::size_t false_positives = 0;
};

Outcome score(const std::vector<MatchResult>& results, const FlowPayload& truth) {
    Outcome o;
    for (const auto& r : results) {
        if (r.key == truth.key && r.first_seen == truth.first_seen) {
            o.detected = true;
        } else {
            ++o.false_positives;
        }
    }
    return o;
}

struct Tally {
    std::size_t queries = 0;
    std::size_t detected = 0;
    std::size_t false_positives = 0;

    void add(const Outcome& o) {
        ++queries;
        detected += o.detected ? 1 : 0;
        false_positives += o.false_positives;
    }
    double fp_rate(std::size_t flows) const {
        return queries == 0 ? 0.0 : static_cast<double>(false_positives) / static_cast<double>(queries * flows);
    }
    std::size_t missed() const { return queries - detected; }
    double fn_rate() const { return queries == 0 ? 0.0 : static_cast<double>(missed()) / static_cast<double>(queries); }
};

// Expected fraction of flows with at least one null exceedance when every
// alignment and shift is an independent trial at tail probability Q(K).
double binomial_flow_fp(const DigestArchive& archive, double k, std::size_t l_words, unsigned w,
                        std::size_t transform_size) {
    if (archive.flows.empty()) {
        return 0.0;
    }
    const double q = q_function(k);
    double sum = 0.0;
    for (const auto& rec : archive.flows) {
        const std::size_t chunks = std::max<std::size_t>(1, (rec.original_word_count + transform_size - 1) / transform_size);
        const std::size_t m = chunks * transform_size;
        if (m < l_words) {
            continue;
        }
        const double trials = static_cast<double>(w) * static_cast<double>(m - l_words + 1);
        sum += -std::expm1(trials * std::log1p(-q));
    }
    return sum / static_cast<double>(archive.flows.size());
}

SyntheticCorpusSpec corpus_with_plants(const ExperimentSpec& spec, std::vector<PlantSpec> plants) {
    SyntheticCorpusSpec c = spec.corpus;
    c.seed = combine64(spec.seed, c.seed);
    c.plants = std::move(plants);
    return c;
}

EngineOptions engine_options(const ExperimentSpec& spec) {
    EngineOptions o;
    o.noise = spec.noise;
    return o;
}

Query planted_query(const PlantedExcerpt& p) {
    Query q;
    q.excerpt = p.excerpt;
    q.mask = p.mask;
    return q;
}

ExperimentResult run_q_sweep(const ExperimentSpec& spec) {
    ExperimentResult out;
    out.table.header = experiment_columns(ExperimentKind::q_sweep);
    out.trace.header = {"q", "n", "correlation", "threshold"};
    const SyntheticCorpus corpus = generate_corpus(corpus_with_plants(spec, {PlantSpec{300}}));
    const CapturePeriod period = CapturePeriod::for_id(spec.corpus.period_id, spec.corpus.period_seconds);
    const PlantedExcerpt& plant = corpus.planted.front();
    for (unsigned q : or_default(spec.quant_bits, {3u, 4u, 5u})) {
        DigestParams params = spec.params;
        params.quant_bits = q;
        const DigestArchive archive = digest_corpus(corpus, params, period);
        const std::size_t archive_bytes = serialize(archive).size();
        const NoiseModel nm = calibrate_noise_synthetic(params, spec.calibration_words, combine64(spec.seed, q));
        const Ratio floor = data_reduction_ratio(params.preprocess.word_size, q);
        out.table.add_row({num(std::size_t{q}), num(floor.value()), num(corpus.total_bytes()), num(archive_bytes),
                           num(static_cast<double>(corpus.total_bytes()) / static_cast<double>(archive_bytes)),
                           num(nm.sigma_n_sq), num(nm.signal_variance), num(nm.signal_variance / nm.sigma_n_sq),
                           num(nm.mean), num(nm.lag1_autocorrelation), num(nm.samples)});

        // Correlation of the planted excerpt against its carrier at the matching alignment.
        const unsigned w = params.preprocess.word_size;
        const unsigned a = static_cast<unsigned>((w - plant.byte_offset % w) % w);
        const auto signals = preprocess_excerpt(plant.excerpt, plant.mask, params.preprocess);
        const std::vector<double> s(signals[a].words.begin(), signals[a].words.end());
        const FlowPayload& carrier = corpus.flows[plant.flow_index];
        const auto rec = reconstruct_flow_signal(digest_flow(carrier, params), params);
        const auto c = correlate(rec.samples, s);
        const Threshold th = compute_threshold(c, table_coefficient(plant.spec.length));
        for (std::size_t n = 0; n < c.size(); ++n) {
            out.trace.add_row({num(std::size_t{q}), num(n), num(c[n]), num(th.t)});
        }
    }
    return out;
}

ExperimentResult run_fp_vs_excerpt(const ExperimentSpec& spec) {
    const auto sizes = or_default(spec.excerpt_sizes, {300, 400, 500, 600});
    std::vector<PlantSpec> plants;
    for (std::size_t size : sizes) {
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            plants.push_back(PlantSpec{size});
        }
    }
    const SyntheticCorpus corpus = generate_corpus(corpus_with_plants(spec, plants));
    const CapturePeriod period = CapturePeriod::for_id(spec.corpus.period_id, spec.corpus.period_seconds);
    QueryEngine engine({digest_corpus(corpus, spec.params, period)}, engine_options(spec));

    ExperimentResult out;
    out.table.header = experiment_columns(ExperimentKind::fp_vs_excerpt);
    std::map<std::size_t, Tally> tallies;
    for (const auto& p : corpus.planted) {
        tallies[p.spec.length].add(score(engine.attribute(planted_query(p)), corpus.flows[p.flow_index]));
    }
    const std::size_t flows = corpus.flows.size();
    const unsigned w = spec.params.preprocess.word_size;
    for (std::size_t size : sizes) {
        const Tally& t = tallies[size];
        const double k = engine.threshold_coefficient(size);
        out.table.add_row({num(size), num(k), num(t.queries), num(flows), num(t.false_positives), num(t.fp_rate(flows)),
                           num(binomial_flow_fp(engine.archives().front(), k, size / w, w, spec.params.transform_size)),
                           num(t.missed()), num(t.fn_rate())});
    }
    return out;
}

ExperimentResult run_transform_size_sweep(const ExperimentSpec& spec) {
    const auto sizes = or_default(spec.excerpt_sizes, {300, 400, 500, 600});
    const auto transforms = or_default(spec.transform_sizes, {256, 512, 1024, 2048, 4096});
    std::vector<PlantSpec> plants;
    for (std::size_t size : sizes) {
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            plants.push_back(PlantSpec{size});
        }
    }
    const SyntheticCorpus corpus = generate_corpus(corpus_with_plants(spec, plants));
    const CapturePeriod period = CapturePeriod::for_id(spec.corpus.period_id, spec.corpus.period_seconds);

    ExperimentResult out;
    out.table.header = experiment_columns(ExperimentKind::transform_size_sweep);
    const std::size_t flows = corpus.flows.size();
    for (std::size_t l : transforms) {
        DigestParams params = spec.params;
        params.transform_size = l;
        QueryEngine engine({digest_corpus(corpus, params, period)}, engine_options(spec));
        std::map<std::size_t, Tally> tallies;
        for (const auto& p : corpus.planted) {
            tallies[p.spec.length].add(score(engine.attribute(planted_query(p)), corpus.flows[p.flow_index]));
        }
        for (std::size_t size : sizes) {
            const Tally& t = tallies[size];
            out.table.add_row({num(l), num(size), num(engine.threshold_coefficient(size)), num(t.queries),
                               num(t.false_positives), num(t.fp_rate(flows)), num(t.missed()), num(t.fn_rate())});
        }
    }
    return out;
}

ExperimentResult run_wildcard(const ExperimentSpec& spec, ExperimentKind kind) {
    const auto counts = or_default(spec.wildcard_counts, {0, 5, 10, 15, 20, 25, 30});
    const std::size_t length = spec.excerpt_sizes.empty() ? 300 : spec.excerpt_sizes.front();
    const SyntheticCorpus corpus =
        generate_corpus(corpus_with_plants(spec, std::vector<PlantSpec>(spec.repetitions, PlantSpec{length})));
    const CapturePeriod period = CapturePeriod::for_id(spec.corpus.period_id, spec.corpus.period_seconds);
    QueryEngine engine({digest_corpus(corpus, spec.params, period)}, engine_options(spec));

    ExperimentResult out;
    out.table.header = experiment_columns(kind);
    const std::size_t flows = corpus.flows.size();
    for (std::size_t count : counts) {
        Tally t;
        double zeroed = 0.0;
        engine.reset_stats();
        for (std::size_t i = 0; i < corpus.planted.size(); ++i) {
            const auto& p = corpus.planted[i];
            Query q;
            q.mask = random_mask(length, count, combine64(combine64(spec.seed, i), count));
            q.excerpt = p.truth;
            for (std::size_t pos : q.mask.positions()) {
                q.excerpt[pos] = 0;
            }
            const auto z = count_wildcard_words(q.excerpt, q.mask, spec.params.preprocess);
            const unsigned w = spec.params.preprocess.word_size;
            zeroed += static_cast<double>(z[(w - p.byte_offset % w) % w]);
            t.add(score(engine.attribute(q), corpus.flows[p.flow_index]));
        }
        const auto& st = engine.stats();
        const double queries = static_cast<double>(std::max<std::size_t>(t.queries, 1));
        out.table.add_row({num(count), num(length), num(t.queries), num(zeroed / queries), num(t.false_positives),
                           num(t.fp_rate(flows)), num(t.missed()), num(t.fn_rate()),
                           num(static_cast<double>(st.correlations) / queries),
                           num(static_cast<double>(st.multiply_adds) / queries)});
    }
    return out;
}

ExperimentResult run_timing(const ExperimentSpec& spec) {
    const auto counts = or_default(spec.wildcard_counts, {0, 2, 4, 6, 8});
    const std::size_t length = spec.excerpt_sizes.empty() ? 300 : spec.excerpt_sizes.front();
    const SyntheticCorpus corpus =
        generate_corpus(corpus_with_plants(spec, std::vector<PlantSpec>(spec.repetitions, PlantSpec{length})));
    const CapturePeriod period = CapturePeriod::for_id(spec.corpus.period_id, spec.corpus.period_seconds);

    ExperimentResult out;
    out.table.header = experiment_columns(ExperimentKind::timing);
    const auto t0 = Clock::now();
    DigestArchive archive = digest_corpus(corpus, spec.params, period);
    const double digest_s = std::chrono::duration<double>(Clock::now() - t0).count();
    out.table.add_row({"digest", "0", num(corpus.flows.size()), num(digest_s),
                       num(digest_s / static_cast<double>(std::max<std::size_t>(corpus.flows.size(), 1))), "0"});

    QueryEngine engine({std::move(archive)}, engine_options(spec));
    if (!corpus.planted.empty()) {
        engine.attribute(planted_query(corpus.planted.front())); // fill the reconstruction cache
    }
    for (std::size_t count : counts) {
        engine.reset_stats();
        const auto start = Clock::now();
        for (std::size_t i = 0; i < corpus.planted.size(); ++i) {
            const auto& p = corpus.planted[i];
            Query q;
            q.mask = random_mask(length, count, combine64(combine64(spec.seed, i), count));
            q.excerpt = p.truth;
            for (std::size_t pos : q.mask.positions()) {
                q.excerpt[pos] = 0;
            }
            engine.attribute(q);
        }
        const double s = std::chrono::duration<double>(Clock::now() - start).count();
        const double n = static_cast<double>(std::max<std::size_t>(corpus.planted.size(), 1));
        out.table.add_row({"query", num(count), num(corpus.planted.size()), num(s), num(s / n),
                           num(static_cast<double>(engine.stats().multiply_adds) / n)});
    }
    return out;
}

ExperimentResult run_similar_string(const ExperimentSpec& spec) {
    const auto spacings = or_default(spec.spacings, {0, 400, 200, 100, 50});
    const std::size_t length = spec.excerpt_sizes.empty() ? 600 : spec.excerpt_sizes.front();
    std::vector<PlantSpec> plants;
    for (std::size_t spacing : spacings) {
        for (std::size_t r = 0; r < spec.repetitions; ++r) {
            plants.push_back(PlantSpec{length, 0, spacing, 0});
        }
    }
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
        plants.push_back(PlantSpec{length, 0, 0, 200});
    }
    const SyntheticCorpus corpus = generate_corpus(corpus_with_plants(spec, plants));
    const CapturePeriod period = CapturePeriod::for_id(spec.corpus.period_id, spec.corpus.period_seconds);
    QueryEngine engine({digest_corpus(corpus, spec.params, period)}, engine_options(spec));

    ExperimentResult out;
    out.table.header = experiment_columns(ExperimentKind::similar_string);
    std::map<std::pair<int, std::size_t>, std::pair<Tally, double>> cells;
    for (const auto& p : corpus.planted) {
        const bool insert = p.spec.insertion_spacing > 0;
        auto& cell = cells[{insert ? 1 : 0, insert ? p.spec.insertion_spacing : p.spec.corruption_spacing}];
        cell.first.add(score(engine.find_similar(planted_query(p), spec.mismatch_budget), corpus.flows[p.flow_index]));
        cell.second += static_cast<double>(p.corrupted_bytes);
    }
    const std::size_t flows = corpus.flows.size();
    auto emit = [&](int insert, std::size_t spacing) {
        const auto& [t, corrupted] = cells[{insert, spacing}];
        const double n = static_cast<double>(std::max<std::size_t>(t.queries, 1));
        out.table.add_row({insert ? "insert" : "substitute", num(spacing), num(length), num(corrupted / n),
                           num(t.queries), num(t.detected), num(static_cast<double>(t.detected) / n),
                           num(t.fp_rate(flows))});
    };
    for (std::size_t spacing : spacings) {
        emit(0, spacing);
    }
    emit(1, 200);
    return out;
}

} // namespace

const char* to_string(ExperimentKind kind) noexcept {
    return kKindNames[static_cast<std::size_t>(kind)];
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
        if (name == kKindNames[i]) {
            return static_cast<ExperimentKind>(i);
        }
    }
    throw InputError("unknown experiment '" + name + "'");
}

void ExperimentSpec::validate() const {
    params.validate();
    if (repetitions < 1) {
        throw ContractViolation("repetitions must be at least 1");
    }
    if (corpus.flow_count < 1) {
        throw ContractViolation("corpus needs at least one flow");
    }
    if (!(mismatch_budget >= 0.0 && mismatch_budget <= 0.2)) {
        throw ContractViolation("mismatch budget must lie in [0, 0.2]");
    }
}

std::vector<std::string> experiment_columns(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::q_sweep:
        return {"q", "reduction_floor", "input_bytes", "archive_bytes", "achieved_ratio", "sigma_n_sq",
                "signal_variance", "snr", "noise_mean", "noise_lag1", "noise_samples"};
    case ExperimentKind::fp_vs_excerpt:
        return {"excerpt_bytes", "k", "queries", "flows", "false_positives", "fp_rate", "fp_model",
                "false_negatives", "fn_rate"};
    case ExperimentKind::transform_size_sweep:
        return {"transform_size", "excerpt_bytes", "k", "queries", "false_positives", "fp_rate", "false_negatives",
                "fn_rate"};
    case ExperimentKind::wildcard_fp:
    case ExperimentKind::wildcard_fn:
        return {"wildcards", "excerpt_bytes", "queries", "zeroed_words_mean", "false_positives", "fp_rate",
                "false_negatives", "fn_rate", "correlations_per_query", "multiply_adds_per_query"};
    case ExperimentKind::timing:
        return {"stage", "wildcards", "items", "seconds", "seconds_per_item", "multiply_adds_per_item"};
    case ExperimentKind::similar_string:
        return {"mode", "spacing", "excerpt_bytes", "altered_bytes_mean", "queries", "detected", "detection_rate",
                "fp_rate"};
    }
    return {};
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    switch (spec.kind) {
    case ExperimentKind::q_sweep: return run_q_sweep(spec);
    case ExperimentKind::fp_vs_excerpt: return run_fp_vs_excerpt(spec);
    case ExperimentKind::transform_size_sweep: return run_transform_size_sweep(spec);
    case ExperimentKind::wildcard_fp:
    case ExperimentKind::wildcard_fn: return run_wildcard(spec, spec.kind);
    case ExperimentKind::timing: return run_timing(spec);
    case ExperimentKind::similar_string: return run_similar_string(spec);
    }
    throw ContractViolation("unknown experiment kind");
}

} // namespace dspas
