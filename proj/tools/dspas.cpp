// dspas: digest captures, query archives, print theory tables, run experiments.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "dspas/archive.hpp"
#include "dspas/corpus.hpp"
#include "dspas/csv.hpp"
#include "dspas/error.hpp"
#include "dspas/experiment.hpp"
#include "dspas/query.hpp"
#include "dspas/reassembly.hpp"
#include "dspas/theory.hpp"

namespace fs = std::filesystem;
using namespace dspas;

namespace {

struct CommonOptions {
    unsigned word_size = 8;
    std::size_t transform_size = 1024;
    unsigned quant_bits = 4;
    std::uint64_t hash_seed = kDefaultHashSeed;
    std::size_t run_threshold = 64;
    int codec = 1;
    std::uint64_t seed = 1;

    DigestParams params() const {
        DigestParams p;
        p.preprocess.word_size = word_size;
        p.preprocess.run_threshold = run_threshold;
        p.preprocess.hash_seed = hash_seed;
        p.transform_size = transform_size;
        p.quant_bits = quant_bits;
        p.codec = static_cast<CodecId>(codec);
        p.validate();
        return p;
    }
};

struct DigestOptions {
    std::string capture;
    std::size_t synthetic_flows = 0;
    std::size_t min_bytes = 10 * 1024;
    std::size_t max_bytes = 500 * 1024;
    std::uint64_t period_seconds = 3600;
    std::uint64_t idle_timeout = 300;
    std::string out = ".";
    std::string export_payloads;
};

struct QueryOptions {
    std::vector<std::string> archives;
    std::string excerpt_file;
    std::size_t excerpt_offset = 0;
    std::optional<std::size_t> excerpt_length;
    std::string pattern;
    std::string mask_file;
    std::optional<double> k;
    bool similar = false;
    double budget = 0.05;
    std::uint64_t period_first = 0;
    std::uint64_t period_last = UINT64_MAX;
    bool byte_wildcards = false;
    std::string out;
};

struct TheoryOptions {
    std::string table = "grid";
    double k_min = 3.0;
    double k_max = 6.0;
    double k_step = 0.2;
    std::vector<std::size_t> l_bytes = {100, 200, 300, 400, 500, 600, 800, 1000};
    std::optional<double> sigma_n_sq;
    double fp_max = 1e-3;
    double fn_max = 1e-6;
    std::string out;
};

struct EvalOptions {
    std::string experiment = "fp_vs_excerpt";
    std::size_t repetitions = 20;
    std::size_t flows = 200;
    std::size_t min_bytes = 10 * 1024;
    std::size_t max_bytes = 40 * 1024;
    std::string out;
    std::string trace_out;
};

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

WildcardMask read_mask_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open mask file " + path);
    }
    std::vector<std::size_t> positions;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const auto last = line.find_last_not_of(" \t\r");
        const std::string field = line.substr(first, last - first + 1);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(field, &used, 10);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != field.size() || field[0] == '-') {
            throw InputError("mask file " + path + " line " + std::to_string(lineno) + ": '" + field +
                             "' is not a byte offset");
        }
        positions.push_back(static_cast<std::size_t>(v));
    }
    return WildcardMask(std::move(positions));
}

void write_table(const std::string& path, const CsvTable& table) {
    if (path.empty() || path == "-") {
        write_csv(std::cout, table);
    } else {
        write_csv(path, table);
    }
}

std::string archive_path(const std::string& dir, std::uint64_t period_id) {
    return (fs::path(dir) / ("period-" + std::to_string(period_id) + ".dspas")).string();
}

int cmd_digest(const CommonOptions& common, const DigestOptions& opt) {
    const DigestParams params = common.params();
    fs::create_directories(opt.out);
    PeriodBuckets buckets;
    if (!opt.capture.empty()) {
        IngestConfig cfg;
        cfg.period_seconds = opt.period_seconds;
        cfg.idle_timeout_seconds = opt.idle_timeout;
        IngestStats stats;
        buckets = ingest_capture(opt.capture, cfg, stats);
        std::cerr << "packets=" << stats.packets << " emitted=" << stats.emitted
                  << " dropped_non_transport=" << stats.non_transport_dropped
                  << " truncated=" << stats.truncated_skipped << "\n";
    } else if (opt.synthetic_flows > 0) {
        SyntheticCorpusSpec spec;
        spec.flow_count = opt.synthetic_flows;
        spec.min_bytes = opt.min_bytes;
        spec.max_bytes = opt.max_bytes;
        spec.seed = common.seed;
        spec.period_seconds = opt.period_seconds;
        buckets[0] = generate_corpus(spec).flows;
    } else {
        throw InputError("digest needs --capture or --synthetic-flows");
    }
    if (buckets.empty()) {
        buckets[0];
    }
    if (!opt.export_payloads.empty()) {
        fs::create_directories(opt.export_payloads);
        for (const auto& [period_id, flows] : buckets) {
            for (std::size_t i = 0; i < flows.size(); ++i) {
                const auto path = fs::path(opt.export_payloads) /
                                  ("period-" + std::to_string(period_id) + "-flow-" + std::to_string(i) + ".bin");
                std::ofstream(path, std::ios::binary)
                    .write(reinterpret_cast<const char*>(flows[i].bytes.data()),
                           static_cast<std::streamsize>(flows[i].bytes.size()));
            }
        }
    }
    std::uint64_t total_in = 0;
    std::uint64_t total_out = 0;
    for (auto& [period_id, flows] : buckets) {
        std::uint64_t in_bytes = 0;
        std::vector<FlowDigest> digests;
        digests.reserve(flows.size());
        for (const auto& f : flows) {
            in_bytes += f.bytes.size();
            digests.push_back(digest_flow(f, params));
        }
        const std::string path = archive_path(opt.out, period_id);
        write_archive(path, CapturePeriod::for_id(period_id, opt.period_seconds), std::move(digests), params);
        const auto out_bytes = static_cast<std::uint64_t>(fs::file_size(path));
        total_in += in_bytes;
        total_out += out_bytes;
        std::cout << path << ": flows=" << flows.size() << " input_bytes=" << in_bytes
                  << " archive_bytes=" << out_bytes << " ratio="
                  << format_number(out_bytes ? static_cast<double>(in_bytes) / static_cast<double>(out_bytes) : 0.0)
                  << "\n";
    }
    std::cout << "total: periods=" << buckets.size() << " input_bytes=" << total_in << " archive_bytes=" << total_out
              << " ratio="
              << format_number(total_out ? static_cast<double>(total_in) / static_cast<double>(total_out) : 0.0)
              << " floor=" << format_number(data_reduction_ratio(params.preprocess.word_size, params.quant_bits).value())
              << "\n";
    return 0;
}

int cmd_query(const QueryOptions& opt) {
    if (opt.archives.empty()) {
        throw InputError("query needs at least one --archive");
    }
    std::vector<DigestArchive> archives;
    for (const auto& path : opt.archives) {
        archives.push_back(read_archive(path));
    }
    if (opt.byte_wildcards) {
        for (auto& a : archives) {
            a.header.params.preprocess.wildcard_mode = WildcardMode::byte_zero;
        }
    }
    Query q;
    if (!opt.pattern.empty()) {
        q.mask = WildcardMask::from_pattern(opt.pattern, q.excerpt);
    } else if (!opt.excerpt_file.empty()) {
        q.excerpt = read_file(opt.excerpt_file);
        const std::size_t len = opt.excerpt_length.value_or(q.excerpt.size() - std::min(opt.excerpt_offset, q.excerpt.size()));
        if (opt.excerpt_offset + len > q.excerpt.size()) {
            throw InputError("excerpt slice [" + std::to_string(opt.excerpt_offset) + ", " +
                             std::to_string(opt.excerpt_offset + len) + ") is outside " + opt.excerpt_file);
        }
        q.excerpt = Bytes(q.excerpt.begin() + static_cast<std::ptrdiff_t>(opt.excerpt_offset),
                          q.excerpt.begin() + static_cast<std::ptrdiff_t>(opt.excerpt_offset + len));
    } else {
        throw InputError("query needs --excerpt or --pattern");
    }
    if (!opt.mask_file.empty()) {
        std::vector<std::size_t> positions = read_mask_file(opt.mask_file).positions();
        positions.insert(positions.end(), q.mask.positions().begin(), q.mask.positions().end());
        q.mask = WildcardMask(std::move(positions));
        for (std::size_t pos : q.mask.positions()) {
            if (pos >= q.excerpt.size()) {
                throw InputError("mask offset " + std::to_string(pos) + " is outside the " +
                                 std::to_string(q.excerpt.size()) + "-byte excerpt");
            }
        }
    }
    q.period_range = {opt.period_first, opt.period_last};
    q.threshold_override = opt.k;

    QueryEngine engine(std::move(archives));
    const auto results = opt.similar ? engine.find_similar(q, opt.budget) : engine.attribute(q);

    CsvTable table;
    table.header = {"src_addr", "dst_addr", "src_port", "dst_port", "protocol", "period_id", "first_seen_ns",
                    "byte_offset", "alignment", "peak", "threshold", "k", "ratio"};
    for (const auto& r : results) {
        table.add_row({r.key.src_addr.to_string(), r.key.dst_addr.to_string(), std::to_string(r.key.src_port),
                       std::to_string(r.key.dst_port), to_string(r.key.protocol), std::to_string(r.period_id),
                       std::to_string(r.first_seen), std::to_string(r.estimated_byte_offset),
                       std::to_string(r.alignment_offset), format_number(r.peak_value), format_number(r.threshold.t),
                       format_number(r.threshold.k), format_number(r.ratio())});
    }
    std::ostream& report = opt.out.empty() || opt.out == "-" ? std::cerr : std::cout;
    write_table(opt.out, table);
    report << "excerpt_bytes=" << q.excerpt.size() << " wildcards=" << q.mask.size()
           << " flows_scanned=" << engine.stats().flows_scanned << " matches=" << results.size() << "\n";
    for (const auto& r : results) {
        report << "  " << r.key.to_string() << " period " << r.period_id << " offset " << r.estimated_byte_offset
               << " peak/threshold " << format_number(r.ratio()) << "\n";
    }
    return results.empty() ? 1 : 0;
}

int cmd_theory(const CommonOptions& common, const TheoryOptions& opt) {
    const DigestParams params = common.params();
    NoiseModel nm;
    if (opt.sigma_n_sq) {
        nm.sigma_n_sq = *opt.sigma_n_sq;
        nm.source = NoiseSource::table;
    } else {
        nm = default_noise_model(params);
    }
    const ErrorTargets targets{opt.fp_max, opt.fn_max};
    CsvTable table;
    if (opt.table == "grid") {
        if (!(opt.k_step > 0.0) || opt.k_max < opt.k_min) {
            throw InputError("theory grid needs k-min <= k-max and k-step > 0");
        }
        table.header = {"k", "l_bytes", "l_words", "transform_size", "sigma_n_sq", "fp", "fn"};
        const auto steps = static_cast<std::size_t>(std::floor((opt.k_max - opt.k_min) / opt.k_step + 1e-9));
        for (std::size_t l : opt.l_bytes) {
            const SystemParams sp = SystemParams::for_excerpt(params, l);
            if (sp.excerpt_words < 1 || sp.excerpt_words > sp.transform_size) {
                continue;
            }
            for (std::size_t i = 0; i <= steps; ++i) {
                const double k = opt.k_min + static_cast<double>(i) * opt.k_step;
                table.add_row({format_number(k), std::to_string(l), std::to_string(sp.excerpt_words),
                               std::to_string(sp.transform_size), format_number(nm.sigma_n_sq),
                               format_number(fp_probability(k, sp.transform_size, sp.excerpt_words)),
                               format_number(fn_probability(k, sp, nm))});
            }
        }
    } else if (opt.table == "select") {
        table.header = {"l_bytes", "l_words", "selected_k", "source", "feasible", "fp", "fn", "solver_k",
                        "solver_feasible"};
        for (std::size_t l : opt.l_bytes) {
            const SystemParams sp = SystemParams::for_excerpt(params, l);
            if (sp.excerpt_words < 1) {
                continue;
            }
            const auto sel = select_threshold_coefficient(l, sp, nm, targets);
            const auto solved = solve_threshold_coefficient(sp, nm, targets);
            table.add_row({std::to_string(l), std::to_string(sp.excerpt_words), format_number(sel.k),
                           sel.from_table ? "table" : "solver", sel.feasible ? "1" : "0", format_number(sel.fp),
                           format_number(sel.fn), format_number(solved.k), solved.feasible ? "1" : "0"});
        }
    } else {
        throw InputError("unknown theory table '" + opt.table + "' (grid or select)");
    }
    write_table(opt.out, table);
    return 0;
}

int cmd_eval(const CommonOptions& common, const EvalOptions& opt) {
    ExperimentSpec spec;
    spec.kind = parse_experiment_kind(opt.experiment);
    spec.params = common.params();
    spec.seed = common.seed;
    spec.repetitions = opt.repetitions;
    spec.corpus.flow_count = opt.flows;
    spec.corpus.min_bytes = opt.min_bytes;
    spec.corpus.max_bytes = opt.max_bytes;
    const ExperimentResult result = run_experiment(spec);
    write_table(opt.out, result.table);
    if (!opt.trace_out.empty() && !result.trace.header.empty()) {
        write_csv(opt.trace_out, result.trace);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transform-coded payload digests and excerpt attribution"};
    app.set_config("--params", "", "Key=value file mirroring the command-line flags");
    app.require_subcommand(1);
    app.fallthrough();

    CommonOptions common;
    app.add_option("--word-size", common.word_size, "W, bytes per hashed word")->capture_default_str();
    app.add_option("--transform-size", common.transform_size, "L, words per DCT chunk")->capture_default_str();
    app.add_option("--quant-bits", common.quant_bits, "q, bits kept per coefficient")->capture_default_str();
    app.add_option("--hash-seed", common.hash_seed, "Keyed hash seed")->capture_default_str();
    app.add_option("--run-threshold", common.run_threshold, "R, repeated-byte run cap")->capture_default_str();
    app.add_option("--codec", common.codec, "0 = zero-run only, 1 = zero-run + LZMA")->capture_default_str();
    app.add_option("--seed", common.seed, "Root seed for synthetic data")->capture_default_str();

    DigestOptions dopt;
    auto* digest = app.add_subcommand("digest", "Digest a capture or a synthetic corpus into period archives");
    digest->add_option("--capture", dopt.capture, "pcap file");
    digest->add_option("--synthetic-flows", dopt.synthetic_flows, "Generate this many high-entropy flows instead");
    digest->add_option("--min-bytes", dopt.min_bytes)->capture_default_str();
    digest->add_option("--max-bytes", dopt.max_bytes)->capture_default_str();
    digest->add_option("--period-seconds", dopt.period_seconds)->capture_default_str();
    digest->add_option("--idle-timeout", dopt.idle_timeout, "Seconds of silence that close a flow")
        ->capture_default_str();
    digest->add_option("--out", dopt.out, "Output directory")->capture_default_str();
    digest->add_option("--export-payloads", dopt.export_payloads, "Also write each reassembled payload here");

    QueryOptions qopt;
    auto* query = app.add_subcommand("query", "Attribute an excerpt to archived flows");
    query->add_option("--archive", qopt.archives, "Archive file (repeatable)")->required();
    query->add_option("--excerpt", qopt.excerpt_file, "Raw excerpt file");
    query->add_option("--excerpt-offset", qopt.excerpt_offset, "Start of the excerpt inside the file");
    query->add_option("--excerpt-length", qopt.excerpt_length, "Excerpt length (default: to end of file)");
    query->add_option("--pattern", qopt.pattern, "Text excerpt; '?' marks an unknown byte");
    query->add_option("--mask", qopt.mask_file, "Unknown byte offsets, one per line");
    query->add_option("--k", qopt.k, "Threshold coefficient override");
    query->add_flag("--similar", qopt.similar, "Tolerate corrupted words");
    query->add_option("--budget", qopt.budget, "Assumed corrupted-word fraction for --similar")->capture_default_str();
    query->add_option("--period-first", qopt.period_first);
    query->add_option("--period-last", qopt.period_last);
    query->add_flag("--byte-wildcards", qopt.byte_wildcards, "Zero wildcard bytes before hashing");
    query->add_option("--out", qopt.out, "CSV path (default stdout)");

    TheoryOptions topt;
    auto* theory = app.add_subcommand("theory", "Print false positive / false negative tables");
    theory->add_option("--table", topt.table, "grid or select")->capture_default_str();
    theory->add_option("--k-min", topt.k_min)->capture_default_str();
    theory->add_option("--k-max", topt.k_max)->capture_default_str();
    theory->add_option("--k-step", topt.k_step)->capture_default_str();
    theory->add_option("--l-bytes", topt.l_bytes, "Excerpt sizes in bytes")->delimiter(',');
    theory->add_option("--sigma-n-sq", topt.sigma_n_sq, "Noise variance (default: synthetic calibration)");
    theory->add_option("--fp-max", topt.fp_max)->capture_default_str();
    theory->add_option("--fn-max", topt.fn_max)->capture_default_str();
    theory->add_option("--out", topt.out, "CSV path (default stdout)");

    EvalOptions eopt;
    auto* eval = app.add_subcommand("eval", "Run one experiment on a synthetic corpus");
    eval->add_option("--experiment", eopt.experiment,
                     "q_sweep, fp_vs_excerpt, transform_size_sweep, wildcard_fp, wildcard_fn, timing, similar_string")
        ->capture_default_str();
    eval->add_option("--repetitions", eopt.repetitions)->capture_default_str();
    eval->add_option("--flows", eopt.flows)->capture_default_str();
    eval->add_option("--min-bytes", eopt.min_bytes)->capture_default_str();
    eval->add_option("--max-bytes", eopt.max_bytes)->capture_default_str();
    eval->add_option("--out", eopt.out, "CSV path (default stdout)");
    eval->add_option("--trace-out", eopt.trace_out, "q_sweep correlation trace CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*digest) {
            return cmd_digest(common, dopt);
        }
        if (*query) {
            return cmd_query(qopt);
        }
        if (*theory) {
            return cmd_theory(common, topt);
        }
        return cmd_eval(common, eopt);
    } catch (const IntegrityError& e) {
        std::cerr << "error: integrity (" << to_string(e.kind()) << "): " << e.what() << "\n";
    } catch (const ParameterMismatchError& e) {
        std::cerr << "error: parameter mismatch: " << e.what() << "\n";
    } catch (const InputError& e) {
        std::cerr << "error: input: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 2;
}
