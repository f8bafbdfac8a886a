#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dspas/archive.hpp"
#include "dspas/corpus.hpp"
#include "dspas/error.hpp"
#include "dspas/experiment.hpp"
#include "dspas/query.hpp"
#include "dspas/theory.hpp"
#include "dspas/transform.hpp"

namespace py = pybind11;
using namespace dspas;

namespace {

Bytes to_bytes(const py::bytes& b) {
    const std::string s = b;
    return Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const Bytes& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return std::vector<double>(a.data(), a.data() + a.size());
}

py::array_t<double> to_array(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

DigestParams make_params(unsigned word_size, std::size_t transform_size, unsigned quant_bits,
                         std::uint64_t hash_seed, std::size_t run_threshold, int codec) {
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

py::dict header_dict(const ArchiveHeader& h) {
    py::dict d;
    d["version"] = h.format_version;
    d["word_size"] = h.params.preprocess.word_size;
    d["transform_size"] = h.params.transform_size;
    d["quant_bits"] = h.params.quant_bits;
    d["hash_seed"] = h.params.preprocess.hash_seed;
    d["run_threshold"] = h.params.preprocess.run_threshold;
    d["codec"] = static_cast<int>(h.params.codec);
    d["period_id"] = h.period_id;
    d["period_start"] = h.period_start;
    d["period_end"] = h.period_end;
    d["flow_count"] = h.flow_count;
    return d;
}

py::dict match_dict(const MatchResult& r) {
    py::dict d;
    d["flow"] = r.key;
    d["period_id"] = r.period_id;
    d["first_seen"] = r.first_seen;
    d["byte_offset"] = r.estimated_byte_offset;
    d["alignment"] = r.alignment_offset;
    d["peak"] = r.peak_value;
    d["threshold"] = r.threshold.t;
    d["k"] = r.threshold.k;
    d["ratio"] = r.ratio();
    return d;
}

} // namespace

PYBIND11_MODULE(_dspas, m) {
    m.doc() = "Transform-coded payload digests and excerpt attribution";

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ContractViolation>(m, "ContractViolation", error);
    py::register_exception<InputError>(m, "InputError", error);
    py::register_exception<IntegrityError>(m, "IntegrityError", error);
    py::register_exception<ParameterMismatchError>(m, "ParameterMismatchError", error);
    py::register_exception<QueryTooShortError>(m, "QueryTooShortError", error);
    py::register_exception<NoSignalError>(m, "NoSignalError", error);
    py::register_exception<CalibrationError>(m, "CalibrationError", error);

    py::class_<DigestParams>(m, "DigestParams")
        .def(py::init(&make_params), py::arg("word_size") = 8, py::arg("transform_size") = 1024,
             py::arg("quant_bits") = 4, py::arg("hash_seed") = kDefaultHashSeed, py::arg("run_threshold") = 64,
             py::arg("codec") = 1)
        .def_property_readonly("word_size", [](const DigestParams& p) { return p.preprocess.word_size; })
        .def_readonly("transform_size", &DigestParams::transform_size)
        .def_readonly("quant_bits", &DigestParams::quant_bits)
        .def_property_readonly("hash_seed", [](const DigestParams& p) { return p.preprocess.hash_seed; })
        .def_property_readonly("run_threshold", [](const DigestParams& p) { return p.preprocess.run_threshold; });

    py::class_<FlowKey>(m, "FlowKey")
        .def(py::init([](const std::string& src, const std::string& dst, std::uint16_t sport, std::uint16_t dport,
                         const std::string& proto) {
                 FlowKey k;
                 k.src_addr = IpAddress::parse(src);
                 k.dst_addr = IpAddress::parse(dst);
                 k.src_port = sport;
                 k.dst_port = dport;
                 if (proto == "tcp") {
                     k.protocol = Protocol::tcp;
                 } else if (proto == "udp") {
                     k.protocol = Protocol::udp;
                 } else {
                     throw InputError("protocol must be 'tcp' or 'udp', got '" + proto + "'");
                 }
                 return k;
             }),
             py::arg("src"), py::arg("dst"), py::arg("src_port"), py::arg("dst_port"), py::arg("protocol") = "tcp")
        .def_property_readonly("src", [](const FlowKey& k) { return k.src_addr.to_string(); })
        .def_property_readonly("dst", [](const FlowKey& k) { return k.dst_addr.to_string(); })
        .def_readonly("src_port", &FlowKey::src_port)
        .def_readonly("dst_port", &FlowKey::dst_port)
        .def_property_readonly("protocol", [](const FlowKey& k) { return std::string(to_string(k.protocol)); })
        .def("__eq__", [](const FlowKey& a, const FlowKey& b) { return a == b; })
        .def("__hash__", [](const FlowKey& k) { return k.hash(); })
        .def("__repr__", [](const FlowKey& k) { return "FlowKey(" + k.to_string() + ")"; });

    py::class_<DigestArchive>(m, "Archive")
        .def_property_readonly("header", [](const DigestArchive& a) { return header_dict(a.header); })
        .def_property_readonly("flows",
                               [](const DigestArchive& a) {
                                   py::list out;
                                   for (const auto& r : a.flows) {
                                       py::dict d;
                                       d["flow"] = r.key;
                                       d["first_seen"] = r.first_seen;
                                       d["digest_bytes"] = r.digest_length;
                                       d["words"] = r.original_word_count;
                                       out.append(d);
                                   }
                                   return out;
                               })
        .def("to_bytes", [](const DigestArchive& a) { return from_bytes(serialize(a)); })
        .def("__len__", [](const DigestArchive& a) { return a.flows.size(); });

    m.def(
        "build_archive",
        [](const std::vector<std::tuple<FlowKey, py::bytes, std::int64_t>>& flows, std::uint64_t period_id,
           const DigestParams& params, std::uint64_t period_seconds) {
            std::vector<FlowDigest> digests;
            for (const auto& [key, payload, first_seen] : flows) {
                FlowPayload f;
                f.key = key;
                f.period_id = period_id;
                f.bytes = to_bytes(payload);
                f.first_seen = first_seen;
                digests.push_back(digest_flow(f, params));
            }
            return build_archive(CapturePeriod::for_id(period_id, period_seconds), std::move(digests), params);
        },
        py::arg("flows"), py::arg("period_id") = 0, py::arg("params") = DigestParams{},
        py::arg("period_seconds") = 3600, "Digest (key, payload, first_seen_ns) triples into one period archive.");

    m.def(
        "synthetic_flows",
        [](std::size_t count, std::size_t min_bytes, std::size_t max_bytes, std::uint64_t seed) {
            SyntheticCorpusSpec spec;
            spec.flow_count = count;
            spec.min_bytes = min_bytes;
            spec.max_bytes = max_bytes;
            spec.seed = seed;
            py::list out;
            for (const auto& f : generate_corpus(spec).flows) {
                out.append(py::make_tuple(f.key, from_bytes(f.bytes), f.first_seen));
            }
            return out;
        },
        py::arg("count"), py::arg("min_bytes") = 10 * 1024, py::arg("max_bytes") = 40 * 1024, py::arg("seed") = 1,
        "High-entropy (key, payload, first_seen_ns) triples with distinct keys.");

    m.def("write_archive", [](const std::string& path, const DigestArchive& a) { write_archive(path, a); },
          py::arg("path"), py::arg("archive"));
    m.def("read_archive", &read_archive, py::arg("path"));
    m.def("parse_archive", [](const py::bytes& data) { return parse_archive(to_bytes(data)); }, py::arg("data"));

    m.def(
        "attribute",
        [](const std::vector<DigestArchive>& archives, const py::bytes& excerpt, std::vector<std::size_t> wildcards,
           std::optional<double> k, bool similar, double budget, std::uint64_t period_first,
           std::uint64_t period_last) {
            Query q;
            q.excerpt = to_bytes(excerpt);
            q.mask = WildcardMask(std::move(wildcards));
            q.threshold_override = k;
            q.period_range = {period_first, period_last};
            std::vector<MatchResult> results;
            {
                py::gil_scoped_release release;
                QueryEngine engine(archives);
                results = similar ? engine.find_similar(q, budget) : engine.attribute(q);
            }
            py::list out;
            for (const auto& r : results) {
                out.append(match_dict(r));
            }
            return out;
        },
        py::arg("archives"), py::arg("excerpt"), py::arg("wildcards") = std::vector<std::size_t>{},
        py::arg("k") = py::none(), py::arg("similar") = false, py::arg("budget") = 0.05, py::arg("period_first") = 0,
        py::arg("period_last") = UINT64_MAX, "Flows whose digest correlates with the excerpt, strongest first.");

    m.def("correlate",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& p,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& s) {
              return to_array(correlate(to_vector(p), to_vector(s)));
          },
          py::arg("p"), py::arg("s"));
    m.def("dct_forward",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
              const auto v = to_vector(x);
              return to_array(dct_forward(v, v.size()).coeffs);
          },
          py::arg("x"));
    m.def("dct_inverse",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& c) {
              CoefficientChunk chunk;
              chunk.coeffs = to_vector(c);
              return to_array(dct_inverse(chunk, chunk.coeffs.size()));
          },
          py::arg("coeffs"));

    m.def("q_function", &q_function, py::arg("x"));
    m.def("fp_probability", &fp_probability, py::arg("k"), py::arg("transform_size"), py::arg("excerpt_words"));
    m.def(
        "fn_probability",
        [](double k, std::size_t excerpt_words, double sigma_n_sq, unsigned word_size) {
            SystemParams p;
            p.word_size = word_size;
            p.excerpt_words = excerpt_words;
            NoiseModel nm;
            nm.sigma_n_sq = sigma_n_sq;
            return fn_probability(k, p, nm);
        },
        py::arg("k"), py::arg("excerpt_words"), py::arg("sigma_n_sq"), py::arg("word_size") = 8);
    m.def("table_coefficient", &table_coefficient, py::arg("excerpt_bytes"));
    m.def(
        "select_threshold",
        [](std::size_t l_bytes, double sigma_n_sq, const DigestParams& params, double fp_max, double fn_max) {
            NoiseModel nm;
            nm.sigma_n_sq = sigma_n_sq;
            const auto c = select_threshold_coefficient(l_bytes, SystemParams::for_excerpt(params, l_bytes), nm,
                                                        ErrorTargets{fp_max, fn_max});
            py::dict d;
            d["k"] = c.k;
            d["from_table"] = c.from_table;
            d["feasible"] = c.feasible;
            d["fp"] = c.fp;
            d["fn"] = c.fn;
            return d;
        },
        py::arg("excerpt_bytes"), py::arg("sigma_n_sq"), py::arg("params") = DigestParams{}, py::arg("fp_max") = 1e-3,
        py::arg("fn_max") = 1e-6);
    m.def(
        "calibrate_noise",
        [](const DigestParams& params, std::size_t words, std::uint64_t seed) {
            NoiseModel nm;
            {
                py::gil_scoped_release release;
                nm = calibrate_noise_synthetic(params, words, seed);
            }
            py::dict d;
            d["sigma_n_sq"] = nm.sigma_n_sq;
            d["mean"] = nm.mean;
            d["lag1_autocorrelation"] = nm.lag1_autocorrelation;
            d["signal_variance"] = nm.signal_variance;
            d["samples"] = nm.samples;
            return d;
        },
        py::arg("params") = DigestParams{}, py::arg("words") = std::size_t{1} << 20, py::arg("seed") = 1);

    m.def(
        "run_experiment",
        [](const std::string& kind, std::size_t flows, std::size_t repetitions, std::uint64_t seed,
           std::size_t min_bytes, std::size_t max_bytes, const DigestParams& params) {
            ExperimentSpec spec;
            spec.kind = parse_experiment_kind(kind);
            spec.corpus.flow_count = flows;
            spec.corpus.min_bytes = min_bytes;
            spec.corpus.max_bytes = max_bytes;
            spec.repetitions = repetitions;
            spec.seed = seed;
            spec.params = params;
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(spec);
            }
            return py::make_tuple(r.table.header, r.table.rows);
        },
        py::arg("kind"), py::arg("flows") = 200, py::arg("repetitions") = 20, py::arg("seed") = 1,
        py::arg("min_bytes") = 10 * 1024, py::arg("max_bytes") = 40 * 1024, py::arg("params") = DigestParams{},
        "Returns (header, rows) with every cell as a string.");
}
