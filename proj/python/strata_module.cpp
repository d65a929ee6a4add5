// Python bindings for the recognition core. The package `strata` re-exports
// everything defined here.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "strata/activity.hpp"
#include "strata/corpus.hpp"
#include "strata/error.hpp"
#include "strata/features.hpp"
#include "strata/recognizer.hpp"
#include "strata/registry.hpp"
#include "strata/service.hpp"
#include "strata/snapshot.hpp"

namespace py = pybind11;
using namespace strata;

namespace {

Window to_window(const std::vector<std::vector<double>>& rows, std::int64_t start_t_ms) {
    Window w;
    w.start_t_ms = start_t_ms;
    for (const auto& r : rows) {
        if (r.size() != kChannels)
            throw ArgumentError("each sample needs " + std::to_string(kChannels) + " channels, got " +
                                std::to_string(r.size()));
        ChannelArray a;
        std::copy(r.begin(), r.end(), a.begin());
        w.samples.push_back(a);
    }
    return w;
}

py::dict record_dict(const CsvRecord& r) {
    py::dict d;
    d["t_ms"] = r.frame.t_ms;
    d["channels"] = r.frame.channels();
    d["pattern"] = r.pattern;
    d["activity"] = r.activity;
    return d;
}

ProfileSet profiles_or_starter(const std::optional<std::string>& json_text) {
    return json_text ? parse_profiles(*json_text) : starter_profiles();
}

}  // namespace

PYBIND11_MODULE(_strata, m) {
    m.doc() = "Streaming hierarchical activity recognition";

    auto base = py::register_exception<Error>(m, "StrataError", PyExc_RuntimeError);
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<StateError>(m, "StateError", base.ptr());
    py::register_exception<ConflictError>(m, "ConflictError", base.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
    py::register_exception<CompatibilityError>(m, "CompatibilityError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", format.ptr());

    m.attr("FEATURE_DIM") = kFeatureDim;
    m.attr("DENSITY_DIM") = kDensityDim;

    m.def(
        "extract_features",
        [](const std::vector<std::vector<double>>& samples, std::int64_t start_t_ms) {
            auto fv = extract_features(to_window(samples, start_t_ms));
            return std::vector<double>(fv.values.begin(), fv.values.end());
        },
        py::arg("samples"), py::arg("start_t_ms") = 0,
        "36 features (mean, median, variance, mean crossings per channel) of one window.");
    m.def(
        "project_27", [](const std::vector<double>& v) {
            auto p = project_27(std::span<const double>(v));
            return std::vector<double>(p.begin(), p.end());
        },
        py::arg("features"));
    m.def("mean_crossings", [](const std::vector<double>& x, double mu) { return mean_crossings(x, mu); },
          py::arg("x"), py::arg("mu"));
    m.def("majority_vote", [](const std::vector<std::string>& labels) { return majority_vote(labels); },
          py::arg("labels"));
    m.def(
        "bow",
        [](const std::vector<std::string>& labels, const std::vector<std::string>& vocabulary) {
            return bow(labels, vocabulary).counts;
        },
        py::arg("labels"), py::arg("vocabulary"));

    py::class_<VoteBuffer>(m, "VoteBuffer")
        .def(py::init<std::size_t, bool>(), py::arg("capacity") = 3, py::arg("disjoint") = false)
        .def("push", &VoteBuffer::push, py::arg("label"))
        .def("clear", &VoteBuffer::clear)
        .def_property_readonly("capacity", &VoteBuffer::capacity)
        .def("__len__", &VoteBuffer::size);

    m.def("starter_profiles", [] { return profiles_to_json(starter_profiles()); },
          "Built-in profile set as JSON text.");
    m.def(
        "synthesize",
        [](const std::optional<std::string>& profiles, const std::string& mode, double seconds, std::uint64_t seed) {
            auto set = profiles_or_starter(profiles);
            std::vector<SynthSegment> segs;
            if (mode == "script")
                segs = script_segments(set, set.script, seconds, seed);
            else if (mode == "corpus")
                segs = corpus_segments(set, seconds / static_cast<double>(set.patterns.size()));
            else
                throw ArgumentError("mode must be 'corpus' or 'script'");
            py::list out;
            for (const auto& r : synthesize(segs, seed, set.rate_hz)) out.append(record_dict(r));
            return out;
        },
        py::arg("profiles") = std::nullopt, py::arg("mode") = "corpus", py::arg("seconds") = 90.0,
        py::arg("seed") = 0, "Synthetic labelled frames as a list of dicts.");

    py::class_<ModelSnapshot, std::shared_ptr<ModelSnapshot>>(m, "Snapshot")
        .def_static("load", [](const std::filesystem::path& p) { return std::make_shared<ModelSnapshot>(load_snapshot(p)); })
        .def_static("loads", [](const std::string& text) {
            return std::make_shared<ModelSnapshot>(deserialize_snapshot(text));
        })
        .def("save", [](const ModelSnapshot& s, const std::filesystem::path& p) { save_snapshot(s, p); })
        .def("dumps", [](const ModelSnapshot& s) { return serialize_snapshot(s); })
        .def_readonly("version", &ModelSnapshot::version)
        .def_property_readonly("patterns", &ModelSnapshot::patterns)
        .def_property_readonly("activities", &ModelSnapshot::activities)
        .def_property_readonly("theta_match", [](const ModelSnapshot& s) { return s.novelty.theta_match; })
        .def_property_readonly("theta_new", [](const ModelSnapshot& s) { return s.novelty.theta_new; })
        .def("classify", [](const ModelSnapshot& s, const std::vector<double>& features) {
            auto p = s.unit_forest.predict(features);
            return py::make_tuple(s.unit_forest.label_name(p.label), p.confidence());
        });

    m.def(
        "train",
        [](const std::filesystem::path& data, std::uint64_t seed, std::size_t trees) {
            TrainConfig cfg;
            cfg.seed = seed;
            cfg.unit_forest.n_trees = trees;
            cfg.activity_forest.n_trees = trees;
            py::gil_scoped_release release;
            return std::make_shared<ModelSnapshot>(retrain(load_dataset(data), cfg));
        },
        py::arg("data"), py::arg("seed") = 0, py::arg("trees") = 100,
        "Train a snapshot from a labelled frame CSV or feature CSV.");

    m.def(
        "replay",
        [](const std::filesystem::path& file, std::shared_ptr<ModelSnapshot> snapshot, std::size_t vote) {
            std::vector<std::string> lines;
            {
                py::gil_scoped_release release;
                CsvReplay source(file, snapshot->window.rate_hz, false);
                RecognizerConfig rc;
                rc.vote_capacity = vote;
                run_offline(source, snapshot, rc, [&](const std::string& l) { lines.push_back(l); });
            }
            return lines;
        },
        py::arg("file"), py::arg("snapshot"), py::arg("vote") = 3,
        "Event log (NDJSON lines) of a frame CSV replayed against a snapshot.");
}
