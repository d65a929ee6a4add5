// strata: command-line front end for the recognition engine.
//
// Exit codes: 0 success, 1 usage, 2 data/format error, 3 training error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "http_ui.hpp"
#include "strata/corpus.hpp"
#include "strata/error.hpp"
#include "strata/registry.hpp"
#include "strata/service.hpp"

namespace {

using namespace strata;
using nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

struct SynthArgs {
    std::string profiles;
    double seconds = 600;
    std::uint64_t seed = 0;
    std::string out;
    std::string mode = "corpus";
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::size_t folds = 4;
    std::uint64_t seed = 0;
    std::size_t trees = 100;
};

struct EvalArgs {
    std::string data;
    std::string snapshot;
    std::size_t folds = 4;
};

struct ReplayArgs {
    std::string file;
    std::string snapshot;
    bool realtime = false;
    std::string events;
    std::string timeline;
    std::size_t vote = 3;
};

struct ServeArgs {
    std::string listen = "127.0.0.1:7878";
    std::string snapshot;
    std::string data;
    std::string http;
    std::string ui_dir;
};

struct TimelineArgs {
    std::string events;
    std::string out;
    std::int64_t epoch_ms = 0;
};

void write_manifest(const ProfileSet& set, const std::vector<SynthSegment>& segs, const std::string& out) {
    ordered_json pats = ordered_json::array();
    std::vector<std::string> activities;
    for (const auto& p : set.patterns) {
        bool used = std::any_of(segs.begin(), segs.end(), [&](const auto& s) { return s.profile.name == p.name; });
        if (!used) continue;
        pats.push_back({{"name", p.name}, {"activities", p.activities}});
        for (const auto& a : p.activities)
            if (std::find(activities.begin(), activities.end(), a) == activities.end()) activities.push_back(a);
    }
    std::ofstream m(manifest_path(out));
    if (!m) throw IoError("cannot write " + manifest_path(out).string());
    m << ordered_json{{"patterns", pats}, {"activities", activities}}.dump(2) << "\n";
}

int run_synth(const SynthArgs& a) {
    auto set = a.profiles.empty() ? starter_profiles() : load_profiles(a.profiles);
    if (!(a.seconds > 0)) throw ArgumentError("--seconds must be positive");
    std::vector<SynthSegment> segs;
    if (a.mode == "script") {
        if (set.script.empty()) throw ArgumentError("profile set has no script");
        segs = script_segments(set, set.script, a.seconds, a.seed);
    } else {
        segs = corpus_segments(set, a.seconds / static_cast<double>(set.patterns.size()));
    }
    auto records = synthesize(segs, a.seed, set.rate_hz);
    write_frames_csv(a.out, records, CsvSchema{true, true});
    write_manifest(set, segs, a.out);
    std::cout << ordered_json{{"frames", records.size()}, {"segments", segs.size()}, {"out", a.out}}.dump() << "\n";
    return 0;
}

TrainConfig train_config(std::uint64_t seed, std::size_t trees) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.unit_forest.n_trees = trees;
    cfg.activity_forest.n_trees = trees;
    return cfg;
}

int run_train(const TrainArgs& a) {
    auto registry = load_dataset(a.data);
    auto cfg = train_config(a.seed, a.trees);
    auto snap = retrain(registry, cfg);
    save_snapshot(snap, a.out);
    ordered_json summary = {{"version", snap.version},
                            {"patterns", snap.patterns()},
                            {"activities", snap.activities()},
                            {"samples", registry.total_samples()},
                            {"theta_match", snap.novelty.theta_match},
                            {"theta_new", snap.novelty.theta_new}};
    if (a.folds > 1) {
        ForestConfig fc = cfg.unit_forest;
        fc.seed = a.seed;
        summary["cv_accuracy"] = cross_validate(unit_training_set(registry), a.folds, fc).mean_accuracy;
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_eval(const EvalArgs& a) {
    auto registry = load_dataset(a.data);
    auto snap = load_snapshot(a.snapshot);
    auto units = unit_training_set(registry);
    // Score against the snapshot's own label order.
    std::size_t correct = 0;
    for (std::size_t i = 0; i < units.size(); ++i) {
        auto p = snap.unit_forest.predict(units.X.row(i));
        correct += snap.unit_forest.label_name(p.label) == units.label_names[units.y[i]];
    }
    ordered_json out = {{"samples", units.size()},
                        {"snapshot_accuracy", units.size() ? double(correct) / double(units.size()) : 0.0}};
    if (a.folds > 1) {
        auto cv = cross_validate(units, a.folds, ForestConfig{});
        out["cv_fold_accuracy"] = cv.fold_accuracy;
        out["cv_accuracy"] = cv.mean_accuracy;
    }
    std::cout << out.dump() << "\n";
    return 0;
}

int run_replay(const ReplayArgs& a) {
    auto snap = std::make_shared<const ModelSnapshot>(load_snapshot(a.snapshot));
    CsvReplay source(a.file, snap->window.rate_hz, a.realtime);
    std::ofstream file;
    if (!a.events.empty()) {
        file.open(a.events);
        if (!file) throw IoError("cannot write " + a.events);
    }
    std::ostream& out = a.events.empty() ? std::cout : file;
    RecognizerConfig rc;
    rc.vote_capacity = a.vote;
    auto run = run_offline(source, snap, rc, [&](const std::string& line) {
        out << line << "\n";
        if (a.realtime) out.flush();
    });
    if (!a.timeline.empty()) write_timeline_csv(a.timeline, record_timeline(run.activities));
    if (!a.events.empty())
        std::cout << ordered_json{{"unit_events", run.units.size()},
                                  {"activity_events", run.activities.size()},
                                  {"novelty_prompts", run.novelty_prompts}}
                         .dump()
                  << "\n";
    return 0;
}

int run_serve(const ServeArgs& a) {
    auto snap = std::make_shared<const ModelSnapshot>(load_snapshot(a.snapshot));
    PatternRegistry registry;
    EngineConfig cfg;
    if (!a.data.empty()) {
        registry = load_dataset(a.data);
        cfg.dataset_path = a.data;
    }
    cfg.snapshot_path = a.snapshot;

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Engine engine(std::move(registry), snap, cfg);
    Server server(engine, Endpoint::parse(a.listen));
    std::unique_ptr<tools::HttpUi> http;
    if (!a.http.empty())
        http = std::make_unique<tools::HttpUi>(a.http, a.ui_dir, [&engine] {
            std::ostringstream ss;
            write_timeline_csv(ss, engine.timeline());
            return ss.str();
        });
    std::cerr << "listening on 127.0.0.1:" << server.port() << "\n";

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.run();
    engine.stop_all();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

int run_timeline(const TimelineArgs& a) {
    std::ifstream in(a.events);
    if (!in) throw IoError("cannot open " + a.events);
    std::vector<ActivityEvent> events;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            if (j.value("kind", std::string{}) != "activity_event") continue;
            events.push_back({j.at("t0_ms").get<std::int64_t>(), j.at("t1_ms").get<std::int64_t>(),
                              j.at("label").get<std::string>(), j.at("conf").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(a.events + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    write_timeline_csv(a.out, record_timeline(events, a.epoch_ms));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical activity recognition from 9-channel IMU streams"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a labelled synthetic frame CSV");
    s->add_option("--profiles", synth.profiles, "Profile JSON (default: built-in starter set)");
    s->add_option("--seconds", synth.seconds, "Total duration in seconds");
    s->add_option("--seed", synth.seed, "Random seed");
    s->add_option("--out", synth.out, "Output CSV")->required();
    s->add_option("--mode", synth.mode, "corpus: every pattern in turn; script: the activity script")
        ->check(CLI::IsMember({"corpus", "script"}));

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a snapshot from a labelled frame or feature CSV");
    t->add_option("--data", train.data, "Dataset CSV")->required();
    t->add_option("--out", train.out, "Snapshot output path")->required();
    t->add_option("--folds", train.folds, "Cross-validation folds to report (0 to skip)");
    t->add_option("--seed", train.seed, "Training seed");
    t->add_option("--trees", train.trees, "Trees per forest");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Evaluate a snapshot and cross-validate on a dataset");
    e->add_option("--data", eval.data, "Dataset CSV")->required();
    e->add_option("--snapshot", eval.snapshot, "Snapshot file")->required();
    e->add_option("--folds", eval.folds, "Cross-validation folds (0 to skip)");

    ReplayArgs replay;
    auto* r = app.add_subcommand("replay", "Run a frame CSV through the recognizer and print events");
    r->add_option("--file", replay.file, "Frame CSV")->required();
    r->add_option("--snapshot", replay.snapshot, "Snapshot file")->required();
    r->add_flag("--realtime", replay.realtime, "Pace frames at the sample rate");
    r->add_option("--events", replay.events, "Write the event log here instead of stdout");
    r->add_option("--timeline", replay.timeline, "Write the minute timeline CSV here");
    r->add_option("--vote", replay.vote, "Vote buffer capacity")->check(CLI::PositiveNumber);

    ServeArgs serve;
    auto* v = app.add_subcommand("serve", "Run the NDJSON session server");
    v->add_option("--listen", serve.listen, "host:port for the protocol socket");
    v->add_option("--snapshot", serve.snapshot, "Snapshot file (rewritten on retrain)")->required();
    v->add_option("--data", serve.data, "Dataset CSV (rewritten when patterns are added)");
    v->add_option("--http", serve.http, "host:port for static UI assets and /timeline.csv");
    v->add_option("--ui-dir", serve.ui_dir, "Directory of console assets");

    TimelineArgs timeline;
    auto* m = app.add_subcommand("timeline", "Build the minute timeline from an event log");
    m->add_option("--events", timeline.events, "Event log (NDJSON)")->required();
    m->add_option("--out", timeline.out, "Timeline CSV")->required();
    m->add_option("--epoch-ms", timeline.epoch_ms, "Wall-clock time of stream t=0");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*s) return run_synth(synth);
        if (*t) return run_train(train);
        if (*e) return run_eval(eval);
        if (*r) return run_replay(replay);
        if (*v) return run_serve(serve);
        if (*m) return run_timeline(timeline);
    } catch (const TrainingError& err) {
        std::cerr << "training error: " << err.what() << "\n";
        return kExitTraining;
    } catch (const ArgumentError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
