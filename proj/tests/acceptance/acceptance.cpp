// Acceptance suite: one PASS/FAIL line per criterion. Optional argv[1] is the
// path of the strata CLI; the determinism check also runs it end to end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "strata/activity.hpp"
#include "strata/corpus.hpp"
#include "strata/features.hpp"
#include "strata/forest.hpp"
#include "strata/gmm.hpp"
#include "strata/novelty.hpp"
#include "strata/random.hpp"
#include "strata/recognizer.hpp"
#include "strata/registry.hpp"
#include "strata/service.hpp"
#include "strata/snapshot.hpp"

using namespace strata;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

fs::path scratch_dir() {
    auto dir = fs::temp_directory_path() / ("strata_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------- features

std::array<double, kFeatureDim> reference_features(const Window& w) {
    std::array<double, kFeatureDim> out{};
    const std::size_t n = w.samples.size();
    for (std::size_t c = 0; c < kChannels; ++c) {
        std::vector<double> x;
        for (const auto& row : w.samples) x.push_back(row[c]);
        long double sum = 0;
        for (double v : x) sum += v;
        const double mean = static_cast<double>(sum / n);
        auto sorted = x;
        std::sort(sorted.begin(), sorted.end());
        const double median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
        long double ss = 0;
        for (double v : x) ss += (v - mean) * (v - mean);
        int crossings = 0;
        for (std::size_t i = 0; i + 1 < n; ++i)
            if ((x[i] - mean) * (x[i + 1] - mean) < 0) ++crossings;
        out[c * 4] = mean;
        out[c * 4 + 1] = median;
        out[c * 4 + 2] = static_cast<double>(ss / n);
        out[c * 4 + 3] = crossings;
    }
    return out;
}

Outcome feature_oracle() {
    // Channel offsets and spreads at the scale of calibrated IMU readings; the
    // absolute tolerance is only meaningful while values stay near unit size.
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> offset(-2.0, 2.0);
    std::uniform_real_distribution<double> spread(0.05, 3.0);
    double worst = 0.0, worst_rel = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Window w;
        ChannelArray mu, sd;
        for (std::size_t c = 0; c < kChannels; ++c) {
            mu[c] = offset(rng);
            sd[c] = spread(rng);
        }
        for (int i = 0; i < 40; ++i) {
            ChannelArray row;
            for (std::size_t c = 0; c < kChannels; ++c) row[c] = mu[c] + sd[c] * z(rng);
            w.samples.push_back(row);
        }
        auto fv = extract_features(w);
        auto ref = reference_features(w);
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            const double d = std::abs(fv.values[i] - ref[i]);
            worst = std::max(worst, d);
            if (ref[i] != 0.0) worst_rel = std::max(worst_rel, d / std::abs(ref[i]));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 5.0, "max |diff| " + fmt("%.3g", worst) + " (relative " + fmt("%.3g", worst_rel) +
                                              "), " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- GMM

Outcome em_ascent() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    double worst_drop = 0.0;
    double worst_weight = 0.0;
    std::size_t iterations = 0;
    for (int ds = 0; ds < 100; ++ds) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(20, 500)(rng);
        const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        std::uniform_real_distribution<double> centre(-8.0, 8.0);
        std::uniform_real_distribution<double> spread(0.3, 2.0);
        std::vector<std::vector<double>> means(k, std::vector<double>(d));
        std::vector<double> sds(k);
        for (std::size_t c = 0; c < k; ++c) {
            for (auto& m : means[c]) m = centre(rng);
            sds[c] = spread(rng);
        }
        Matrix pts(0, 0);
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> which(0, k - 1);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = which(rng);
            std::vector<double> row(d);
            for (std::size_t j = 0; j < d; ++j) row[j] = means[c][j] + sds[c] * z(rng);
            pts.push_row(row);
        }
        EmConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(ds);
        auto res = em_fit_traced(pts, k, cfg);
        for (const auto& run : res.runs) {
            const auto& ll = run.log_likelihood;
            iterations += ll.size();
            for (std::size_t i = 1; i < ll.size(); ++i) worst_drop = std::max(worst_drop, ll[i - 1] - ll[i]);
        }
        double wsum = 0.0;
        for (const auto& comp : res.model.components) wsum += comp.weight;
        worst_weight = std::max(worst_weight, std::abs(wsum - 1.0));
    }
    const double secs = seconds_since(t0);
    return {worst_drop <= 1e-9 && worst_weight <= 1e-9 && secs < 60.0,
            "largest drop " + fmt("%.3g", worst_drop) + ", weight error " + fmt("%.3g", worst_weight) + ", " +
                std::to_string(iterations) + " iterations, " + fmt("%.2f", secs) + " s"};
}

Outcome gmm_recovery() {
    std::mt19937_64 rng(303);
    std::normal_distribution<double> z(0.0, 1.0);
    const double sigma = 1.0;
    const std::vector<std::vector<double>> truth{{0.0, 0.0}, {12.0, 3.0}};  // gap > 12 sigma
    Matrix pts(0, 0);
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < 2; ++c)
        for (int i = 0; i < 100; ++i) {
            pts.push_row(std::vector<double>{truth[c][0] + sigma * z(rng), truth[c][1] + sigma * z(rng)});
            labels.push_back(c);
        }
    EmConfig cfg;
    cfg.seed = 3;
    auto model = em_fit(pts, 2, cfg);

    // Match recovered components to the truth by nearest mean.
    auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        return std::hypot(a[0] - b[0], a[1] - b[1]);
    };
    std::array<std::size_t, 2> map{0, 1};
    if (dist(model.components[0].mean, truth[1]) < dist(model.components[0].mean, truth[0])) map = {1, 0};

    const double tol = 3.0 * sigma / std::sqrt(100.0);
    double worst = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < 2; ++j)
            worst = std::max(worst, std::abs(model.components[map[c]].mean[j] - truth[c][j]));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        auto r = responsibilities(model, pts.row(i));
        auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
        if (best == map[labels[i]]) ++correct;
    }
    const double frac = static_cast<double>(correct) / static_cast<double>(pts.rows());
    return {worst <= tol && frac >= 0.99,
            "max mean error " + fmt("%.4f", worst) + " (tol " + fmt("%.2f", tol) + "), assigned " + fmt("%.3f", frac)};
}

// ---------------------------------------------------------------- forests

/// Exactly `windows` windows of one pattern.
std::vector<FeatureVector> pattern_windows(const PatternProfile& p, std::size_t windows, std::uint64_t seed) {
    WindowConfig wc;
    const double frames = static_cast<double>(wc.window_len + (windows - 1) * wc.step);
    auto recs = synthesize({{p, frames / wc.rate_hz, std::nullopt}}, seed);
    std::vector<ImuFrame> f;
    for (auto& r : recs) f.push_back(r.frame);
    std::vector<FeatureVector> out;
    for (const auto& w : strata::windows(f, wc)) out.push_back(extract_features(w));
    return out;
}

Outcome unit_cv() {
    const auto t0 = Clock::now();
    auto set = starter_profiles();
    PatternRegistry reg;
    std::uint64_t seed = 11;
    for (const auto& p : set.patterns) reg.import_pattern(p.name, {}, pattern_windows(p, 120, seed++));
    auto data = unit_training_set(reg);
    std::map<std::size_t, std::size_t> per_class;
    for (auto y : data.y) ++per_class[y];
    bool shape = data.label_names.size() == 9 && per_class.size() == 9;
    for (auto& [c, n] : per_class) shape = shape && n == 120;
    auto cv = cross_validate(data, 4, ForestConfig{});
    const double secs = seconds_since(t0);
    return {shape && cv.mean_accuracy >= 0.95 && secs < 60.0,
            "9 patterns x 120 windows, mean accuracy " + fmt("%.4f", cv.mean_accuracy) + ", " + fmt("%.2f", secs) +
                " s"};
}

Outcome activity_cv() {
    const auto t0 = Clock::now();
    auto set = starter_profiles();
    auto comps = set.compositions();
    auto vocab = set.names();
    TrainConfig defaults;
    auto data = synthesize_histograms(comps, vocab, 20, defaults.seq_len, defaults.histogram_noise, 17);
    auto cv = cross_validate(data, 4, ForestConfig{});
    const double secs = seconds_since(t0);
    return {comps.size() == 3 && data.size() == 60 && cv.mean_accuracy >= 0.85 && secs < 30.0,
            "3 activities x 20 histograms, mean accuracy " + fmt("%.4f", cv.mean_accuracy) + ", " +
                fmt("%.2f", secs) + " s"};
}

Outcome cube_invariance() {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> z(0.0, 1.0);
    LabeledSet data;
    data.label_names = {"a", "b", "c"};
    for (int i = 0; i < 300; ++i) {
        std::size_t c = static_cast<std::size_t>(i % 3);
        std::vector<double> row(6);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<double>((c + j) % 3) * 0.8 + z(rng);
        data.X.push_row(row);
        data.y.push_back(c);
    }
    auto cube = [](LabeledSet s) {
        for (std::size_t r = 0; r < s.X.rows(); ++r)
            for (auto& v : s.X.row(r)) v = v * v * v;
        return s;
    };
    ForestConfig cfg;
    cfg.n_trees = 50;
    cfg.seed = 9;
    auto plain = fit_forest(data, cfg);
    auto cubed = fit_forest(cube(data), cfg);
    std::size_t same = 0;
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x(6), x3(6);
        for (std::size_t j = 0; j < x.size(); ++j) {
            x[j] = 1.5 * z(rng) + 0.8;
            x3[j] = x[j] * x[j] * x[j];
        }
        auto a = plain.predict(x);
        auto b = cubed.predict(x3);
        if (a.label == b.label && a.probabilities == b.probabilities) ++same;
    }
    return {same == 500, std::to_string(same) + "/500 predictions identical"};
}

// ---------------------------------------------------------------- novelty

Outcome novelty_detection() {
    auto set = starter_profiles();
    set.patterns.resize(5);
    PatternRegistry reg;
    for (std::size_t i = 0; i < set.patterns.size(); ++i)
        reg.import_pattern(set.patterns[i].name, {}, pattern_windows(set.patterns[i], 125, 500 + i));
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.unit_forest.n_trees = 30;
    auto snap = std::make_shared<const ModelSnapshot>(retrain(reg, cfg));

    auto detections = [&](const PatternProfile& p, std::uint64_t seed) {
        UnitRecognizer rec(snap);
        std::size_t hits = 0;
        for (const auto& fv : pattern_windows(p, 10, seed)) {
            auto r = rec.classify_window(fv);
            if (r.novelty && r.novelty->kind == NoveltyEventKind::NoveltyDetected) {
                ++hits;
                rec.resolve_candidate(IgnoreDecision{});
            }
        }
        return hits;
    };

    std::string detail;
    bool pass = true;
    for (std::size_t i = 0; i < set.patterns.size(); ++i) {
        int clean = 0;
        for (int t = 0; t < 10; ++t)
            if (detections(set.patterns[i], 9000 + 100 * i + static_cast<std::uint64_t>(t)) == 0) ++clean;
        pass = pass && clean >= 8;
        detail += set.patterns[i].name + " " + std::to_string(clean) + "/10 clean, ";
    }
    // Held-out pattern: a trained one with every channel mean moved by 10 noise sigmas.
    PatternProfile held = set.patterns[0];
    held.name = "held_out";
    for (auto& b : held.baseline) b += 10.0 * held.noise_sigma;
    int found = 0;
    for (int t = 0; t < 10; ++t)
        if (detections(held, 7000 + static_cast<std::uint64_t>(t)) >= 1) ++found;
    pass = pass && found >= 8;
    detail += "held-out detected " + std::to_string(found) + "/10";
    return {pass, detail};
}

// Reference: with every candidate ignored at once, a detection fires at each
// index where the current sub-threshold run length is a positive multiple of n.
std::vector<std::size_t> scan_detections(const std::vector<double>& scores, double theta_new, std::size_t n) {
    std::vector<std::size_t> hits;
    std::size_t run = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        run = scores[i] < theta_new ? run + 1 : 0;
        if (run > 0 && run % n == 0) hits.push_back(i);
    }
    return hits;
}

Outcome state_machine_property() {
    std::mt19937_64 rng(505);
    std::size_t mismatches = 0, fired = 0;
    FeatureVector fv{};
    for (int t = 0; t < 10000; ++t) {
        NoveltyConfig cfg{0.0, -1.0, 1 + static_cast<std::size_t>(t % 5), 120};
        std::uniform_real_distribution<double> u(-2.5, 1.0);
        std::vector<double> scores(1 + static_cast<std::size_t>(rng() % 60));
        for (auto& v : scores) v = u(rng);
        NoveltyState s;
        std::vector<std::size_t> hits;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            auto r = step(std::move(s), scores[i], fv, cfg);
            s = std::move(r.state);
            if (r.event && r.event->kind == NoveltyEventKind::NoveltyDetected) {
                hits.push_back(i);
                s = resolve_candidate(std::move(s), IgnoreDecision{});
            }
        }
        fired += hits.size();
        if (hits != scan_detections(scores, cfg.theta_new, cfg.consecutive_n)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatching sequences of 10000, " +
                                 std::to_string(fired) + " detections"};
}

// ---------------------------------------------------------------- voting

Outcome vote_smoothing() {
    std::mt19937_64 rng(606);
    const auto names = starter_profiles().names();
    std::uniform_int_distribution<std::size_t> any(0, names.size() - 1);
    std::uniform_int_distribution<std::size_t> run_len(20, 200);
    std::bernoulli_distribution noisy(0.2);
    std::vector<std::string> truth, raw;
    while (truth.size() < 12000) {
        auto label = names[any(rng)];
        for (auto n = run_len(rng); n > 0; --n) {
            truth.push_back(label);
            raw.push_back(noisy(rng) ? names[any(rng)] : label);
        }
    }
    VoteBuffer votes(5);
    std::size_t scored = 0, raw_ok = 0, voted_ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto v = votes.push(raw[i]);
        if (!v) continue;
        ++scored;
        raw_ok += raw[i] == truth[i];
        voted_ok += *v == truth[i];
    }
    const double r = static_cast<double>(raw_ok) / static_cast<double>(scored);
    const double v = static_cast<double>(voted_ok) / static_cast<double>(scored);
    return {scored >= 10000 && v >= r,
            std::to_string(scored) + " labels, raw " + fmt("%.4f", r) + ", voted " + fmt("%.4f", v)};
}

// ---------------------------------------------------------------- end to end

std::shared_ptr<const ModelSnapshot> train_starter(std::uint64_t seed) {
    auto set = starter_profiles();
    auto reg = registry_from_records(synthesize(corpus_segments(set, 65.0), seed));
    for (const auto& comp : set.compositions())
        for (const auto& p : comp.patterns) reg.associate(p, comp.activity);
    TrainConfig cfg;
    cfg.seed = seed;
    return std::make_shared<const ModelSnapshot>(retrain(reg, cfg));
}

Outcome end_to_end() {
    const auto t0 = Clock::now();
    auto set = starter_profiles();
    auto snap = train_starter(21);

    // Thirty one-minute activity blocks cycling through the script.
    auto segs = script_segments(set, set.script, 1800.0, 23);
    auto records = synthesize(segs, 29);
    std::vector<std::pair<std::int64_t, std::string>> truth;
    for (const auto& r : records) truth.emplace_back(r.frame.t_ms, r.activity.value_or(""));

    SynthStream stream(segs, 29);
    auto run = run_offline(stream, snap);

    std::size_t correct = 0;
    for (const auto& a : run.activities) {
        std::map<std::string, std::size_t> tally;
        for (const auto& [t, act] : truth)
            if (t >= a.t0_ms && t < a.t1_ms) ++tally[act];
        auto best = std::max_element(tally.begin(), tally.end(),
                                     [](const auto& x, const auto& y) { return x.second < y.second; });
        if (best != tally.end() && best->first == a.label) ++correct;
    }
    const double acc = run.activities.empty() ? 0.0 : static_cast<double>(correct) / run.activities.size();
    const double secs = seconds_since(t0);
    return {run.activities.size() >= 25 && acc >= 0.85,
            std::to_string(run.activities.size()) + " blocks, accuracy " + fmt("%.4f", acc) + ", " +
                fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& cli, const std::string& args) {
    std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

Outcome determinism(const std::string& cli) {
    std::string detail;
    bool pass = true;

    // In-process: serialized snapshots and offline event logs.
    auto a = train_starter(31);
    auto b = train_starter(31);
    bool same_snapshot = serialize_snapshot(*a) == serialize_snapshot(*b);
    auto log_of = [&](const std::shared_ptr<const ModelSnapshot>& s) {
        auto set = starter_profiles();
        SynthStream stream(script_segments(set, set.script, 300.0, 37), 37);
        std::string log;
        run_offline(stream, s, {}, [&](const std::string& line) { log += line + "\n"; });
        return log;
    };
    auto la = log_of(a);
    bool same_log = !la.empty() && la == log_of(b);
    pass = same_snapshot && same_log;
    detail = std::string("library snapshots ") + (same_snapshot ? "identical" : "DIFFER") + ", event logs " +
             (same_log ? "identical" : "DIFFER");

    if (!cli.empty()) {
        auto dir = scratch_dir();
        auto p = [&](const char* name) { return "\"" + (dir / name).string() + "\""; };
        bool ok = run_cli(cli, "synth --mode corpus --seconds 400 --seed 3 --out " + p("corpus.csv")) == 0 &&
                  run_cli(cli, "synth --mode script --seconds 240 --seed 4 --out " + p("stream.csv")) == 0 &&
                  run_cli(cli, "train --data " + p("corpus.csv") + " --out " + p("a.json") + " --seed 8 --folds 0") ==
                      0 &&
                  run_cli(cli, "train --data " + p("corpus.csv") + " --out " + p("b.json") + " --seed 8 --folds 0") ==
                      0 &&
                  run_cli(cli, "replay --file " + p("stream.csv") + " --snapshot " + p("a.json") + " --events " +
                                   p("e1.ndjson")) == 0 &&
                  run_cli(cli, "replay --file " + p("stream.csv") + " --snapshot " + p("a.json") + " --events " +
                                   p("e2.ndjson")) == 0;
        bool snap_same = ok && slurp(dir / "a.json") == slurp(dir / "b.json") && !slurp(dir / "a.json").empty();
        bool events_same = ok && slurp(dir / "e1.ndjson") == slurp(dir / "e2.ndjson") &&
                           !slurp(dir / "e1.ndjson").empty();
        pass = pass && ok && snap_same && events_same;
        detail += std::string("; cli ") + (ok ? "ran" : "FAILED") + ", snapshots " +
                  (snap_same ? "byte-identical" : "DIFFER") + ", event logs " + (events_same ? "identical" : "DIFFER");
        fs::remove_all(dir);
    } else {
        detail += "; cli not built, library path only";
    }
    return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"feature oracle equivalence", feature_oracle},
        {"EM ascent", em_ascent},
        {"GMM recovery", gmm_recovery},
        {"unit-pattern cross-validation", unit_cv},
        {"activity cross-validation", activity_cv},
        {"novelty detection", novelty_detection},
        {"vote smoothing", vote_smoothing},
        {"monotone invariance", cube_invariance},
        {"determinism", [&] { return determinism(cli); }},
        {"state-machine property", state_machine_property},
        {"end-to-end script", end_to_end},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
