#include "strata/registry.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strata/error.hpp"
#include "strata/random.hpp"
#include "strata/text.hpp"

namespace strata {

using nlohmann::json;

bool PatternRegistry::contains(const std::string& name) const {
    return std::any_of(patterns_.begin(), patterns_.end(), [&](const auto& p) { return p.name == name; });
}

const std::vector<FeatureVector>& PatternRegistry::samples(const std::string& name) const {
    auto it = samples_.find(name);
    if (it == samples_.end()) throw ArgumentError("unknown pattern '" + name + "'");
    return it->second;
}

std::size_t PatternRegistry::total_samples() const {
    std::size_t n = 0;
    for (const auto& p : patterns_) n += p.sample_count;
    return n;
}

PatternEntry& PatternRegistry::entry(const std::string& name) {
    for (auto& p : patterns_)
        if (p.name == name) return p;
    throw ArgumentError("unknown pattern '" + name + "'");
}

void PatternRegistry::add_activity(const std::string& activity) {
    if (std::find(activities_.begin(), activities_.end(), activity) == activities_.end())
        activities_.push_back(activity);
}

void PatternRegistry::add_pattern(const std::string& name, const std::string& activity,
                                  std::vector<FeatureVector> samples, std::size_t expected) {
    if (name.empty()) throw ArgumentError("pattern name must not be empty");
    if (contains(name)) throw ConflictError("pattern '" + name + "' already exists");
    if (samples.size() != expected)
        throw ArgumentError("pattern '" + name + "' needs exactly " + std::to_string(expected) + " samples, got " +
                            std::to_string(samples.size()));
    std::vector<std::string> activities;
    if (!activity.empty()) activities.push_back(activity);
    import_pattern(name, std::move(activities), std::move(samples));
}

void PatternRegistry::import_pattern(const std::string& name, std::vector<std::string> activities,
                                     std::vector<FeatureVector> samples) {
    if (name.empty()) throw ArgumentError("pattern name must not be empty");
    if (contains(name)) throw ConflictError("pattern '" + name + "' already exists");
    if (samples.empty()) throw ArgumentError("pattern '" + name + "' has no samples");
    for (const auto& a : activities)
        if (a.empty()) throw ArgumentError("activity name must not be empty");
    for (const auto& a : activities) add_activity(a);
    patterns_.push_back({name, std::move(activities), samples.size()});
    samples_[name] = std::move(samples);
    ++version_;
}

void PatternRegistry::associate(const std::string& pattern, const std::string& activity) {
    if (activity.empty()) throw ArgumentError("activity name must not be empty");
    auto& e = entry(pattern);
    if (std::find(e.activities.begin(), e.activities.end(), activity) != e.activities.end()) return;
    e.activities.push_back(activity);
    add_activity(activity);
    ++version_;
}

std::vector<ActivityComposition> PatternRegistry::compositions() const {
    std::vector<ActivityComposition> out;
    for (const auto& a : activities_) {
        ActivityComposition c{a, {}};
        for (const auto& p : patterns_)
            if (std::find(p.activities.begin(), p.activities.end(), a) != p.activities.end())
                c.patterns.push_back(p.name);
        if (!c.patterns.empty()) out.push_back(std::move(c));
    }
    return out;
}

LabeledSet unit_training_set(const PatternRegistry& registry) {
    LabeledSet set;
    for (std::size_t k = 0; k < registry.patterns().size(); ++k) {
        const auto& p = registry.patterns()[k];
        set.label_names.push_back(p.name);
        for (const auto& fv : registry.samples(p.name)) {
            set.X.push_row(fv.values);
            set.y.push_back(k);
        }
    }
    return set;
}

ModelSnapshot retrain(const PatternRegistry& registry, const TrainConfig& cfg, const ModelSnapshot* previous) {
    cfg.window.validate();
    if (registry.patterns().empty()) throw TrainingError("registry has no patterns to train on");
    for (const auto& p : registry.patterns())
        if (p.sample_count < 20)
            throw TrainingError("pattern '" + p.name + "' has " + std::to_string(p.sample_count) +
                                " samples; at least 20 are needed");

    ModelSnapshot snap;
    snap.version = registry.version();
    snap.window = cfg.window;
    snap.seq_len = cfg.seq_len;

    auto units = unit_training_set(registry);
    Matrix density;
    std::vector<std::vector<DensityVector>> per_pattern(units.label_names.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        auto d = project_27(units.X.row(i));
        density.push_row(d);
        per_pattern[units.y[i]].push_back(d);
    }

    EmConfig em = cfg.em;
    em.seed = mix_seed(cfg.seed, 1);
    try {
        snap.gmm = fit_per_label(density, units.y, units.label_names, em);
    } catch (const ArgumentError& e) {
        throw TrainingError(std::string("GMM fit failed: ") + e.what());
    }
    try {
        snap.novelty = calibrate_thresholds(snap.gmm, per_pattern, cfg.match_quantile, cfg.new_quantile, cfg.novelty);
        snap.novelty.validate();
    } catch (const ArgumentError& e) {
        throw TrainingError(std::string("threshold calibration failed: ") + e.what());
    }

    ForestConfig uf = cfg.unit_forest;
    uf.seed = mix_seed(cfg.seed, 2);
    snap.unit_forest = fit_forest(units, uf);

    auto comps = registry.compositions();
    if (!comps.empty()) {
        auto hist = synthesize_histograms(comps, units.label_names, cfg.histograms_per_activity, cfg.seq_len,
                                          cfg.histogram_noise, mix_seed(cfg.seed, 4));
        ForestConfig af = cfg.activity_forest;
        af.seed = mix_seed(cfg.seed, 3);
        snap.activity_forest = fit_forest(hist, af);
    } else if (previous && previous->activity_forest &&
               previous->activity_forest->n_features() == units.label_names.size() &&
               previous->patterns() == units.label_names) {
        snap.activity_forest = previous->activity_forest;
    }
    return snap;
}

std::filesystem::path manifest_path(const std::filesystem::path& data) {
    auto p = data;
    p += ".manifest.json";
    return p;
}

void save_dataset(const PatternRegistry& registry, const std::filesystem::path& path) {
    std::vector<FeatureRow> rows;
    for (const auto& p : registry.patterns())
        for (const auto& fv : registry.samples(p.name)) rows.push_back({fv, p.name});
    write_feature_csv(path, rows, true);

    json pats = json::array();
    for (const auto& p : registry.patterns()) pats.push_back({{"name", p.name}, {"activities", p.activities}});
    json j = {{"version", registry.version()}, {"patterns", pats}, {"activities", registry.activities()}};
    std::ofstream out(manifest_path(path));
    if (!out) throw IoError("cannot write " + manifest_path(path).string());
    out << j.dump(2) << "\n";
}

namespace {

struct Manifest {
    std::vector<std::pair<std::string, std::vector<std::string>>> patterns;
    std::vector<std::string> activities;
};

std::optional<Manifest> read_manifest(const std::filesystem::path& data) {
    auto mp = manifest_path(data);
    if (!std::filesystem::exists(mp)) return std::nullopt;
    std::ifstream in(mp);
    if (!in) throw IoError("cannot open " + mp.string());
    try {
        auto j = json::parse(in);
        Manifest m;
        for (const auto& jp : j.at("patterns"))
            m.patterns.emplace_back(jp.at("name").get<std::string>(),
                                    jp.value("activities", std::vector<std::string>{}));
        m.activities = j.value("activities", std::vector<std::string>{});
        return m;
    } catch (const json::exception& e) {
        throw FormatError(mp.string() + ": " + e.what());
    }
}

/// Ordered grouping of labelled windows plus observed pattern->activity pairs.
struct Grouped {
    std::vector<std::string> order;
    std::map<std::string, std::vector<FeatureVector>> samples;
    std::map<std::string, std::vector<std::string>> activities;
    std::vector<std::string> activity_order;

    void add(const std::string& name, const FeatureVector& fv) {
        if (!samples.count(name)) order.push_back(name);
        samples[name].push_back(fv);
    }
    void link(const std::string& pattern, const std::string& activity) {
        auto& v = activities[pattern];
        if (std::find(v.begin(), v.end(), activity) == v.end()) v.push_back(activity);
        if (std::find(activity_order.begin(), activity_order.end(), activity) == activity_order.end())
            activity_order.push_back(activity);
    }
};

PatternRegistry build(Grouped g, const std::optional<Manifest>& manifest) {
    PatternRegistry reg;
    if (manifest) {
        for (const auto& [name, acts] : manifest->patterns) {
            auto it = g.samples.find(name);
            if (it == g.samples.end()) throw DataError("manifest lists pattern '" + name + "' with no samples");
            reg.import_pattern(name, acts, std::move(it->second));
            g.samples.erase(it);
        }
        if (!g.samples.empty())
            throw DataError("pattern '" + g.samples.begin()->first + "' is missing from the manifest");
        return reg;
    }
    for (const auto& name : g.order) reg.import_pattern(name, g.activities[name], std::move(g.samples[name]));
    return reg;
}

bool looks_like_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    return trim(header).rfind("window_start_t_ms", 0) == 0;
}

}  // namespace

PatternRegistry registry_from_records(std::span<const CsvRecord> records, const WindowConfig& window) {
    window.validate();
    Grouped g;
    WindowAssembler assembler(window);
    std::deque<const CsvRecord*> recent;
    for (const auto& r : records) {
        if (r.pattern && !r.pattern->empty() && r.activity && !r.activity->empty()) g.link(*r.pattern, *r.activity);
        recent.push_back(&r);
        if (recent.size() > window.window_len) recent.pop_front();
        auto w = assembler.push(r.frame);
        if (!w) continue;
        const auto& first = recent.front()->pattern;
        if (!first || first->empty()) continue;
        bool pure = std::all_of(recent.begin(), recent.end(), [&](const CsvRecord* x) { return x->pattern == first; });
        if (pure) g.add(*first, extract_features(*w));
    }
    if (g.order.empty()) throw DataError("no window is covered by a single pattern label");
    // Activities observed only through associations keep first-seen order.
    PatternRegistry reg;
    for (const auto& name : g.order) {
        std::vector<std::string> acts;
        for (const auto& a : g.activity_order) {
            const auto& linked = g.activities[name];
            if (std::find(linked.begin(), linked.end(), a) != linked.end()) acts.push_back(a);
        }
        reg.import_pattern(name, std::move(acts), std::move(g.samples[name]));
    }
    return reg;
}

PatternRegistry load_dataset(const std::filesystem::path& path, const WindowConfig& window) {
    auto manifest = read_manifest(path);
    if (looks_like_feature_csv(path)) {
        Grouped g;
        for (const auto& row : read_feature_csv(path)) {
            if (!row.pattern || row.pattern->empty()) continue;
            g.add(*row.pattern, row.features);
        }
        if (g.order.empty()) throw DataError(path.string() + ": no labelled feature rows");
        return build(std::move(g), manifest);
    }
    auto records = read_frames_csv(path);
    auto reg = registry_from_records(records, window);
    if (!manifest) return reg;
    Grouped g;
    for (const auto& p : reg.patterns()) {
        g.order.push_back(p.name);
        g.samples[p.name] = reg.samples(p.name);
    }
    return build(std::move(g), manifest);
}

}  // namespace strata
