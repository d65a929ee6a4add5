#include "strata/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strata/error.hpp"

namespace strata {

using nlohmann::json;

const PatternProfile& ProfileSet::find(const std::string& name) const {
    for (const auto& p : patterns)
        if (p.name == name) return p;
    throw ArgumentError("unknown pattern profile '" + name + "'");
}

std::vector<std::string> ProfileSet::names() const {
    std::vector<std::string> out;
    for (const auto& p : patterns) out.push_back(p.name);
    return out;
}

std::vector<ActivityComposition> ProfileSet::compositions() const {
    std::vector<ActivityComposition> out;
    for (const auto& p : patterns)
        for (const auto& a : p.activities) {
            auto it = std::find_if(out.begin(), out.end(), [&](const auto& c) { return c.activity == a; });
            if (it == out.end()) it = out.insert(out.end(), ActivityComposition{a, {}});
            it->patterns.push_back(p.name);
        }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.activity < b.activity; });
    return out;
}

ProfileSet parse_profiles(std::string_view text) {
    try {
        auto j = json::parse(text);
        ProfileSet set;
        set.rate_hz = j.value("rate_hz", kNominalRateHz);
        for (const auto& jp : j.at("patterns")) {
            PatternProfile p;
            p.name = jp.at("name").get<std::string>();
            p.baseline = jp.at("baseline").get<ChannelArray>();
            p.amplitude = jp.at("amplitude").get<ChannelArray>();
            p.frequency = jp.at("frequency").get<ChannelArray>();
            p.noise_sigma = jp.at("noise_sigma").get<double>();
            p.activities = jp.value("activities", std::vector<std::string>{});
            p.validate();
            set.patterns.push_back(std::move(p));
        }
        if (j.contains("script"))
            for (const auto& jb : j.at("script")) {
                ScriptBlock b;
                b.activity = jb.at("activity").get<std::string>();
                b.seconds = jb.at("seconds").get<double>();
                b.patterns = jb.at("patterns").get<std::vector<std::string>>();
                for (const auto& name : b.patterns) (void)set.find(name);
                set.script.push_back(std::move(b));
            }
        return set;
    } catch (const json::exception& e) {
        throw FormatError(std::string("profile file: ") + e.what());
    }
}

// One pattern or script block per line.
std::string profiles_to_json(const ProfileSet& set) {
    using ojson = nlohmann::ordered_json;
    std::string out = "{\n  \"rate_hz\": " + ojson(set.rate_hz).dump() + ",\n  \"patterns\": [";
    for (std::size_t i = 0; i < set.patterns.size(); ++i) {
        const auto& p = set.patterns[i];
        ojson j = {{"name", p.name},
                   {"activities", p.activities},
                   {"baseline", p.baseline},
                   {"amplitude", p.amplitude},
                   {"frequency", p.frequency},
                   {"noise_sigma", p.noise_sigma}};
        out += (i ? ",\n    " : "\n    ") + j.dump();
    }
    out += "\n  ],\n  \"script\": [";
    for (std::size_t i = 0; i < set.script.size(); ++i) {
        const auto& b = set.script[i];
        ojson j = {{"activity", b.activity}, {"seconds", b.seconds}, {"patterns", b.patterns}};
        out += (i ? ",\n    " : "\n    ") + j.dump();
    }
    out += "\n  ]\n}\n";
    return out;
}

ProfileSet load_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_profiles(ss.str());
}

void save_profiles(const ProfileSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << profiles_to_json(set);
}

namespace {

PatternProfile profile(std::string name, ChannelArray base, ChannelArray amp, ChannelArray freq, double noise,
                       std::vector<std::string> activities) {
    return {std::move(name), base, amp, freq, noise, std::move(activities)};
}

ChannelArray all(double v) { return {v, v, v, v, v, v, v, v, v}; }

}  // namespace

// Frequencies are multiples of 0.5 Hz so a 2 s window holds whole cycles.
ProfileSet starter_profiles() {
    const std::string concert = "LIVE_CONCERT";
    const std::string practice = "GUITAR_PRACTICE";
    const std::string basketball = "PLAY_BASKETBALL";
    ProfileSet set;
    set.patterns = {
        profile("shooting", {0.20, -0.30, 0.60, 0, 0, 0, 0.40, 0.20, 0.30},
                {0.40, 0.60, 0.30, 150, 60, 40, 0.50, 0.80, 0.20}, all(0.5), 0.05, {basketball}),
        profile("walking", {0.05, -0.90, 0.30, 0, 0, 0, 0.05, -1.00, 0.40},
                {0.15, 0.30, 0.10, 20, 40, 10, 0.10, 0.15, 0.05}, {2, 2, 2, 1, 1, 1, 1, 1, 1}, 0.03,
                {concert, basketball}),
        profile("running", {0.10, -0.80, 0.40, 0, 0, 0, 0.10, -0.70, 0.40},
                {0.50, 0.80, 0.30, 80, 120, 40, 0.30, 0.40, 0.10}, {3, 3, 3, 1.5, 1.5, 1.5, 1.5, 1.5, 1.5}, 0.05,
                {concert, basketball}),
        profile("dribbling", {0.00, -0.60, 0.70, 0, 0, 0, 0.20, -0.40, 0.20},
                {0.60, 0.30, 0.20, 60, 30, 20, 0.20, 0.30, 0.05}, all(2.5), 0.05, {basketball}),
        profile("guitar_sitting", {0.30, 0.10, 0.90, 0, 0, 0, 0.60, 0.20, 0.10},
                {0.05, 0.05, 0.05, 30, 10, 10, 0.05, 0.05, 0.02}, all(4), 0.02, {concert, practice}),
        profile("guitar_standing", {0.30, -0.60, 0.60, 0, 0, 0, 0.60, -0.50, 0.10},
                {0.05, 0.05, 0.05, 30, 10, 10, 0.05, 0.05, 0.02}, all(4), 0.02, {concert}),
        profile("guitar_foot_on_chair", {0.40, -0.40, 0.70, 0, 0, 0, 0.80, -0.30, 0.30},
                {0.08, 0.06, 0.05, 35, 15, 10, 0.06, 0.05, 0.02}, all(3.5), 0.02, {concert}),
        profile("idle_sitting", {0.10, 0.20, 0.97, 0, 0, 0, 0.10, 0.30, 0.00},
                {0.01, 0.01, 0.01, 1, 1, 1, 0.01, 0.01, 0.01}, all(0.5), 0.02, {practice}),
        profile("idle_standing", {0.05, -0.95, 0.25, 0, 0, 0, 0.00, -1.20, 0.50},
                {0.01, 0.01, 0.01, 1, 1, 1, 0.01, 0.01, 0.01}, all(0.5), 0.02, {}),
    };
    set.script = {
        {basketball, 60.0, {"running", "walking", "shooting", "dribbling"}},
        {practice, 60.0, {"guitar_sitting", "idle_sitting"}},
        {concert, 60.0, {"guitar_standing", "guitar_foot_on_chair", "guitar_sitting", "running", "walking"}},
    };
    return set;
}

PatternProfile outlier_profile(const std::string& name) {
    return profile(name, {-0.50, 0.50, -0.30, 0, 0, 0, -1.00, 0.90, -0.80},
                   {0.70, 0.70, 0.70, 200, 200, 100, 0.30, 0.30, 0.30}, all(3), 0.05, {"WORKOUT"});
}

std::vector<SynthSegment> corpus_segments(const ProfileSet& set, double seconds) {
    std::vector<SynthSegment> out;
    for (const auto& p : set.patterns) out.push_back({p, seconds, std::nullopt});
    return out;
}

std::vector<SynthSegment> script_segments(const ProfileSet& set, std::span<const ScriptBlock> script,
                                          double total_seconds, std::uint64_t seed) {
    std::vector<SynthSegment> out;
    if (script.empty()) return out;
    std::mt19937_64 rng(seed);
    double elapsed = 0.0;
    for (std::size_t i = 0;; ++i) {
        if (total_seconds > 0.0 ? elapsed >= total_seconds - 1e-9 : i >= script.size()) break;
        const auto& block = script[i % script.size()];
        if (block.patterns.empty() || !(block.seconds > 0.0))
            throw ArgumentError("script block '" + block.activity + "' needs patterns and a positive duration");
        double seconds = block.seconds;
        if (total_seconds > 0.0) seconds = std::min(seconds, total_seconds - elapsed);
        auto order = block.patterns;
        std::shuffle(order.begin(), order.end(), rng);
        const double each = seconds / static_cast<double>(order.size());
        for (const auto& name : order) out.push_back({set.find(name), each, block.activity});
        elapsed += seconds;
    }
    return out;
}

}  // namespace strata
