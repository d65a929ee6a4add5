#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "strata/activity.hpp"
#include "strata/ingest.hpp"

namespace strata {

/// One block of a scripted session: `seconds` of signal split evenly over
/// `patterns` (in shuffled order), all labelled with `activity`.
struct ScriptBlock {
    std::string activity;
    double seconds = 60.0;
    std::vector<std::string> patterns;

    friend bool operator==(const ScriptBlock&, const ScriptBlock&) = default;
};

/// Profile file contents: pattern generators plus an optional activity script.
struct ProfileSet {
    double rate_hz = kNominalRateHz;
    std::vector<PatternProfile> patterns;
    std::vector<ScriptBlock> script;

    const PatternProfile& find(const std::string& name) const;
    std::vector<std::string> names() const;
    /// Activity -> member patterns, from each profile's activity list.
    std::vector<ActivityComposition> compositions() const;

    friend bool operator==(const ProfileSet&, const ProfileSet&) = default;
};

ProfileSet parse_profiles(std::string_view json_text);
std::string profiles_to_json(const ProfileSet& set);
ProfileSet load_profiles(const std::filesystem::path& path);
void save_profiles(const ProfileSet& set, const std::filesystem::path& path);

/// The nine-pattern starter vocabulary with its three activities and a
/// one-block-per-activity script.
ProfileSet starter_profiles();

/// A pattern deliberately far from every starter pattern.
PatternProfile outlier_profile(const std::string& name = "boxing");

/// `seconds` of each pattern in turn, labelled with the pattern only.
std::vector<SynthSegment> corpus_segments(const ProfileSet& set, double seconds);

/// Plays the script once, or cycles it until `total_seconds` when positive.
std::vector<SynthSegment> script_segments(const ProfileSet& set, std::span<const ScriptBlock> script,
                                          double total_seconds, std::uint64_t seed);

}  // namespace strata
