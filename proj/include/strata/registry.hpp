#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/activity.hpp"
#include "strata/features.hpp"
#include "strata/forest.hpp"
#include "strata/gmm.hpp"
#include "strata/ingest.hpp"
#include "strata/novelty.hpp"
#include "strata/snapshot.hpp"

namespace strata {

struct PatternEntry {
    std::string name;
    std::vector<std::string> activities;
    std::size_t sample_count = 0;

    friend bool operator==(const PatternEntry&, const PatternEntry&) = default;
};

/// Pattern and activity vocabularies with their stored training windows.
/// Every mutation either succeeds and bumps the version or throws and leaves
/// the registry untouched.
class PatternRegistry {
public:
    const std::vector<PatternEntry>& patterns() const noexcept { return patterns_; }
    const std::vector<std::string>& activities() const noexcept { return activities_; }
    std::uint64_t version() const noexcept { return version_; }

    bool contains(const std::string& name) const;
    const std::vector<FeatureVector>& samples(const std::string& name) const;
    std::size_t total_samples() const;

    /// A confirmed new pattern: exactly `expected` samples (the collection target).
    void add_pattern(const std::string& name, const std::string& activity, std::vector<FeatureVector> samples,
                     std::size_t expected = 120);
    /// Bulk import used when bootstrapping from a corpus; any count >= 1.
    void import_pattern(const std::string& name, std::vector<std::string> activities,
                        std::vector<FeatureVector> samples);
    void associate(const std::string& pattern, const std::string& activity);

    /// Activity -> member patterns, in activity order.
    std::vector<ActivityComposition> compositions() const;

    friend bool operator==(const PatternRegistry&, const PatternRegistry&) = default;

private:
    void add_activity(const std::string& activity);
    PatternEntry& entry(const std::string& name);

    std::vector<PatternEntry> patterns_;
    std::vector<std::string> activities_;
    std::map<std::string, std::vector<FeatureVector>> samples_;
    std::uint64_t version_ = 0;
};

struct TrainConfig {
    WindowConfig window;
    EmConfig em;
    ForestConfig unit_forest;
    ForestConfig activity_forest;
    NoveltyConfig novelty;
    double match_quantile = 0.05;
    double new_quantile = 0.001;
    std::size_t histograms_per_activity = 20;
    double histogram_noise = 0.1;
    std::size_t seq_len = 120;
    /// Master seed; the EM, forest and histogram seeds are derived from it.
    std::uint64_t seed = 0;
};

/// Refits every model on the registry's stored samples. The activity forest
/// is trained from the registry's compositions, or carried over from
/// `previous` when there are none.
ModelSnapshot retrain(const PatternRegistry& registry, const TrainConfig& cfg,
                      const ModelSnapshot* previous = nullptr);

/// Unit-pattern training set (36-dim features) in registry pattern order.
LabeledSet unit_training_set(const PatternRegistry& registry);

std::filesystem::path manifest_path(const std::filesystem::path& data);

/// Feature CSV plus `<data>.manifest.json` holding the vocabularies.
void save_dataset(const PatternRegistry& registry, const std::filesystem::path& path);
/// Accepts a feature CSV or a labelled frame CSV (windowed; only windows whose
/// samples share one pattern label are kept). A sidecar manifest, when
/// present, fixes pattern order and activity associations.
PatternRegistry load_dataset(const std::filesystem::path& path, const WindowConfig& window = {});

PatternRegistry registry_from_records(std::span<const CsvRecord> records, const WindowConfig& window = {});

}  // namespace strata
