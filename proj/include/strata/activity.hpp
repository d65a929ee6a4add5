#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/forest.hpp"
#include "strata/recognizer.hpp"
#include "strata/snapshot.hpp"

namespace strata {

/// Occurrence counts of unit patterns over one label sequence.
struct BowHistogram {
    std::vector<std::uint32_t> counts;  // aligned with vocabulary
    std::vector<std::string> vocabulary;
    std::size_t seq_len = 0;
    std::int64_t window_start_t_ms = 0;
    std::int64_t window_end_t_ms = 0;

    std::vector<double> features() const { return {counts.begin(), counts.end()}; }
};

/// Throws ArgumentError naming the first label missing from `vocabulary`.
BowHistogram bow(std::span<const std::string> labels, std::span<const std::string> vocabulary);

struct ActivityEvent {
    std::int64_t t0_ms = 0;
    std::int64_t t1_ms = 0;
    std::string label;
    double confidence = 0.0;

    friend bool operator==(const ActivityEvent&, const ActivityEvent&) = default;
};

/// `forest` must have been trained on histograms over `vocabulary`.
ActivityEvent classify_activity(const BowHistogram& h, const RandomForest& forest,
                                std::span<const std::string> vocabulary);

/// Consumes voted unit-pattern labels in disjoint blocks of seq_len.
class ActivityPipeline {
public:
    explicit ActivityPipeline(std::shared_ptr<const ModelSnapshot> snapshot);

    std::optional<ActivityEvent> push(const UnitPatternEvent& event);
    void set_snapshot(std::shared_ptr<const ModelSnapshot> snapshot);
    std::size_t pending() const noexcept { return labels_.size(); }

private:
    std::shared_ptr<const ModelSnapshot> snapshot_;
    std::vector<std::string> labels_;
    std::int64_t block_start_ = 0;
};

std::vector<ActivityEvent> run_activity_pipeline(std::span<const UnitPatternEvent> events,
                                                 std::shared_ptr<const ModelSnapshot> snapshot);

struct TimelineEntry {
    std::int64_t day = 0;  // days since 1970-01-01
    int minute = 0;        // minute of day, 0..1439
    std::string activity;
    double confidence = 0.0;

    std::string date() const;
    friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

/// Minute-resolution activity record. Each event marks every minute its
/// [t0, t1) span touches; a minute already taken changes hands only to a
/// strictly more confident event.
class Timeline {
public:
    explicit Timeline(std::int64_t epoch_ms = 0) : epoch_ms_(epoch_ms) {}

    void record(const ActivityEvent& event);
    std::vector<TimelineEntry> entries() const;

private:
    std::int64_t epoch_ms_;
    std::map<std::int64_t, TimelineEntry> by_minute_;
};

std::vector<TimelineEntry> record_timeline(std::span<const ActivityEvent> events, std::int64_t epoch_ms = 0);

/// CSV: date,minute,activity,confidence
void write_timeline_csv(std::ostream& out, std::span<const TimelineEntry> entries);
void write_timeline_csv(const std::filesystem::path& path, std::span<const TimelineEntry> entries);

/// Unit patterns that make up an activity.
struct ActivityComposition {
    std::string activity;
    std::vector<std::string> patterns;
};

/// Training histograms for the activity forest: per sample, each member
/// pattern gets a weight drawn from U(0.5, 1.5); every label is drawn from
/// those weights, or with probability `label_noise` uniformly from the
/// whole vocabulary.
LabeledSet synthesize_histograms(std::span<const ActivityComposition> compositions,
                                 std::span<const std::string> vocabulary, std::size_t per_activity,
                                 std::size_t seq_len, double label_noise, std::uint64_t seed);

}  // namespace strata
