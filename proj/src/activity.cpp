#include "strata/activity.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>

#include "strata/error.hpp"
#include "strata/random.hpp"

namespace strata {

namespace {

constexpr std::int64_t kMinuteMs = 60'000;
constexpr std::int64_t kMinutesPerDay = 1440;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

BowHistogram bow(std::span<const std::string> labels, std::span<const std::string> vocabulary) {
    BowHistogram h;
    h.vocabulary.assign(vocabulary.begin(), vocabulary.end());
    h.counts.assign(vocabulary.size(), 0);
    h.seq_len = labels.size();
    for (const auto& l : labels) {
        auto it = std::find(vocabulary.begin(), vocabulary.end(), l);
        if (it == vocabulary.end()) throw ArgumentError("unknown unit pattern '" + l + "'");
        ++h.counts[static_cast<std::size_t>(it - vocabulary.begin())];
    }
    return h;
}

ActivityEvent classify_activity(const BowHistogram& h, const RandomForest& forest,
                                std::span<const std::string> vocabulary) {
    if (!std::equal(h.vocabulary.begin(), h.vocabulary.end(), vocabulary.begin(), vocabulary.end()))
        throw ArgumentError("histogram vocabulary does not match the activity model");
    if (forest.n_features() != vocabulary.size())
        throw ArgumentError("activity forest expects " + std::to_string(forest.n_features()) + " patterns, vocabulary has " +
                            std::to_string(vocabulary.size()));
    auto p = forest.predict(h.features());
    return {h.window_start_t_ms, h.window_end_t_ms, forest.label_name(p.label), p.confidence()};
}

ActivityPipeline::ActivityPipeline(std::shared_ptr<const ModelSnapshot> snapshot) : snapshot_(std::move(snapshot)) {
    if (!snapshot_ || !snapshot_->activity_forest) throw StateError("activity forest is not trained");
}

void ActivityPipeline::set_snapshot(std::shared_ptr<const ModelSnapshot> snapshot) {
    if (!snapshot || !snapshot->activity_forest) throw StateError("activity forest is not trained");
    snapshot_ = std::move(snapshot);
}

std::optional<ActivityEvent> ActivityPipeline::push(const UnitPatternEvent& event) {
    if (!event.voted_label) return std::nullopt;
    if (labels_.empty()) block_start_ = event.t_ms;
    labels_.push_back(*event.voted_label);
    if (labels_.size() < snapshot_->seq_len) return std::nullopt;

    const auto& vocab = snapshot_->patterns();
    auto h = bow(labels_, vocab);
    h.window_start_t_ms = block_start_;
    h.window_end_t_ms = event.t_ms + static_cast<std::int64_t>(snapshot_->window.step_ms());
    labels_.clear();
    return classify_activity(h, *snapshot_->activity_forest, vocab);
}

std::vector<ActivityEvent> run_activity_pipeline(std::span<const UnitPatternEvent> events,
                                                 std::shared_ptr<const ModelSnapshot> snapshot) {
    ActivityPipeline pipeline(std::move(snapshot));
    std::vector<ActivityEvent> out;
    for (const auto& e : events)
        if (auto a = pipeline.push(e)) out.push_back(std::move(*a));
    return out;
}

std::string TimelineEntry::date() const {
    using namespace std::chrono;
    year_month_day ymd{sys_days{days{day}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

void Timeline::record(const ActivityEvent& e) {
    if (e.t1_ms <= e.t0_ms) return;
    const std::int64_t first = floor_div(epoch_ms_ + e.t0_ms, kMinuteMs);
    const std::int64_t last = floor_div(epoch_ms_ + e.t1_ms - 1, kMinuteMs);
    for (auto m = first; m <= last; ++m) {
        auto it = by_minute_.find(m);
        if (it != by_minute_.end() && !(e.confidence > it->second.confidence)) continue;
        TimelineEntry entry;
        entry.day = floor_div(m, kMinutesPerDay);
        entry.minute = static_cast<int>(m - entry.day * kMinutesPerDay);
        entry.activity = e.label;
        entry.confidence = e.confidence;
        by_minute_[m] = std::move(entry);
    }
}

std::vector<TimelineEntry> Timeline::entries() const {
    std::vector<TimelineEntry> out;
    out.reserve(by_minute_.size());
    for (const auto& [m, e] : by_minute_) out.push_back(e);
    return out;
}

std::vector<TimelineEntry> record_timeline(std::span<const ActivityEvent> events, std::int64_t epoch_ms) {
    Timeline t(epoch_ms);
    for (const auto& e : events) t.record(e);
    return t.entries();
}

void write_timeline_csv(std::ostream& out, std::span<const TimelineEntry> entries) {
    out << "date,minute,activity,confidence\n";
    char conf[32];
    for (const auto& e : entries) {
        std::snprintf(conf, sizeof conf, "%.4f", e.confidence);
        out << e.date() << ',' << e.minute << ',' << e.activity << ',' << conf << '\n';
    }
}

void write_timeline_csv(const std::filesystem::path& path, std::span<const TimelineEntry> entries) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_timeline_csv(out, entries);
}

LabeledSet synthesize_histograms(std::span<const ActivityComposition> compositions,
                                 std::span<const std::string> vocabulary, std::size_t per_activity,
                                 std::size_t seq_len, double label_noise, std::uint64_t seed) {
    if (vocabulary.empty()) throw ArgumentError("histogram synthesis needs a vocabulary");
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw ArgumentError("label noise outside [0, 1]");
    LabeledSet out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any(0, vocabulary.size() - 1);

    for (const auto& comp : compositions) {
        std::vector<std::size_t> members;
        for (const auto& p : comp.patterns) {
            auto it = std::find(vocabulary.begin(), vocabulary.end(), p);
            if (it == vocabulary.end())
                throw ArgumentError("activity '" + comp.activity + "' uses unknown pattern '" + p + "'");
            members.push_back(static_cast<std::size_t>(it - vocabulary.begin()));
        }
        if (members.empty()) continue;
        const std::size_t label = out.label_names.size();
        out.label_names.push_back(comp.activity);
        for (std::size_t s = 0; s < per_activity; ++s) {
            std::vector<double> weights;
            for (std::size_t m = 0; m < members.size(); ++m) weights.push_back(jitter(rng));
            std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
            std::vector<double> counts(vocabulary.size(), 0.0);
            for (std::size_t i = 0; i < seq_len; ++i) {
                if (coin(rng) < label_noise)
                    counts[any(rng)] += 1.0;
                else
                    counts[members[pick(rng)]] += 1.0;
            }
            out.X.push_row(counts);
            out.y.push_back(label);
        }
    }
    return out;
}

}  // namespace strata
