#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/error.hpp"
#include "strata/features.hpp"
#include "strata/ingest.hpp"
#include "strata/novelty.hpp"
#include "strata/snapshot.hpp"

namespace strata {

/// Most frequent label; among tied labels the one seen most recently wins.
template <class Label>
Label majority_vote(std::span<const Label> labels) {
    if (labels.empty()) throw ArgumentError("majority vote of an empty list");
    std::map<Label, std::pair<std::size_t, std::size_t>> tally;  // count, last position
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& t = tally[labels[i]];
        ++t.first;
        t.second = i;
    }
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it)
        if (it->second.first > best->second.first ||
            (it->second.first == best->second.first && it->second.second > best->second.second))
            best = it;
    return best->first;
}

inline std::string majority_vote(std::span<const std::string> labels) { return majority_vote<std::string>(labels); }

class VoteBuffer {
public:
    /// `disjoint`: vote once per full block of `capacity`, then start over.
    explicit VoteBuffer(std::size_t capacity = 3, bool disjoint = false);

    /// Records a raw label; returns the vote when the buffer is full.
    std::optional<std::string> push(const std::string& label);
    void clear() { entries_.clear(); }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::size_t capacity_;
    bool disjoint_;
    std::deque<std::string> entries_;
};

struct RecognizerConfig {
    std::size_t vote_capacity = 3;
    bool disjoint_votes = false;
    /// Immediately ignore detected candidates (unattended replay).
    bool auto_ignore_candidates = false;
};

struct UnitPatternEvent {
    std::int64_t t_ms = 0;
    std::string raw_label;
    std::optional<std::string> voted_label;
    double confidence = 0.0;

    friend bool operator==(const UnitPatternEvent&, const UnitPatternEvent&) = default;
};

struct WindowResult {
    UnitPatternEvent event;
    double score = 0.0;
    NoveltyMode mode = NoveltyMode::Uncertain;
    std::optional<NoveltyEvent> novelty;
};

/// Per-session unit-pattern layer: GMM gating, forest classification and
/// vote smoothing. Single-threaded; snapshot swaps apply at the next window.
class UnitRecognizer {
public:
    explicit UnitRecognizer(std::shared_ptr<const ModelSnapshot> snapshot, RecognizerConfig cfg = {});

    WindowResult classify_window(const FeatureVector& fv);

    void set_snapshot(std::shared_ptr<const ModelSnapshot> snapshot);
    const std::shared_ptr<const ModelSnapshot>& snapshot() const noexcept { return snapshot_; }

    const NoveltyState& novelty_state() const noexcept { return novelty_; }
    void resolve_candidate(const CandidateDecision& decision);
    NoveltyEvent cancel_collection();

private:
    std::shared_ptr<const ModelSnapshot> snapshot_;
    RecognizerConfig cfg_;
    NoveltyState novelty_;
    VoteBuffer votes_;
};

/// windows -> features -> classify_window, one result per window step.
class UnitPipeline {
public:
    UnitPipeline(std::shared_ptr<const ModelSnapshot> snapshot, RecognizerConfig cfg = {});

    std::optional<WindowResult> push(const ImuFrame& frame);
    UnitRecognizer& recognizer() noexcept { return recognizer_; }

private:
    WindowAssembler assembler_;
    UnitRecognizer recognizer_;
};

std::vector<UnitPatternEvent> run_unit_pipeline(FrameSource& frames, std::shared_ptr<const ModelSnapshot> snapshot,
                                                RecognizerConfig cfg = {});

}  // namespace strata
