#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "strata/features.hpp"
#include "strata/gmm.hpp"

namespace strata {

/// Scores are GMM log-densities of the 27-dim projection.
struct NoveltyConfig {
    double theta_match = 0.0;
    double theta_new = -1.0;
    std::size_t consecutive_n = 3;
    std::size_t collect_target = 120;

    void validate() const;
    friend bool operator==(const NoveltyConfig&, const NoveltyConfig&) = default;
};

enum class NoveltyMode { Known, Uncertain, CandidatePending, Collecting };

const char* to_string(NoveltyMode mode);

/// A region the operator marked as not interesting.
struct Suppression {
    DensityVector centroid{};
    double radius = 0.0;
};

struct NoveltyState {
    NoveltyMode mode = NoveltyMode::Uncertain;
    std::size_t low_run = 0;
    std::size_t high_run = 0;
    /// Windows of the current sub-theta_new run (at most consecutive_n).
    std::vector<FeatureVector> run_buffer;
    /// Candidate (CandidatePending) or collected (Collecting) windows.
    std::vector<FeatureVector> candidate_buffer;
    std::vector<Suppression> suppressed;
    std::optional<std::string> pattern_name;
    std::optional<std::string> activity_name;
};

enum class NoveltyEventKind { NoveltyDetected, CollectionProgress, CollectionComplete, CollectionCancelled };

const char* to_string(NoveltyEventKind kind);

struct NoveltyEvent {
    NoveltyEventKind kind = NoveltyEventKind::NoveltyDetected;
    std::size_t progress = 0;
    std::size_t target = 0;
    /// Filled for NoveltyDetected (the triggering windows) and CollectionComplete.
    std::vector<FeatureVector> buffered;
    std::optional<std::string> pattern_name;
    std::optional<std::string> activity_name;
};

struct NoveltyStep {
    NoveltyState state;
    std::optional<NoveltyEvent> event;
};

/// Advances the dual-threshold state machine by one window. A no-op while a
/// candidate awaits a decision. Must not be called while Collecting.
NoveltyStep step(NoveltyState state, double score, const FeatureVector& fv, const NoveltyConfig& cfg);

struct SaveDecision {
    std::string name;
    std::string activity;
};
struct IgnoreDecision {};
struct NotOfInterestDecision {};
using CandidateDecision = std::variant<SaveDecision, IgnoreDecision, NotOfInterestDecision>;

NoveltyState resolve_candidate(NoveltyState state, const CandidateDecision& decision);

NoveltyStep collect_step(NoveltyState state, const FeatureVector& fv, const NoveltyConfig& cfg);
NoveltyStep cancel_collection(NoveltyState state);

/// Linear-interpolated quantile (q in [0, 1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// theta_match / theta_new as quantiles of the pooled training scores.
NoveltyConfig thresholds_from_scores(const std::vector<std::vector<double>>& per_pattern_scores,
                                     double match_quantile = 0.05, double new_quantile = 0.001,
                                     NoveltyConfig base = {});

/// Scores every pattern's training windows against `model`, then calibrates.
NoveltyConfig calibrate_thresholds(const GmmModel& model, const std::vector<std::vector<DensityVector>>& per_pattern,
                                   double match_quantile = 0.05, double new_quantile = 0.001,
                                   NoveltyConfig base = {});

}  // namespace strata
