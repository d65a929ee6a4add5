#include "strata/novelty.hpp"

#include <algorithm>
#include <cmath>

#include "strata/error.hpp"

namespace strata {

namespace {

constexpr std::size_t kMinScoresPerPattern = 20;

DensityVector centroid(const std::vector<FeatureVector>& buffer) {
    DensityVector c{};
    for (const auto& fv : buffer) {
        auto p = project_27(fv);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += p[i];
    }
    for (auto& v : c) v /= static_cast<double>(buffer.size());
    return c;
}

double distance(const DensityVector& a, const DensityVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double median_pairwise_distance(const std::vector<FeatureVector>& buffer) {
    std::vector<DensityVector> pts;
    for (const auto& fv : buffer) pts.push_back(project_27(fv));
    std::vector<double> d;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d.push_back(distance(pts[i], pts[j]));
    if (d.empty()) return 0.0;
    return quantile(std::move(d), 0.5);
}

bool is_suppressed(const NoveltyState& s) {
    if (s.suppressed.empty()) return false;
    auto c = centroid(s.run_buffer);
    return std::any_of(s.suppressed.begin(), s.suppressed.end(),
                       [&](const Suppression& sup) { return distance(c, sup.centroid) <= sup.radius; });
}

}  // namespace

void NoveltyConfig::validate() const {
    if (!(theta_new < theta_match)) throw ArgumentError("novelty config needs theta_new < theta_match");
    if (consecutive_n < 1) throw ArgumentError("novelty config needs consecutive_n >= 1");
    if (collect_target < 2) throw ArgumentError("novelty config needs collect_target >= 2");
    if (consecutive_n >= collect_target) throw ArgumentError("novelty config needs consecutive_n < collect_target");
}

const char* to_string(NoveltyMode mode) {
    switch (mode) {
        case NoveltyMode::Known: return "known";
        case NoveltyMode::Uncertain: return "uncertain";
        case NoveltyMode::CandidatePending: return "candidate_pending";
        case NoveltyMode::Collecting: return "collecting";
    }
    return "?";
}

const char* to_string(NoveltyEventKind kind) {
    switch (kind) {
        case NoveltyEventKind::NoveltyDetected: return "novelty_detected";
        case NoveltyEventKind::CollectionProgress: return "collection_progress";
        case NoveltyEventKind::CollectionComplete: return "collection_complete";
        case NoveltyEventKind::CollectionCancelled: return "collection_cancelled";
    }
    return "?";
}

NoveltyStep step(NoveltyState s, double score, const FeatureVector& fv, const NoveltyConfig& cfg) {
    if (s.mode == NoveltyMode::Collecting) throw StateError("step called while collecting; use collect_step");
    if (s.mode == NoveltyMode::CandidatePending) return {std::move(s), std::nullopt};

    if (score >= cfg.theta_match) {
        s.low_run = 0;
        s.run_buffer.clear();
        ++s.high_run;
        if (s.high_run >= cfg.consecutive_n) s.mode = NoveltyMode::Known;
        return {std::move(s), std::nullopt};
    }
    if (score >= cfg.theta_new) {
        s.low_run = 0;
        s.high_run = 0;
        s.run_buffer.clear();
        s.mode = NoveltyMode::Uncertain;
        return {std::move(s), std::nullopt};
    }

    s.high_run = 0;
    ++s.low_run;
    s.run_buffer.push_back(fv);
    if (s.low_run < cfg.consecutive_n) return {std::move(s), std::nullopt};

    if (is_suppressed(s)) {
        s.low_run = 0;
        s.run_buffer.clear();
        s.mode = NoveltyMode::Uncertain;
        return {std::move(s), std::nullopt};
    }
    NoveltyEvent ev;
    ev.kind = NoveltyEventKind::NoveltyDetected;
    ev.buffered = s.run_buffer;
    s.candidate_buffer = std::move(s.run_buffer);
    s.run_buffer.clear();
    s.low_run = 0;
    s.mode = NoveltyMode::CandidatePending;
    return {std::move(s), std::move(ev)};
}

NoveltyState resolve_candidate(NoveltyState s, const CandidateDecision& decision) {
    if (s.mode != NoveltyMode::CandidatePending)
        throw StateError(std::string("no candidate pending (mode ") + to_string(s.mode) + ")");
    if (const auto* save = std::get_if<SaveDecision>(&decision)) {
        if (save->name.empty() || save->activity.empty())
            throw ArgumentError("saving a pattern needs a pattern name and an activity name");
        s.mode = NoveltyMode::Collecting;
        s.pattern_name = save->name;
        s.activity_name = save->activity;
        return s;
    }
    if (std::holds_alternative<NotOfInterestDecision>(decision) && !s.candidate_buffer.empty())
        s.suppressed.push_back({centroid(s.candidate_buffer), median_pairwise_distance(s.candidate_buffer)});
    s.candidate_buffer.clear();
    s.mode = NoveltyMode::Uncertain;
    return s;
}

NoveltyStep collect_step(NoveltyState s, const FeatureVector& fv, const NoveltyConfig& cfg) {
    if (s.mode != NoveltyMode::Collecting)
        throw StateError(std::string("not collecting (mode ") + to_string(s.mode) + ")");
    s.candidate_buffer.push_back(fv);
    NoveltyEvent ev;
    ev.progress = s.candidate_buffer.size();
    ev.target = cfg.collect_target;
    ev.pattern_name = s.pattern_name;
    ev.activity_name = s.activity_name;
    if (s.candidate_buffer.size() < cfg.collect_target) {
        ev.kind = NoveltyEventKind::CollectionProgress;
        return {std::move(s), std::move(ev)};
    }
    ev.kind = NoveltyEventKind::CollectionComplete;
    ev.buffered = std::move(s.candidate_buffer);
    s.candidate_buffer.clear();
    s.pattern_name.reset();
    s.activity_name.reset();
    s.mode = NoveltyMode::Uncertain;
    return {std::move(s), std::move(ev)};
}

NoveltyStep cancel_collection(NoveltyState s) {
    if (s.mode != NoveltyMode::Collecting)
        throw StateError(std::string("not collecting (mode ") + to_string(s.mode) + ")");
    NoveltyEvent ev;
    ev.kind = NoveltyEventKind::CollectionCancelled;
    ev.progress = s.candidate_buffer.size();
    ev.pattern_name = s.pattern_name;
    ev.activity_name = s.activity_name;
    s.candidate_buffer.clear();
    s.pattern_name.reset();
    s.activity_name.reset();
    s.mode = NoveltyMode::Uncertain;
    return {std::move(s), std::move(ev)};
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ArgumentError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    double pos = q * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

NoveltyConfig thresholds_from_scores(const std::vector<std::vector<double>>& per_pattern, double match_quantile,
                                     double new_quantile, NoveltyConfig base) {
    if (per_pattern.empty()) throw ArgumentError("threshold calibration needs at least one pattern");
    std::vector<double> pooled;
    for (std::size_t p = 0; p < per_pattern.size(); ++p) {
        if (per_pattern[p].size() < kMinScoresPerPattern)
            throw ArgumentError("threshold calibration needs >= " + std::to_string(kMinScoresPerPattern) +
                                " scores per pattern; pattern " + std::to_string(p) + " has " +
                                std::to_string(per_pattern[p].size()));
        pooled.insert(pooled.end(), per_pattern[p].begin(), per_pattern[p].end());
    }
    base.theta_match = quantile(pooled, match_quantile);
    base.theta_new = quantile(std::move(pooled), new_quantile);
    if (!(base.theta_new < base.theta_match)) base.theta_new = base.theta_match - 1.0;
    return base;
}

NoveltyConfig calibrate_thresholds(const GmmModel& model, const std::vector<std::vector<DensityVector>>& per_pattern,
                                   double match_quantile, double new_quantile, NoveltyConfig base) {
    std::vector<std::vector<double>> scores;
    for (const auto& pts : per_pattern) {
        auto& s = scores.emplace_back();
        for (const auto& x : pts) s.push_back(log_pdf(model, x));
    }
    return thresholds_from_scores(scores, match_quantile, new_quantile, base);
}

}  // namespace strata
