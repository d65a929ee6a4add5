#include "strata/recognizer.hpp"

#include "strata/error.hpp"

namespace strata {

VoteBuffer::VoteBuffer(std::size_t capacity, bool disjoint) : capacity_(capacity), disjoint_(disjoint) {
    if (capacity == 0) throw ArgumentError("vote buffer capacity must be >= 1");
}

std::optional<std::string> VoteBuffer::push(const std::string& label) {
    entries_.push_back(label);
    if (entries_.size() > capacity_) entries_.pop_front();
    if (entries_.size() < capacity_) return std::nullopt;
    std::vector<std::string> labels(entries_.begin(), entries_.end());
    auto vote = majority_vote(std::span<const std::string>(labels));
    if (disjoint_) entries_.clear();
    return vote;
}

UnitRecognizer::UnitRecognizer(std::shared_ptr<const ModelSnapshot> snapshot, RecognizerConfig cfg)
    : snapshot_(std::move(snapshot)), cfg_(cfg), votes_(cfg.vote_capacity, cfg.disjoint_votes) {
    if (!snapshot_) throw StateError("recognizer needs a trained snapshot");
}

void UnitRecognizer::set_snapshot(std::shared_ptr<const ModelSnapshot> snapshot) {
    if (!snapshot) throw StateError("cannot swap in an empty snapshot");
    snapshot_ = std::move(snapshot);
}

WindowResult UnitRecognizer::classify_window(const FeatureVector& fv) {
    const auto& snap = *snapshot_;
    if (snap.unit_forest.empty() || snap.gmm.k() == 0) throw StateError("models are not trained");

    WindowResult res;
    res.score = log_pdf(snap.gmm, project_27(fv));
    if (novelty_.mode == NoveltyMode::Collecting) {
        auto next = collect_step(std::move(novelty_), fv, snap.novelty);
        novelty_ = std::move(next.state);
        res.novelty = std::move(next.event);
    } else {
        auto next = step(std::move(novelty_), res.score, fv, snap.novelty);
        novelty_ = std::move(next.state);
        res.novelty = std::move(next.event);
        if (res.novelty && cfg_.auto_ignore_candidates)
            novelty_ = strata::resolve_candidate(std::move(novelty_), IgnoreDecision{});
    }
    res.mode = novelty_.mode;

    auto pred = snap.unit_forest.predict(fv.values);
    res.event.t_ms = fv.window_start_t_ms;
    res.event.raw_label = snap.unit_forest.label_name(pred.label);
    res.event.confidence = pred.confidence();
    res.event.voted_label = votes_.push(res.event.raw_label);
    return res;
}

void UnitRecognizer::resolve_candidate(const CandidateDecision& decision) {
    novelty_ = strata::resolve_candidate(std::move(novelty_), decision);
}

NoveltyEvent UnitRecognizer::cancel_collection() {
    auto next = strata::cancel_collection(std::move(novelty_));
    novelty_ = std::move(next.state);
    return std::move(*next.event);
}

UnitPipeline::UnitPipeline(std::shared_ptr<const ModelSnapshot> snapshot, RecognizerConfig cfg)
    : assembler_(snapshot ? snapshot->window : WindowConfig{}), recognizer_(std::move(snapshot), cfg) {}

std::optional<WindowResult> UnitPipeline::push(const ImuFrame& frame) {
    auto w = assembler_.push(frame);
    if (!w) return std::nullopt;
    return recognizer_.classify_window(extract_features(*w));
}

std::vector<UnitPatternEvent> run_unit_pipeline(FrameSource& frames, std::shared_ptr<const ModelSnapshot> snapshot,
                                                RecognizerConfig cfg) {
    UnitPipeline pipeline(std::move(snapshot), cfg);
    std::vector<UnitPatternEvent> out;
    while (auto f = frames.next())
        if (auto r = pipeline.push(*f)) out.push_back(std::move(r->event));
    return out;
}

}  // namespace strata
