#include <doctest.h>

#include <random>

#include "strata/error.hpp"
#include "strata/novelty.hpp"

using namespace strata;

namespace {

FeatureVector fv_at(double v) {
    FeatureVector fv;
    fv.values.fill(v);
    return fv;
}

// Detections expected when every detection is immediately ignored: a run of
// sub-threshold scores fires each time its length reaches a multiple of n.
std::vector<std::size_t> scan(const std::vector<double>& scores, double theta_new, std::size_t n) {
    std::vector<std::size_t> hits;
    std::size_t run = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        run = scores[i] < theta_new ? run + 1 : 0;
        if (run > 0 && run % n == 0) hits.push_back(i);
    }
    return hits;
}

}  // namespace

TEST_CASE("config validation") {
    NoveltyConfig c;
    CHECK_NOTHROW(c.validate());
    c.theta_new = c.theta_match;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
    c = {};
    c.consecutive_n = 120;
    CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("three consecutive low scores trigger a prompt") {
    NoveltyConfig cfg{0.0, -1.0, 3, 120};
    NoveltyState s;
    for (int i = 0; i < 2; ++i) {
        auto r = step(s, -5.0, fv_at(i), cfg);
        CHECK_FALSE(r.event);
        s = r.state;
    }
    auto r = step(s, -5.0, fv_at(2), cfg);
    REQUIRE(r.event);
    CHECK(r.event->kind == NoveltyEventKind::NoveltyDetected);
    CHECK(r.event->buffered.size() == 3);
    CHECK(r.state.mode == NoveltyMode::CandidatePending);
}

TEST_CASE("intermediate scores break a run") {
    NoveltyConfig cfg{0.0, -1.0, 3, 120};
    NoveltyState s;
    s = step(s, -5, fv_at(0), cfg).state;
    s = step(s, -5, fv_at(0), cfg).state;
    s = step(s, -0.5, fv_at(0), cfg).state;
    CHECK(s.low_run == 0);
    CHECK(s.mode == NoveltyMode::Uncertain);
    auto r = step(s, -5, fv_at(0), cfg);
    CHECK_FALSE(r.event);
}

TEST_CASE("high scores reach Known after n windows") {
    NoveltyConfig cfg{0.0, -1.0, 3, 120};
    NoveltyState s;
    s = step(s, 1, fv_at(0), cfg).state;
    s = step(s, 1, fv_at(0), cfg).state;
    CHECK(s.mode == NoveltyMode::Uncertain);
    s = step(s, 1, fv_at(0), cfg).state;
    CHECK(s.mode == NoveltyMode::Known);
    s = step(s, -0.5, fv_at(0), cfg).state;
    CHECK(s.mode == NoveltyMode::Uncertain);
}

TEST_CASE("pending candidates ignore further windows") {
    NoveltyConfig cfg{0.0, -1.0, 2, 120};
    NoveltyState s;
    s = step(s, -5, fv_at(0), cfg).state;
    s = step(s, -5, fv_at(0), cfg).state;
    REQUIRE(s.mode == NoveltyMode::CandidatePending);
    for (int i = 0; i < 5; ++i) {
        auto r = step(s, -5, fv_at(0), cfg);
        CHECK_FALSE(r.event);
        s = r.state;
    }
    CHECK(s.candidate_buffer.size() == 2);
}

TEST_CASE("save then collect to the target") {
    NoveltyConfig cfg{0.0, -1.0, 3, 10};
    NoveltyState s;
    for (int i = 0; i < 3; ++i) s = step(s, -5, fv_at(i), cfg).state;
    CHECK_THROWS_AS(resolve_candidate(s, SaveDecision{"", "X"}), ArgumentError);
    s = resolve_candidate(s, SaveDecision{"boxing", "WORKOUT"});
    CHECK(s.mode == NoveltyMode::Collecting);
    CHECK_THROWS_AS(step(s, 1, fv_at(0), cfg), StateError);
    std::vector<std::size_t> progress;
    std::optional<NoveltyEvent> done;
    while (!done) {
        auto r = collect_step(s, fv_at(9), cfg);
        s = r.state;
        if (r.event->kind == NoveltyEventKind::CollectionComplete)
            done = r.event;
        else
            progress.push_back(r.event->progress);
    }
    CHECK(progress == std::vector<std::size_t>{4, 5, 6, 7, 8, 9});
    CHECK(done->buffered.size() == 10);
    CHECK(*done->pattern_name == "boxing");
    CHECK(*done->activity_name == "WORKOUT");
    CHECK(s.mode == NoveltyMode::Uncertain);
}

TEST_CASE("cancel discards collected windows") {
    NoveltyConfig cfg{0.0, -1.0, 3, 10};
    NoveltyState s;
    for (int i = 0; i < 3; ++i) s = step(s, -5, fv_at(i), cfg).state;
    s = resolve_candidate(s, SaveDecision{"x", "Y"});
    s = collect_step(s, fv_at(0), cfg).state;
    auto r = cancel_collection(s);
    CHECK(r.event->kind == NoveltyEventKind::CollectionCancelled);
    CHECK(r.event->progress == 4);
    CHECK(r.state.candidate_buffer.empty());
    CHECK(r.state.mode == NoveltyMode::Uncertain);
    CHECK_THROWS_AS(cancel_collection(r.state), StateError);
}

TEST_CASE("decisions outside CandidatePending are state errors") {
    NoveltyState s;
    CHECK_THROWS_AS(resolve_candidate(s, IgnoreDecision{}), StateError);
    s.mode = NoveltyMode::Known;
    try {
        resolve_candidate(s, SaveDecision{"a", "b"});
        FAIL("expected a state error");
    } catch (const StateError& e) {
        CHECK(std::string(e.what()).find("known") != std::string::npos);
    }
}

TEST_CASE("not of interest suppresses similar runs") {
    NoveltyConfig cfg{0.0, -1.0, 3, 120};
    NoveltyState s;
    for (int i = 0; i < 3; ++i) s = step(s, -5, fv_at(1.0 + 0.01 * i), cfg).state;
    s = resolve_candidate(s, NotOfInterestDecision{});
    REQUIRE(s.suppressed.size() == 1);
    bool fired = false;
    for (int i = 0; i < 9; ++i) {
        auto r = step(s, -5, fv_at(1.0 + 0.005 * (i % 3)), cfg);
        fired |= r.event.has_value();
        s = r.state;
    }
    CHECK_FALSE(fired);
    // A distant run still fires.
    for (int i = 0; i < 3; ++i) {
        auto r = step(s, -5, fv_at(100.0), cfg);
        fired |= r.event.has_value();
        s = r.state;
    }
    CHECK(fired);
}

TEST_CASE("detections match a brute-force scan") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-3, 1);
    for (int t = 0; t < 2000; ++t) {
        NoveltyConfig cfg{0.0, -1.0, 1 + static_cast<std::size_t>(t % 4), 120};
        std::vector<double> scores(5 + t % 40);
        for (auto& v : scores) v = u(rng);
        NoveltyState s;
        std::vector<std::size_t> hits;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            auto r = step(s, scores[i], fv_at(0), cfg);
            s = r.state;
            if (r.event) {
                hits.push_back(i);
                s = resolve_candidate(s, IgnoreDecision{});
            }
        }
        CHECK(hits == scan(scores, cfg.theta_new, cfg.consecutive_n));
    }
}

TEST_CASE("quantiles and threshold calibration") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3);
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({1, 2, 3, 4}, 0.0) == 1);
    CHECK(quantile({1, 2, 3, 4}, 1.0) == 4);
    CHECK_THROWS_AS(quantile({}, 0.5), ArgumentError);

    std::vector<std::vector<double>> scores(2);
    for (int i = 0; i < 100; ++i) {
        scores[0].push_back(i);
        scores[1].push_back(100 + i);
    }
    auto cfg = thresholds_from_scores(scores, 0.05, 0.001);
    CHECK(cfg.theta_match == doctest::Approx(quantile([&] {
        std::vector<double> all(scores[0]);
        all.insert(all.end(), scores[1].begin(), scores[1].end());
        return all;
    }(), 0.05)));
    CHECK(cfg.theta_new < cfg.theta_match);
    scores[1].resize(5);
    CHECK_THROWS_AS(thresholds_from_scores(scores), ArgumentError);
}
