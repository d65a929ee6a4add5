#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "strata/corpus.hpp"
#include "strata/error.hpp"

using namespace strata;

TEST_CASE("starter vocabulary") {
    auto set = starter_profiles();
    CHECK(set.names() == std::vector<std::string>{"shooting", "walking", "running", "dribbling", "guitar_sitting",
                                                  "guitar_standing", "guitar_foot_on_chair", "idle_sitting",
                                                  "idle_standing"});
    for (const auto& p : set.patterns) CHECK_NOTHROW(p.validate());
    auto comps = set.compositions();
    REQUIRE(comps.size() == 3);
    std::map<std::string, std::set<std::string>> got;
    for (const auto& c : comps) got[c.activity] = {c.patterns.begin(), c.patterns.end()};
    CHECK(got["LIVE_CONCERT"] ==
          std::set<std::string>{"guitar_standing", "guitar_foot_on_chair", "guitar_sitting", "running", "walking"});
    CHECK(got["GUITAR_PRACTICE"] == std::set<std::string>{"guitar_sitting", "idle_sitting"});
    CHECK(got["PLAY_BASKETBALL"] == std::set<std::string>{"running", "walking", "shooting", "dribbling"});
}

TEST_CASE("shipped profile file matches the built-in set") {
    auto shipped = load_profiles(std::filesystem::path(STRATA_DATA_DIR) / "starter_profiles.json");
    CHECK(shipped == starter_profiles());
}

TEST_CASE("profile json round trip") {
    auto set = starter_profiles();
    set.patterns.push_back(outlier_profile());
    CHECK(parse_profiles(profiles_to_json(set)) == set);
    CHECK_THROWS_AS(parse_profiles("{\"patterns\":[{\"name\":\"x\"}]}"), FormatError);
    CHECK_THROWS_AS(parse_profiles(R"({"patterns":[],"script":[{"activity":"A","seconds":1,"patterns":["nope"]}]})"),
                    ArgumentError);
}

TEST_CASE("script segments") {
    auto set = starter_profiles();
    auto once = script_segments(set, set.script, 0.0, 1);
    CHECK(once.size() == 11);
    double total = 0;
    for (const auto& s : once) total += s.duration_s;
    CHECK(total == doctest::Approx(180.0));
    CHECK(*once.front().activity == "PLAY_BASKETBALL");
    CHECK(*once.back().activity == "LIVE_CONCERT");

    auto cycled = script_segments(set, set.script, 390.0, 1);
    total = 0;
    for (const auto& s : cycled) total += s.duration_s;
    CHECK(total == doctest::Approx(390.0));
    CHECK(*cycled.back().activity == "PLAY_BASKETBALL");
    CHECK(script_segments(set, set.script, 390.0, 1).size() == cycled.size());
}

TEST_CASE("outlier profile is far from every starter pattern") {
    auto out = outlier_profile();
    for (const auto& p : starter_profiles().patterns) {
        double gap = 0;
        for (std::size_t c = 0; c < kChannels; ++c) gap = std::max(gap, std::abs(out.baseline[c] - p.baseline[c]));
        CHECK(gap >= 10 * std::max(out.noise_sigma, p.noise_sigma));
    }
}
