#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "strata/error.hpp"
#include "strata/snapshot.hpp"

using namespace strata;

TEST_CASE("snapshot round trip predicts identically") {
    test::TempDir dir("snapshot");
    auto snap = test::starter_snapshot();
    save_snapshot(*snap, dir / "s.json");
    auto back = load_snapshot(dir / "s.json");
    CHECK(back.version == snap->version);
    CHECK(back.window == snap->window);
    CHECK(back.novelty == snap->novelty);
    CHECK(back.gmm == snap->gmm);
    CHECK(back.unit_forest.trees() == snap->unit_forest.trees());
    CHECK(back.patterns() == snap->patterns());
    CHECK(back.activities() == snap->activities());
    CHECK(serialize_snapshot(back) == serialize_snapshot(*snap));

    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        auto fv = extract_features(test::random_window(rng));
        auto a = snap->unit_forest.predict(fv.values);
        auto b = back.unit_forest.predict(fv.values);
        CHECK(a.label == b.label);
        CHECK(a.probabilities == b.probabilities);
        CHECK(log_pdf(snap->gmm, project_27(fv)) == log_pdf(back.gmm, project_27(fv)));
    }
}

TEST_CASE("truncated snapshot is a format error") {
    test::TempDir dir("snapshot");
    auto text = serialize_snapshot(*test::starter_snapshot());
    {
        std::ofstream out(dir / "t.json");
        out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_snapshot(dir / "t.json"), FormatError);
    CHECK_THROWS_AS(deserialize_snapshot(""), FormatError);
    CHECK_THROWS_AS(deserialize_snapshot("{}"), FormatError);
    CHECK_THROWS_AS(deserialize_snapshot(R"({"schema_version":1})"), FormatError);
}

TEST_CASE("newer schema versions are rejected by name") {
    auto text = serialize_snapshot(*test::starter_snapshot());
    auto pos = text.find("\"schema_version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 18, "\"schema_version\":7");
    try {
        deserialize_snapshot(text);
        FAIL("expected a compatibility error");
    } catch (const CompatibilityError& e) {
        std::string what = e.what();
        CHECK(what.find('7') != std::string::npos);
        CHECK(what.find('1') != std::string::npos);
    }
}

TEST_CASE("missing files are io errors") {
    CHECK_THROWS_AS(load_snapshot("/nonexistent/dir/s.json"), IoError);
}
