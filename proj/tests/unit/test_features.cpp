#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "strata/error.hpp"
#include "strata/features.hpp"

using namespace strata;

namespace {

// Independent reference: sort for the median, two-pass variance.
std::array<double, kFeatureDim> brute_force(const Window& w) {
    std::array<double, kFeatureDim> out{};
    const std::size_t n = w.samples.size();
    for (std::size_t c = 0; c < kChannels; ++c) {
        std::vector<double> x;
        for (const auto& row : w.samples) x.push_back(row[c]);
        long double sum = 0;
        for (double v : x) sum += v;
        double mean = static_cast<double>(sum / n);
        auto sorted = x;
        std::sort(sorted.begin(), sorted.end());
        double median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
        long double ss = 0;
        for (double v : x) ss += (v - mean) * (v - mean);
        double var = static_cast<double>(ss / n);
        int crossings = 0;
        for (std::size_t i = 0; i + 1 < n; ++i)
            if ((x[i] - mean) * (x[i + 1] - mean) < 0) ++crossings;
        out[c * 4] = mean;
        out[c * 4 + 1] = median;
        out[c * 4 + 2] = var;
        out[c * 4 + 3] = crossings;
    }
    return out;
}

std::vector<ImuFrame> frames(std::size_t n) {
    std::vector<ImuFrame> f;
    for (std::size_t i = 0; i < n; ++i) {
        ChannelArray c{};
        c.fill(static_cast<double>(i));
        f.push_back(ImuFrame::from_channels(static_cast<std::int64_t>(i) * 50, c));
    }
    return f;
}

}  // namespace

TEST_CASE("features match a brute-force reference") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        auto w = test::random_window(rng, t % 2 ? 40 : 41);
        auto fv = extract_features(w);
        auto ref = brute_force(w);
        for (std::size_t i = 0; i < kFeatureDim; ++i) CHECK(std::abs(fv.values[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("constant window") {
    Window w;
    for (int i = 0; i < 40; ++i) w.samples.push_back(ChannelArray{1, 1, 1, 1, 1, 1, 1, 1, 1});
    auto fv = extract_features(w);
    for (std::size_t c = 0; c < kChannels; ++c) {
        CHECK(fv.mean(c) == 1.0);
        CHECK(fv.median(c) == 1.0);
        CHECK(fv.variance(c) == 0.0);
        CHECK(fv.crossings(c) == 0.0);
    }
}

TEST_CASE("mean crossings are strict") {
    std::vector<double> alt{1, -1, 1, -1};
    CHECK(mean_crossings(alt, 0.0) == 3);
    std::vector<double> touching{1, 0, -1, 0, 1};
    CHECK(mean_crossings(touching, 0.0) == 0);
    std::vector<double> flat{2, 2, 2};
    CHECK(mean_crossings(flat, 2.0) == 0);
}

TEST_CASE("non-finite samples are rejected with the channel name") {
    Window w;
    for (int i = 0; i < 40; ++i) w.samples.push_back(ChannelArray{});
    w.samples[7][4] = std::nan("");
    try {
        extract_features(w);
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("gyro_y") != std::string::npos);
    }
}

TEST_CASE("window counts and offsets") {
    CHECK(window_count(39) == 0);
    CHECK(window_count(40) == 1);
    CHECK(window_count(49) == 1);
    CHECK(window_count(50) == 2);
    CHECK(window_count(100) == 7);
    auto ws = windows(frames(100));
    REQUIRE(ws.size() == 7);
    for (std::size_t i = 0; i < ws.size(); ++i) {
        CHECK(ws[i].start_t_ms == static_cast<std::int64_t>(i) * 500);
        CHECK(ws[i].samples.front()[0] == static_cast<double>(i * 10));
        CHECK(ws[i].samples.size() == 40);
    }
}

TEST_CASE("assembler matches batch windowing") {
    auto f = frames(137);
    WindowAssembler a(WindowConfig{40, 7, 20.0});
    std::vector<Window> streamed;
    for (const auto& x : f)
        if (auto w = a.push(x)) streamed.push_back(*w);
    auto batch = windows(f, WindowConfig{40, 7, 20.0});
    REQUIRE(streamed.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(streamed[i].start_t_ms == batch[i].start_t_ms);
        CHECK(streamed[i].samples == batch[i].samples);
    }
}

TEST_CASE("window config validation") {
    CHECK_THROWS_AS((WindowConfig{40, 0, 20.0}.validate()), ArgumentError);
    CHECK_THROWS_AS((WindowConfig{40, 41, 20.0}.validate()), ArgumentError);
    CHECK_NOTHROW((WindowConfig{40, 40, 20.0}.validate()));
}

TEST_CASE("density projection drops crossings") {
    FeatureVector fv;
    for (std::size_t i = 0; i < kFeatureDim; ++i) fv.values[i] = static_cast<double>(i);
    auto d = project_27(fv);
    for (std::size_t c = 0; c < kChannels; ++c) {
        CHECK(d[c * 3] == fv.mean(c));
        CHECK(d[c * 3 + 1] == fv.median(c));
        CHECK(d[c * 3 + 2] == fv.variance(c));
    }
    CHECK(project_27(std::span<const double>(d)) == d);
    std::vector<double> bad(10);
    CHECK_THROWS_AS(project_27(bad), ArgumentError);
}

TEST_CASE("feature csv round trip is lossless") {
    test::TempDir dir("features");
    std::mt19937_64 rng(2);
    std::vector<FeatureRow> rows;
    for (int i = 0; i < 30; ++i) {
        auto fv = extract_features(test::random_window(rng));
        fv.window_start_t_ms = i * 500;
        rows.push_back({fv, i % 3 ? std::optional<std::string>("p" + std::to_string(i % 3)) : std::nullopt});
    }
    write_feature_csv(dir / "x.csv", rows, true);
    auto back = read_feature_csv(dir / "x.csv");
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].features == rows[i].features);
        CHECK(back[i].pattern == rows[i].pattern);
    }
}
