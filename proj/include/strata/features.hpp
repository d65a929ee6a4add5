#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/ingest.hpp"

namespace strata {

inline constexpr std::size_t kStatsPerChannel = 4;
inline constexpr std::size_t kFeatureDim = kChannels * kStatsPerChannel;  // 36
inline constexpr std::size_t kDensityDim = kChannels * 3;                 // 27

/// Defaults: 2 s windows at 20 Hz with 75% overlap.
struct WindowConfig {
    std::size_t window_len = 40;
    std::size_t step = 10;
    double rate_hz = kNominalRateHz;

    void validate() const;
    double step_ms() const { return 1000.0 * static_cast<double>(step) / rate_hz; }
    friend bool operator==(const WindowConfig&, const WindowConfig&) = default;
};

struct Window {
    std::int64_t start_t_ms = 0;
    std::vector<ChannelArray> samples;  // window_len rows
};

/// Per channel, in canonical channel order: mean, median, variance, mean crossings.
struct FeatureVector {
    std::array<double, kFeatureDim> values{};
    std::int64_t window_start_t_ms = 0;

    double mean(std::size_t channel) const { return values[channel * 4]; }
    double median(std::size_t channel) const { return values[channel * 4 + 1]; }
    double variance(std::size_t channel) const { return values[channel * 4 + 2]; }
    double crossings(std::size_t channel) const { return values[channel * 4 + 3]; }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using DensityVector = std::array<double, kDensityDim>;

/// Stateful window assembly over a frame stream. Window i covers samples
/// [i*step, i*step + window_len); partial trailing windows never appear.
class WindowAssembler {
public:
    explicit WindowAssembler(WindowConfig cfg = {});

    std::optional<Window> push(const ImuFrame& frame);
    void reset();
    const WindowConfig& config() const noexcept { return cfg_; }

private:
    WindowConfig cfg_;
    std::deque<ImuFrame> buffer_;
    std::size_t seen_ = 0;
};

std::vector<Window> windows(std::span<const ImuFrame> frames, const WindowConfig& cfg = {});
std::size_t window_count(std::size_t frames, const WindowConfig& cfg = {});

/// Adjacent pairs straddling `mu` strictly; samples equal to `mu` break a crossing.
std::size_t mean_crossings(std::span<const double> x, double mu);

FeatureVector extract_features(const Window& w);

/// Drops the crossing counts: (mean, median, variance) per channel.
DensityVector project_27(const FeatureVector& fv);
/// Accepts a 36-dim feature vector (projected) or a 27-dim one (passed through).
DensityVector project_27(std::span<const double> values);

/// Feature dump CSV: window_start_t_ms,f0..f35[,pattern]
struct FeatureRow {
    FeatureVector features;
    std::optional<std::string> pattern;
};

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows, bool with_pattern);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

}  // namespace strata
