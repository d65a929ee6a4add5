#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strata {

inline constexpr std::size_t kChannels = 9;
inline constexpr double kNominalRateHz = 20.0;

using ChannelArray = std::array<double, kChannels>;

/// Canonical channel order: acc xyz (g), gyro xyz (deg/s), roll/pitch/yaw (rad).
const std::array<std::string_view, kChannels>& channel_names();

struct ImuFrame {
    std::int64_t t_ms = 0;
    std::array<double, 3> acc{};
    std::array<double, 3> gyro{};
    std::array<double, 3> orient{};

    double channel(std::size_t i) const;
    ChannelArray channels() const;
    static ImuFrame from_channels(std::int64_t t_ms, const ChannelArray& values);

    friend bool operator==(const ImuFrame&, const ImuFrame&) = default;
};

/// Column layout of a frame CSV. The nine channel columns are fixed; the
/// label columns are optional and trail them.
struct CsvSchema {
    bool has_pattern = false;
    bool has_activity = false;

    std::size_t columns() const { return 1 + kChannels + has_pattern + has_activity; }
    std::string header() const;

    /// Throws FormatError when the header does not follow the canonical layout.
    static CsvSchema from_header(std::string_view header);
};

struct CsvRecord {
    ImuFrame frame;
    std::optional<std::string> pattern;
    std::optional<std::string> activity;
};

/// Parses one data row. Column indices in ParseError are 1-based.
CsvRecord parse_csv_record(std::string_view line, const CsvSchema& schema);
std::string format_csv_record(const CsvRecord& record, const CsvSchema& schema);

void write_frames_csv(std::ostream& out, std::span<const CsvRecord> records, const CsvSchema& schema);
void write_frames_csv(const std::filesystem::path& path, std::span<const CsvRecord> records,
                      const CsvSchema& schema);

/// Pull-style frame stream. `next()` returns nullopt once exhausted.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<ImuFrame> next() = 0;
};

/// Replays a canonical frame CSV in file order, optionally paced at `rate_hz`.
class CsvReplay : public FrameSource {
public:
    CsvReplay(const std::filesystem::path& path, double rate_hz = kNominalRateHz, bool realtime = false);

    std::optional<ImuFrame> next() override;
    std::optional<CsvRecord> next_record();

    const CsvSchema& schema() const noexcept { return schema_; }
    /// 1-based file line of the most recently read row (header is line 1).
    std::size_t line() const noexcept { return line_; }

private:
    std::ifstream in_;
    std::filesystem::path path_;
    CsvSchema schema_;
    double rate_hz_;
    bool realtime_;
    std::size_t line_ = 0;
    std::size_t emitted_ = 0;
    std::optional<std::int64_t> last_t_;
    std::chrono::steady_clock::time_point start_;
};

std::vector<CsvRecord> read_frames_csv(const std::filesystem::path& path);

/// Per-channel sinusoid-plus-noise description of one unit pattern.
struct PatternProfile {
    std::string name;
    ChannelArray baseline{};
    ChannelArray amplitude{};
    ChannelArray frequency{};
    double noise_sigma = 0.0;
    std::vector<std::string> activities;

    void validate() const;
    friend bool operator==(const PatternProfile&, const PatternProfile&) = default;
};

struct SynthSegment {
    PatternProfile profile;
    double duration_s = 0.0;
    std::optional<std::string> activity;
};

/// Deterministic synthetic stream: round(duration * rate) frames per segment,
/// timestamps continuous across segments.
class SynthStream : public FrameSource {
public:
    SynthStream(std::vector<SynthSegment> segments, std::uint64_t seed, double rate_hz = kNominalRateHz);

    std::optional<ImuFrame> next() override;
    std::optional<CsvRecord> next_record();

    std::size_t total_frames() const noexcept { return total_; }

private:
    std::vector<SynthSegment> segments_;
    std::vector<std::size_t> frames_per_segment_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> noise_{0.0, 1.0};
    double rate_hz_;
    std::size_t segment_ = 0;
    std::size_t in_segment_ = 0;
    std::size_t index_ = 0;
    std::size_t total_ = 0;
};

/// Convenience: drains a synthetic stream into labeled records.
std::vector<CsvRecord> synthesize(std::vector<SynthSegment> segments, std::uint64_t seed,
                                  double rate_hz = kNominalRateHz);

/// Live-source wire format: {"t":int,"acc":[f,f,f],"gyro":[f,f,f],"orient":[f,f,f]}
ImuFrame parse_json_frame(std::string_view line);
std::string frame_to_json(const ImuFrame& frame);

class TcpStream;

/// Reads newline-delimited JSON frames from a TCP endpoint ("host:port").
class LiveSocketSource : public FrameSource {
public:
    explicit LiveSocketSource(const std::string& address);
    ~LiveSocketSource() override;

    std::optional<ImuFrame> next() override;

private:
    std::unique_ptr<TcpStream> stream_;
};

}  // namespace strata
