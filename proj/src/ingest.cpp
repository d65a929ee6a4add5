#include "strata/ingest.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "strata/error.hpp"
#include "strata/net.hpp"
#include "strata/text.hpp"

namespace strata {

namespace {

constexpr std::array<std::string_view, kChannels> kChannelNames = {
    "acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z", "roll", "pitch", "yaw"};

}  // namespace

const std::array<std::string_view, kChannels>& channel_names() { return kChannelNames; }

double ImuFrame::channel(std::size_t i) const {
    if (i < 3) return acc[i];
    if (i < 6) return gyro[i - 3];
    return orient.at(i - 6);
}

ChannelArray ImuFrame::channels() const {
    return {acc[0], acc[1], acc[2], gyro[0], gyro[1], gyro[2], orient[0], orient[1], orient[2]};
}

ImuFrame ImuFrame::from_channels(std::int64_t t_ms, const ChannelArray& v) {
    return ImuFrame{t_ms, {v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}};
}

std::string CsvSchema::header() const {
    std::string h = "t_ms";
    for (auto name : kChannelNames) {
        h += ',';
        h += name;
    }
    if (has_pattern) h += ",pattern";
    if (has_activity) h += ",activity";
    return h;
}

CsvSchema CsvSchema::from_header(std::string_view header) {
    auto cols = split(trim(header), ',');
    if (cols.size() < 1 + kChannels)
        throw FormatError("frame CSV header has " + std::to_string(cols.size()) + " columns, expected at least " +
                          std::to_string(1 + kChannels));
    if (trim(cols[0]) != "t_ms") throw FormatError("frame CSV header must start with t_ms");
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (trim(cols[i + 1]) != kChannelNames[i])
            throw FormatError("frame CSV column " + std::to_string(i + 2) + " must be " +
                              std::string(kChannelNames[i]));
    }
    CsvSchema schema;
    std::size_t next = 1 + kChannels;
    if (next < cols.size() && trim(cols[next]) == "pattern") {
        schema.has_pattern = true;
        ++next;
    }
    if (next < cols.size() && trim(cols[next]) == "activity") {
        schema.has_activity = true;
        ++next;
    }
    if (next != cols.size()) throw FormatError("unexpected frame CSV column '" + std::string(cols[next]) + "'");
    return schema;
}

CsvRecord parse_csv_record(std::string_view line, const CsvSchema& schema) {
    auto cols = split(trim(line), ',');
    if (cols.size() != schema.columns())
        throw FormatError("expected " + std::to_string(schema.columns()) + " columns, got " +
                          std::to_string(cols.size()));

    CsvRecord rec;
    std::int64_t t = 0;
    auto ts = trim(cols[0]);
    auto [tp, tec] = std::from_chars(ts.data(), ts.data() + ts.size(), t);
    if (tec != std::errc{} || tp != ts.data() + ts.size())
        throw ParseError("column 1: invalid timestamp '" + std::string(ts) + "'", 1);
    if (t < 0) throw ParseError("column 1: negative timestamp", 1);

    ChannelArray values{};
    for (std::size_t i = 0; i < kChannels; ++i) {
        auto v = parse_double(cols[i + 1]);
        if (!v || !std::isfinite(*v))
            throw ParseError("column " + std::to_string(i + 2) + ": invalid number '" + std::string(cols[i + 1]) + "'",
                             i + 2);
        values[i] = *v;
    }
    rec.frame = ImuFrame::from_channels(t, values);
    std::size_t next = 1 + kChannels;
    if (schema.has_pattern)
        if (auto v = trim(cols[next++]); !v.empty()) rec.pattern = std::string(v);
    if (schema.has_activity)
        if (auto v = trim(cols[next++]); !v.empty()) rec.activity = std::string(v);
    return rec;
}

std::string format_csv_record(const CsvRecord& rec, const CsvSchema& schema) {
    std::string line = std::to_string(rec.frame.t_ms);
    for (double v : rec.frame.channels()) {
        line += ',';
        line += format_double(v);
    }
    if (schema.has_pattern) {
        line += ',';
        line += rec.pattern.value_or("");
    }
    if (schema.has_activity) {
        line += ',';
        line += rec.activity.value_or("");
    }
    return line;
}

void write_frames_csv(std::ostream& out, std::span<const CsvRecord> records, const CsvSchema& schema) {
    out << schema.header() << '\n';
    for (const auto& r : records) out << format_csv_record(r, schema) << '\n';
}

void write_frames_csv(const std::filesystem::path& path, std::span<const CsvRecord> records,
                      const CsvSchema& schema) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_frames_csv(out, records, schema);
    if (!out) throw IoError("write failed: " + path.string());
}

CsvReplay::CsvReplay(const std::filesystem::path& path, double rate_hz, bool realtime)
    : in_(path), path_(path), rate_hz_(rate_hz), realtime_(realtime) {
    if (!(rate_hz > 0.0)) throw ArgumentError("replay rate must be positive");
    if (!in_) throw IoError("cannot open " + path.string());
    std::string header;
    if (!std::getline(in_, header)) throw FormatError(path.string() + ": missing header");
    line_ = 1;
    schema_ = CsvSchema::from_header(header);
    start_ = std::chrono::steady_clock::now();
}

std::optional<CsvRecord> CsvReplay::next_record() {
    std::string text;
    while (std::getline(in_, text)) {
        ++line_;
        if (trim(text).empty()) continue;
        CsvRecord rec;
        try {
            rec = parse_csv_record(text, schema_);
        } catch (const ParseError& e) {
            throw ParseError(path_.string() + ": row " + std::to_string(line_) + ": " + e.what(), e.column());
        } catch (const FormatError& e) {
            throw FormatError(path_.string() + ": row " + std::to_string(line_) + ": " + e.what());
        }
        if (last_t_ && rec.frame.t_ms < *last_t_)
            throw FormatError(path_.string() + ": row " + std::to_string(line_) + ": timestamp decreases");
        last_t_ = rec.frame.t_ms;
        if (realtime_) {
            auto due = start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(static_cast<double>(emitted_) / rate_hz_));
            std::this_thread::sleep_until(due);
        }
        ++emitted_;
        return rec;
    }
    if (in_.bad()) throw IoError("read failed: " + path_.string());
    return std::nullopt;
}

std::optional<ImuFrame> CsvReplay::next() {
    auto rec = next_record();
    if (!rec) return std::nullopt;
    return rec->frame;
}

std::vector<CsvRecord> read_frames_csv(const std::filesystem::path& path) {
    CsvReplay replay(path);
    std::vector<CsvRecord> out;
    while (auto rec = replay.next_record()) out.push_back(std::move(*rec));
    return out;
}

void PatternProfile::validate() const {
    if (name.empty()) throw ArgumentError("pattern profile needs a name");
    for (std::size_t i = 0; i < kChannels; ++i) {
        if (!(frequency[i] >= 0.0))
            throw ArgumentError("profile '" + name + "': negative frequency on " + std::string(kChannelNames[i]));
        if (!std::isfinite(baseline[i]) || !std::isfinite(amplitude[i]) || !std::isfinite(frequency[i]))
            throw ArgumentError("profile '" + name + "': non-finite parameter");
    }
    if (!(noise_sigma >= 0.0)) throw ArgumentError("profile '" + name + "': negative noise_sigma");
}

SynthStream::SynthStream(std::vector<SynthSegment> segments, std::uint64_t seed, double rate_hz)
    : segments_(std::move(segments)), rng_(seed), rate_hz_(rate_hz) {
    if (!(rate_hz > 0.0)) throw ArgumentError("synthesis rate must be positive");
    for (const auto& seg : segments_) {
        seg.profile.validate();
        if (!(seg.duration_s > 0.0))
            throw ArgumentError("segment '" + seg.profile.name + "' needs a positive duration");
        auto n = static_cast<std::size_t>(std::llround(seg.duration_s * rate_hz_));
        frames_per_segment_.push_back(n);
        total_ += n;
    }
}

std::optional<CsvRecord> SynthStream::next_record() {
    while (segment_ < segments_.size() && in_segment_ >= frames_per_segment_[segment_]) {
        ++segment_;
        in_segment_ = 0;
    }
    if (segment_ >= segments_.size()) return std::nullopt;

    const auto& seg = segments_[segment_];
    const auto& p = seg.profile;
    const double t = static_cast<double>(index_) / rate_hz_;
    ChannelArray values{};
    for (std::size_t c = 0; c < kChannels; ++c) {
        double v = p.baseline[c] + p.amplitude[c] * std::sin(2.0 * std::numbers::pi * p.frequency[c] * t);
        double z = noise_(rng_);
        if (p.noise_sigma > 0.0) v += p.noise_sigma * z;
        values[c] = v;
    }
    CsvRecord rec;
    rec.frame = ImuFrame::from_channels(std::llround(1000.0 * t), values);
    rec.pattern = p.name;
    rec.activity = seg.activity;
    ++index_;
    ++in_segment_;
    return rec;
}

std::optional<ImuFrame> SynthStream::next() {
    auto rec = next_record();
    if (!rec) return std::nullopt;
    return rec->frame;
}

std::vector<CsvRecord> synthesize(std::vector<SynthSegment> segments, std::uint64_t seed, double rate_hz) {
    SynthStream stream(std::move(segments), seed, rate_hz);
    std::vector<CsvRecord> out;
    out.reserve(stream.total_frames());
    while (auto rec = stream.next_record()) out.push_back(std::move(*rec));
    return out;
}

ImuFrame parse_json_frame(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("frame JSON: ") + e.what());
    }
    auto triple = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
            throw FormatError(std::string("frame JSON: '") + key + "' must be an array of 3 numbers");
        std::array<double, 3> out{};
        for (std::size_t i = 0; i < 3; ++i) {
            if (!j[key][i].is_number()) throw FormatError(std::string("frame JSON: '") + key + "' entry not numeric");
            out[i] = j[key][i].get<double>();
            if (!std::isfinite(out[i])) throw DataError(std::string("frame JSON: '") + key + "' entry not finite");
        }
        return out;
    };
    if (!j.is_object() || !j.contains("t") || !j["t"].is_number_integer())
        throw FormatError("frame JSON: 't' must be an integer");
    ImuFrame f;
    f.t_ms = j["t"].get<std::int64_t>();
    if (f.t_ms < 0) throw FormatError("frame JSON: negative timestamp");
    f.acc = triple("acc");
    f.gyro = triple("gyro");
    f.orient = triple("orient");
    return f;
}

std::string frame_to_json(const ImuFrame& f) {
    nlohmann::json j = {{"t", f.t_ms}, {"acc", f.acc}, {"gyro", f.gyro}, {"orient", f.orient}};
    return j.dump();
}

LiveSocketSource::LiveSocketSource(const std::string& address)
    : stream_(std::make_unique<TcpStream>(TcpStream::connect(Endpoint::parse(address)))) {}

LiveSocketSource::~LiveSocketSource() = default;

std::optional<ImuFrame> LiveSocketSource::next() {
    while (auto line = stream_->read_line()) {
        if (trim(*line).empty()) continue;
        return parse_json_frame(*line);
    }
    return std::nullopt;
}

}  // namespace strata
