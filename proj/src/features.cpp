#include "strata/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "strata/error.hpp"
#include "strata/text.hpp"

namespace strata {

void WindowConfig::validate() const {
    if (window_len == 0 || step == 0 || step > window_len)
        throw ArgumentError("window config needs 0 < step <= window_len (got step " + std::to_string(step) +
                            ", window_len " + std::to_string(window_len) + ")");
    if (!(rate_hz > 0.0)) throw ArgumentError("window config needs a positive rate");
}

WindowAssembler::WindowAssembler(WindowConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::optional<Window> WindowAssembler::push(const ImuFrame& frame) {
    buffer_.push_back(frame);
    ++seen_;
    if (buffer_.size() > cfg_.window_len) buffer_.pop_front();
    if (seen_ < cfg_.window_len || (seen_ - cfg_.window_len) % cfg_.step != 0) return std::nullopt;

    Window w;
    w.start_t_ms = buffer_.front().t_ms;
    w.samples.reserve(cfg_.window_len);
    for (const auto& f : buffer_) w.samples.push_back(f.channels());
    return w;
}

void WindowAssembler::reset() {
    buffer_.clear();
    seen_ = 0;
}

std::vector<Window> windows(std::span<const ImuFrame> frames, const WindowConfig& cfg) {
    WindowAssembler assembler(cfg);
    std::vector<Window> out;
    for (const auto& f : frames)
        if (auto w = assembler.push(f)) out.push_back(std::move(*w));
    return out;
}

std::size_t window_count(std::size_t frames, const WindowConfig& cfg) {
    if (frames < cfg.window_len) return 0;
    return (frames - cfg.window_len) / cfg.step + 1;
}

std::size_t mean_crossings(std::span<const double> x, double mu) {
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        if ((x[i] - mu) * (x[i + 1] - mu) < 0.0) ++count;
    return count;
}

FeatureVector extract_features(const Window& w) {
    const std::size_t n = w.samples.size();
    if (n == 0) throw ArgumentError("empty window");

    FeatureVector fv;
    fv.window_start_t_ms = w.start_t_ms;
    std::vector<double> column(n);
    std::vector<double> sorted(n);
    for (std::size_t c = 0; c < kChannels; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = w.samples[i][c];
            if (!std::isfinite(v))
                throw DataError("non-finite value in channel " + std::string(channel_names()[c]) + " at sample " +
                                std::to_string(i));
            column[i] = v;
        }
        double sum = 0.0;
        for (double v : column) sum += v;
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (double v : column) ss += (v - mean) * (v - mean);

        sorted = column;
        auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(sorted.begin(), mid, sorted.end());
        double median = *mid;
        if (n % 2 == 0) median = 0.5 * (median + *std::max_element(sorted.begin(), mid));

        fv.values[c * 4 + 0] = mean;
        fv.values[c * 4 + 1] = median;
        fv.values[c * 4 + 2] = ss / static_cast<double>(n);
        fv.values[c * 4 + 3] = static_cast<double>(mean_crossings(column, mean));
    }
    return fv;
}

DensityVector project_27(const FeatureVector& fv) { return project_27(std::span<const double>(fv.values)); }

DensityVector project_27(std::span<const double> values) {
    DensityVector out{};
    if (values.size() == kDensityDim) {
        std::copy(values.begin(), values.end(), out.begin());
        return out;
    }
    if (values.size() != kFeatureDim)
        throw ArgumentError("expected a " + std::to_string(kFeatureDim) + "- or " + std::to_string(kDensityDim) +
                            "-dim vector, got " + std::to_string(values.size()));
    for (std::size_t c = 0; c < kChannels; ++c)
        for (std::size_t s = 0; s < 3; ++s) out[c * 3 + s] = values[c * 4 + s];
    return out;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows, bool with_pattern) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "window_start_t_ms";
    for (std::size_t i = 0; i < kFeatureDim; ++i) out << ",f" << i;
    if (with_pattern) out << ",pattern";
    out << '\n';
    for (const auto& row : rows) {
        out << row.features.window_start_t_ms;
        for (double v : row.features.values) out << ',' << format_double(v);
        if (with_pattern) out << ',' << row.pattern.value_or("");
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
    auto header = split(trim(line), ',');
    if (header.empty() || trim(header[0]) != "window_start_t_ms" || header.size() < 1 + kFeatureDim)
        throw FormatError(path.string() + ": not a feature CSV");
    for (std::size_t i = 0; i < kFeatureDim; ++i)
        if (trim(header[i + 1]) != "f" + std::to_string(i))
            throw FormatError(path.string() + ": feature column " + std::to_string(i + 2) + " must be f" +
                              std::to_string(i));
    const bool with_pattern = header.size() == kFeatureDim + 2;
    if (header.size() > kFeatureDim + 2 || (with_pattern && trim(header.back()) != "pattern"))
        throw FormatError(path.string() + ": unexpected trailing columns");

    std::vector<FeatureRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != header.size())
            throw FormatError(path.string() + ": row " + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " columns, got " + std::to_string(cols.size()));
        FeatureRow row;
        auto t = parse_double(cols[0]);
        if (!t) throw ParseError(path.string() + ": row " + std::to_string(lineno) + ": column 1 not numeric", 1);
        row.features.window_start_t_ms = static_cast<std::int64_t>(*t);
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            auto v = parse_double(cols[i + 1]);
            if (!v || !std::isfinite(*v))
                throw ParseError(path.string() + ": row " + std::to_string(lineno) + ": column " +
                                     std::to_string(i + 2) + " not numeric",
                                 i + 2);
            row.features.values[i] = *v;
        }
        if (with_pattern && !trim(cols.back()).empty()) row.pattern = std::string(trim(cols.back()));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace strata
