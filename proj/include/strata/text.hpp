#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace strata {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::optional<double> parse_double(std::string_view s);

/// 17 significant digits: lossless for any double.
std::string format_double(double v);

}  // namespace strata
