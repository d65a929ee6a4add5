#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

namespace strata::tools {

/// Static console assets plus GET /timeline.csv, on a background thread.
class HttpUi {
public:
    HttpUi(const std::string& address, std::filesystem::path ui_dir, std::function<std::string()> timeline_csv);
    ~HttpUi();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace strata::tools
