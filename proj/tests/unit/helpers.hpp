#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "strata/corpus.hpp"
#include "strata/features.hpp"
#include "strata/registry.hpp"

namespace strata::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("strata-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Window random_window(std::mt19937_64& rng, std::size_t len = 40) {
    std::normal_distribution<double> n(0.0, 1.0);
    Window w;
    for (std::size_t i = 0; i < len; ++i) {
        ChannelArray row;
        for (auto& v : row) v = n(rng) * 3.0 + 0.5;
        w.samples.push_back(row);
    }
    return w;
}

/// Registry holding `patterns` windowed from `seconds` of each starter profile.
inline PatternRegistry starter_registry(double seconds = 65.0, std::uint64_t seed = 7, std::size_t patterns = 9) {
    auto set = starter_profiles();
    set.patterns.resize(std::min(patterns, set.patterns.size()));
    auto reg = registry_from_records(synthesize(corpus_segments(set, seconds), seed));
    for (const auto& comp : set.compositions())
        for (const auto& name : comp.patterns)
            if (reg.contains(name)) reg.associate(name, comp.activity);
    return reg;
}

inline std::shared_ptr<const ModelSnapshot> starter_snapshot(std::uint64_t seed = 3, std::size_t trees = 30) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.unit_forest.n_trees = trees;
    cfg.activity_forest.n_trees = trees;
    return std::make_shared<const ModelSnapshot>(retrain(starter_registry(), cfg));
}

}  // namespace strata::test
