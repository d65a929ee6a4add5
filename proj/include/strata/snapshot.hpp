#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "strata/features.hpp"
#include "strata/forest.hpp"
#include "strata/gmm.hpp"
#include "strata/novelty.hpp"

namespace strata {

inline constexpr int kSnapshotSchemaVersion = 1;

/// Immutable bundle of every trained model plus the vocabularies and
/// configuration needed to run it. Shared between threads by const pointer.
struct ModelSnapshot {
    std::uint64_t version = 0;
    WindowConfig window;
    NoveltyConfig novelty;
    std::size_t seq_len = 120;
    GmmModel gmm;
    RandomForest unit_forest;
    std::optional<RandomForest> activity_forest;

    const std::vector<std::string>& patterns() const { return unit_forest.label_names(); }
    std::vector<std::string> activities() const;
};

std::string serialize_snapshot(const ModelSnapshot& snapshot);
ModelSnapshot deserialize_snapshot(std::string_view text);

void save_snapshot(const ModelSnapshot& snapshot, const std::filesystem::path& path);
ModelSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace strata
