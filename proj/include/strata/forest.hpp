#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "strata/matrix.hpp"

namespace strata {

struct LabeledSet {
    Matrix X;
    std::vector<std::size_t> y;
    std::vector<std::string> label_names;

    std::size_t size() const noexcept { return y.size(); }
    void validate() const;
    LabeledSet subset(std::span<const std::size_t> rows) const;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 16;
    std::size_t min_leaf = 2;
    /// Features examined per split; 0 selects ceil(sqrt(d)).
    std::size_t mtry = 0;
    std::uint64_t seed = 0;
    /// Worker threads for tree fitting; 0 uses the hardware concurrency.
    std::size_t threads = 0;

    std::size_t resolved_mtry(std::size_t dim) const;
    void validate(std::size_t dim) const;
};

/// Split nodes send x[feature] <= threshold left. Thresholds are the largest
/// training value on the left side of the chosen gap, so any strictly
/// increasing per-feature transform maps a tree onto an equivalent tree.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::vector<std::uint32_t> class_counts;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<TreeNode> nodes, std::size_t n_features, std::size_t n_classes);

    /// Majority class of the reached leaf; ties go to the lowest label index.
    std::size_t predict(std::span<const double> x) const;
    /// Sequence of node indices visited for `x`.
    std::vector<std::size_t> path(std::span<const double> x) const;

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    std::size_t depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    const TreeNode& leaf(std::span<const double> x) const;

    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
};

struct Prediction {
    std::size_t label = 0;
    std::vector<double> probabilities;

    double confidence() const { return probabilities.at(label); }
};

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(std::vector<DecisionTree> trees, std::vector<std::string> label_names, std::size_t n_features);

    /// Vote fractions over label_names; ties go to the lowest label index.
    Prediction predict(std::span<const double> x) const;
    const std::string& label_name(std::size_t label) const { return label_names_.at(label); }

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const std::vector<std::string>& label_names() const noexcept { return label_names_; }
    std::size_t n_features() const noexcept { return n_features_; }
    bool empty() const noexcept { return trees_.empty(); }

    std::optional<double> oob_accuracy;

private:
    std::vector<DecisionTree> trees_;
    std::vector<std::string> label_names_;
    std::size_t n_features_ = 0;
};

/// n draws with replacement.
std::vector<std::size_t> bootstrap_rows(std::size_t n, std::mt19937_64& rng);

/// CART with Gini impurity over `rows` of `data` (duplicates allowed).
DecisionTree fit_tree(const LabeledSet& data, std::span<const std::size_t> rows, const ForestConfig& cfg,
                      std::mt19937_64& rng);
DecisionTree fit_tree(const LabeledSet& data, const ForestConfig& cfg, std::mt19937_64& rng);

/// Tree t uses an RNG seeded from (cfg.seed, t): bootstrap then growth.
RandomForest fit_forest(const LabeledSet& data, const ForestConfig& cfg);

double accuracy(const RandomForest& forest, const LabeledSet& data);

/// Stratified, shuffled partition; per class, fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> stratified_folds(const LabeledSet& data, std::size_t folds,
                                                       std::uint64_t seed);

struct CvResult {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
};

CvResult cross_validate(const LabeledSet& data, std::size_t folds, const ForestConfig& cfg);

}  // namespace strata
