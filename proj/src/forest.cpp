#include "strata/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "strata/error.hpp"
#include "strata/random.hpp"

namespace strata {

namespace {

// Smallest Gini decrease treated as an improvement.
constexpr double kMinDecrease = 1e-12;

std::size_t argmax_lowest(std::span<const std::uint32_t> counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;
    return best;
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double decrease = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const LabeledSet& data, const ForestConfig& cfg, std::mt19937_64& rng)
        : data_(data), cfg_(cfg), rng_(rng), n_classes_(data.label_names.size()),
          mtry_(cfg.resolved_mtry(data.X.cols())) {}

    DecisionTree build(std::vector<std::size_t> rows) {
        rows_ = std::move(rows);
        struct Pending {
            std::size_t node, begin, end, depth;
        };
        nodes_.clear();
        nodes_.emplace_back();
        std::vector<Pending> stack{{0, 0, rows_.size(), 0}};
        while (!stack.empty()) {
            auto [node, begin, end, depth] = stack.back();
            stack.pop_back();

            std::vector<std::uint32_t> counts(n_classes_, 0);
            for (std::size_t i = begin; i < end; ++i) ++counts[data_.y[rows_[i]]];
            const std::size_t n = end - begin;
            const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;

            Split split;
            if (!pure && depth < cfg_.max_depth && n >= 2 * cfg_.min_leaf) split = best_split(begin, end, counts);
            if (split.feature < 0) {
                nodes_[node].class_counts = std::move(counts);
                continue;
            }

            auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                      rows_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
                                          return data_.X(r, static_cast<std::size_t>(split.feature)) <= split.threshold;
                                      });
            auto split_at = static_cast<std::size_t>(mid - rows_.begin());
            auto left = static_cast<std::int32_t>(nodes_.size());
            nodes_.emplace_back();
            nodes_.emplace_back();
            nodes_[node].feature = split.feature;
            nodes_[node].threshold = split.threshold;
            nodes_[node].left = left;
            nodes_[node].right = left + 1;
            // Right first so the left subtree is grown first (stable RNG use).
            stack.push_back({static_cast<std::size_t>(left + 1), split_at, end, depth + 1});
            stack.push_back({static_cast<std::size_t>(left), begin, split_at, depth + 1});
        }
        return DecisionTree(std::move(nodes_), data_.X.cols(), n_classes_);
    }

private:
    Split best_split(std::size_t begin, std::size_t end, const std::vector<std::uint32_t>& counts) {
        const std::size_t d = data_.X.cols();
        const auto n = static_cast<double>(end - begin);
        double parent_sq = 0.0;
        for (auto c : counts) parent_sq += static_cast<double>(c) * c;
        const double parent_gini = 1.0 - parent_sq / (n * n);

        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), 0);
        std::shuffle(features.begin(), features.end(), rng_);

        Split best;
        std::size_t examined = 0;
        std::vector<std::pair<double, std::size_t>> column(end - begin);
        std::vector<std::uint32_t> left(n_classes_);
        for (auto f : features) {
            if (examined >= mtry_) break;
            for (std::size_t i = begin; i < end; ++i) {
                auto r = rows_[i];
                column[i - begin] = {data_.X(r, f), data_.y[r]};
            }
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (column.front().first == column.back().first) continue;  // constant here; does not count
            ++examined;

            std::fill(left.begin(), left.end(), 0);
            double left_sq = 0.0;
            double right_sq = parent_sq;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                auto c = column[i].second;
                double cl = left[c];
                double cr = counts[c] - cl;
                left_sq += 2.0 * cl + 1.0;
                right_sq -= 2.0 * cr - 1.0;
                ++left[c];
                if (column[i].first == column[i + 1].first) continue;
                const auto nl = static_cast<double>(i + 1);
                const double nr = n - nl;
                if (nl < static_cast<double>(cfg_.min_leaf) || nr < static_cast<double>(cfg_.min_leaf)) continue;
                double weighted = (nl - left_sq / nl + nr - right_sq / nr) / n;
                double decrease = parent_gini - weighted;
                if (decrease > kMinDecrease && decrease > best.decrease) {
                    best.feature = static_cast<int>(f);
                    best.threshold = column[i].first;
                    best.decrease = decrease;
                }
            }
        }
        return best;
    }

    const LabeledSet& data_;
    const ForestConfig& cfg_;
    std::mt19937_64& rng_;
    std::size_t n_classes_;
    std::size_t mtry_;
    std::vector<std::size_t> rows_;
    std::vector<TreeNode> nodes_;
};

}  // namespace

void LabeledSet::validate() const {
    if (X.rows() != y.size())
        throw ArgumentError("labeled set has " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
                            " labels");
    for (auto label : y)
        if (label >= label_names.size()) throw ArgumentError("label index outside label_names");
    for (double v : X.data())
        if (!std::isfinite(v)) throw ArgumentError("labeled set contains non-finite features");
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
    LabeledSet out;
    out.label_names = label_names;
    out.X = Matrix(0, 0);
    for (auto r : rows) {
        out.X.push_row(X.row(r));
        out.y.push_back(y[r]);
    }
    return out;
}

std::size_t ForestConfig::resolved_mtry(std::size_t dim) const {
    if (mtry != 0) return mtry;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim)))));
}

void ForestConfig::validate(std::size_t dim) const {
    if (n_trees < 1) throw ArgumentError("forest needs n_trees >= 1");
    if (max_depth < 1) throw ArgumentError("forest needs max_depth >= 1");
    if (min_leaf < 1) throw ArgumentError("forest needs min_leaf >= 1");
    auto m = resolved_mtry(dim);
    if (m < 1 || m > dim)
        throw ArgumentError("forest mtry " + std::to_string(m) + " outside [1, " + std::to_string(dim) + "]");
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, std::size_t n_features, std::size_t n_classes)
    : nodes_(std::move(nodes)), n_features_(n_features), n_classes_(n_classes) {
    if (nodes_.empty()) throw ArgumentError("tree without nodes");
    for (const auto& node : nodes_) {
        if (node.is_leaf()) {
            if (node.class_counts.size() != n_classes_) throw FormatError("leaf class counts do not match label count");
            if (std::accumulate(node.class_counts.begin(), node.class_counts.end(), std::uint64_t{0}) == 0)
                throw FormatError("empty leaf");
        } else {
            auto size = static_cast<std::int32_t>(nodes_.size());
            if (static_cast<std::size_t>(node.feature) >= n_features_ || node.left <= 0 || node.right <= 0 ||
                node.left >= size || node.right >= size || !std::isfinite(node.threshold))
                throw FormatError("malformed split node");
        }
    }
}

const TreeNode& DecisionTree::leaf(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i];
}

std::size_t DecisionTree::predict(std::span<const double> x) const {
    if (x.size() != n_features_)
        throw ArgumentError("dimension mismatch: tree " + std::to_string(n_features_) + ", input " +
                            std::to_string(x.size()));
    return argmax_lowest(leaf(x).class_counts);
}

std::vector<std::size_t> DecisionTree::path(std::span<const double> x) const {
    if (x.size() != n_features_) throw ArgumentError("dimension mismatch");
    std::vector<std::size_t> out{0};
    while (!nodes_[out.back()].is_leaf()) {
        const auto& n = nodes_[out.back()];
        out.push_back(static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right));
    }
    return out;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

RandomForest::RandomForest(std::vector<DecisionTree> trees, std::vector<std::string> label_names,
                           std::size_t n_features)
    : trees_(std::move(trees)), label_names_(std::move(label_names)), n_features_(n_features) {
    for (const auto& t : trees_)
        if (t.n_features() != n_features_ || t.n_classes() != label_names_.size())
            throw FormatError("tree shape does not match forest");
}

Prediction RandomForest::predict(std::span<const double> x) const {
    if (trees_.empty()) throw StateError("forest is not trained");
    if (x.size() != n_features_)
        throw ArgumentError("dimension mismatch: forest " + std::to_string(n_features_) + ", input " +
                            std::to_string(x.size()));
    std::vector<std::uint32_t> votes(label_names_.size(), 0);
    for (const auto& t : trees_) ++votes[t.predict(x)];
    Prediction p;
    p.label = argmax_lowest(votes);
    p.probabilities.resize(votes.size());
    for (std::size_t c = 0; c < votes.size(); ++c)
        p.probabilities[c] = static_cast<double>(votes[c]) / static_cast<double>(trees_.size());
    return p;
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = pick(rng);
    return rows;
}

DecisionTree fit_tree(const LabeledSet& data, std::span<const std::size_t> rows, const ForestConfig& cfg,
                      std::mt19937_64& rng) {
    if (rows.empty() || data.size() == 0) throw ArgumentError("cannot fit a tree on an empty dataset");
    if (data.label_names.empty()) throw ArgumentError("labeled set has no label names");
    cfg.validate(data.X.cols());
    TreeBuilder builder(data, cfg, rng);
    return builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

DecisionTree fit_tree(const LabeledSet& data, const ForestConfig& cfg, std::mt19937_64& rng) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    return fit_tree(data, rows, cfg, rng);
}

RandomForest fit_forest(const LabeledSet& data, const ForestConfig& cfg) {
    data.validate();
    if (data.size() < 2) throw ArgumentError("a forest needs at least 2 samples");
    if (data.label_names.empty()) throw ArgumentError("labeled set has no label names");
    cfg.validate(data.X.cols());

    const std::size_t n = data.size();
    std::vector<DecisionTree> trees(cfg.n_trees);
    std::vector<std::vector<bool>> in_bag(cfg.n_trees, std::vector<bool>(n, false));
    auto grow = [&](std::size_t t) {
        std::mt19937_64 rng(mix_seed(cfg.seed, t));
        auto rows = bootstrap_rows(n, rng);
        for (auto r : rows) in_bag[t][r] = true;
        trees[t] = fit_tree(data, rows, cfg, rng);
    };

    std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, cfg.n_trees);
    if (workers <= 1) {
        for (std::size_t t = 0; t < cfg.n_trees; ++t) grow(t);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t t = w; t < cfg.n_trees; t += workers) grow(t);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    RandomForest forest(std::move(trees), data.label_names, data.X.cols());

    std::size_t scored = 0, correct = 0;
    std::vector<std::uint32_t> votes(data.label_names.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        bool any = false;
        for (std::size_t t = 0; t < cfg.n_trees; ++t) {
            if (in_bag[t][i]) continue;
            ++votes[forest.trees()[t].predict(data.X.row(i))];
            any = true;
        }
        if (!any) continue;
        ++scored;
        if (argmax_lowest(votes) == data.y[i]) ++correct;
    }
    if (scored > 0) forest.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
    return forest;
}

double accuracy(const RandomForest& forest, const LabeledSet& data) {
    if (data.size() == 0) throw ArgumentError("accuracy of an empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (forest.predict(data.X.row(i)).label == data.y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<std::vector<std::size_t>> stratified_folds(const LabeledSet& data, std::size_t folds,
                                                       std::uint64_t seed) {
    data.validate();
    if (folds < 2) throw ArgumentError("cross-validation needs at least 2 folds");
    if (data.size() < folds)
        throw ArgumentError("cross-validation needs at least " + std::to_string(folds) + " samples");
    std::vector<std::vector<std::size_t>> by_class(data.label_names.size());
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.y[i]].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> out(folds);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < folds)
            throw ArgumentError("class '" + data.label_names[c] + "' has " + std::to_string(members.size()) +
                                " samples, fewer than " + std::to_string(folds) + " folds");
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t j = 0; j < members.size(); ++j) out[(offset + j) % folds].push_back(members[j]);
        offset += members.size();
    }
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

CvResult cross_validate(const LabeledSet& data, std::size_t folds, const ForestConfig& cfg) {
    auto parts = stratified_folds(data, folds, cfg.seed);
    CvResult res;
    for (std::size_t k = 0; k < folds; ++k) {
        std::vector<std::size_t> train;
        for (std::size_t j = 0; j < folds; ++j)
            if (j != k) train.insert(train.end(), parts[j].begin(), parts[j].end());
        std::sort(train.begin(), train.end());
        auto model = fit_forest(data.subset(train), cfg);
        res.fold_accuracy.push_back(accuracy(model, data.subset(parts[k])));
    }
    res.mean_accuracy = std::accumulate(res.fold_accuracy.begin(), res.fold_accuracy.end(), 0.0) /
                        static_cast<double>(folds);
    return res;
}

}  // namespace strata
