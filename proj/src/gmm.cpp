#include "strata/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "strata/error.hpp"
#include "strata/random.hpp"

namespace strata {

namespace {

constexpr int kKMeansMaxIter = 100;
constexpr double kMinWeight = 1e-300;
// Components whose responsibility mass falls below this keep their previous
// mean and variance in the M-step.
constexpr double kMinMass = 1e-200;

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void require_finite(const Matrix& points) {
    for (double v : points.data())
        if (!std::isfinite(v)) throw ArgumentError("points must be finite");
}

std::size_t nearest(const Matrix& centroids, std::span<const double> x, double& dist) {
    std::size_t best = 0;
    dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        double d = squared_distance(centroids.row(c), x);
        if (d < dist) {
            dist = d;
            best = c;
        }
    }
    return best;
}

double component_log_density(const GaussianComponent& comp, std::span<const double> x) {
    static const double log_2pi = std::log(2.0 * std::numbers::pi);
    double acc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        double diff = x[d] - comp.mean[d];
        acc += log_2pi + std::log(comp.variance[d]) + diff * diff / comp.variance[d];
    }
    return -0.5 * acc;
}

double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void normalise_weights(GmmModel& model) {
    double total = 0.0;
    for (auto& c : model.components) {
        c.weight = std::max(c.weight, kMinWeight);
        total += c.weight;
    }
    for (auto& c : model.components) c.weight /= total;
}

// Mean and floored population variance over the rows selected by `rows`.
GaussianComponent moments(const Matrix& points, std::span<const std::size_t> rows, double floor) {
    const std::size_t d = points.cols();
    GaussianComponent comp;
    comp.mean.assign(d, 0.0);
    comp.variance.assign(d, 0.0);
    for (auto r : rows)
        for (std::size_t j = 0; j < d; ++j) comp.mean[j] += points(r, j);
    for (auto& m : comp.mean) m /= static_cast<double>(rows.size());
    for (auto r : rows)
        for (std::size_t j = 0; j < d; ++j) {
            double diff = points(r, j) - comp.mean[j];
            comp.variance[j] += diff * diff;
        }
    for (auto& v : comp.variance) v = std::max(v / static_cast<double>(rows.size()), floor);
    return comp;
}

}  // namespace

void GmmModel::validate(double variance_floor) const {
    if (components.empty()) throw ArgumentError("GMM needs at least one component");
    if (!component_pattern.empty() && component_pattern.size() != components.size())
        throw ArgumentError("GMM component labels do not match component count");
    const std::size_t d = dim();
    double total = 0.0;
    for (const auto& c : components) {
        if (c.mean.size() != d || c.variance.size() != d) throw ArgumentError("GMM component dimension mismatch");
        if (!(c.weight > 0.0 && c.weight <= 1.0)) throw ArgumentError("GMM weight outside (0, 1]");
        for (double v : c.variance)
            if (!(v > 0.0) || v < variance_floor) throw ArgumentError("GMM variance below floor");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("GMM weights do not sum to 1");
}

void EmConfig::validate() const {
    if (max_iter < 1) throw ArgumentError("EM max_iter must be >= 1");
    if (!(tol > 0.0)) throw ArgumentError("EM tol must be positive");
    if (!(variance_floor > 0.0)) throw ArgumentError("EM variance_floor must be positive");
    if (restarts < 1) throw ArgumentError("EM restarts must be >= 1");
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.rows();
    if (k == 0) throw ArgumentError("k-means needs k >= 1");
    if (n < k) throw ArgumentError("k-means needs at least k points (n=" + std::to_string(n) + ", k=" +
                                   std::to_string(k) + ")");
    require_finite(points);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    // Prefer k points with distinct coordinates; fall back to duplicates.
    std::vector<std::size_t> seeds;
    for (auto idx : order) {
        if (seeds.size() == k) break;
        bool dup = std::any_of(seeds.begin(), seeds.end(),
                               [&](std::size_t s) { return squared_distance(points.row(s), points.row(idx)) == 0.0; });
        if (!dup) seeds.push_back(idx);
    }
    for (auto idx : order) {
        if (seeds.size() == k) break;
        if (std::find(seeds.begin(), seeds.end(), idx) == seeds.end()) seeds.push_back(idx);
    }

    KMeansResult res;
    res.centroids = Matrix(k, points.cols());
    for (std::size_t c = 0; c < k; ++c)
        std::copy_n(points.row(seeds[c]).begin(), points.cols(), res.centroids.row(c).begin());

    std::vector<double> dist(n);
    auto assign = [&](std::vector<std::size_t>& labels) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = nearest(res.centroids, points.row(i), dist[i]);
            total += dist[i];
        }
        return total;
    };
    auto update = [&](const std::vector<std::size_t>& labels) {
        std::vector<std::size_t> counts(k, 0);
        Matrix sums(k, points.cols());
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[labels[i]];
            for (std::size_t j = 0; j < points.cols(); ++j) sums(labels[i], j) += points(i, j);
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (std::size_t j = 0; j < points.cols(); ++j)
                    res.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        return counts;
    };

    res.assignments.assign(n, 0);
    res.distortion.push_back(assign(res.assignments));

    for (int iter = 0; iter < kKMeansMaxIter; ++iter) {
        auto counts = update(res.assignments);
        // Empty clusters move onto the point currently farthest from its centroid.
        std::vector<bool> taken(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (taken[i]) continue;
                double d = squared_distance(points.row(i), res.centroids.row(res.assignments[i]));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) break;
            taken[far] = true;
            std::copy_n(points.row(far).begin(), points.cols(), res.centroids.row(c).begin());
        }
        std::vector<std::size_t> next(n);
        res.distortion.push_back(assign(next));
        ++res.iterations;
        bool stable = next == res.assignments;
        res.assignments = std::move(next);
        if (stable) break;
    }
    // Leave every non-empty centroid at the mean of its final members.
    update(res.assignments);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += squared_distance(points.row(i), res.centroids.row(res.assignments[i]));
    res.distortion.push_back(total);
    return res;
}

double log_pdf(const GmmModel& model, std::span<const double> x) {
    if (model.components.empty()) throw ArgumentError("empty GMM");
    if (x.size() != model.dim())
        throw ArgumentError("dimension mismatch: model " + std::to_string(model.dim()) + ", input " +
                            std::to_string(x.size()));
    std::vector<double> terms(model.k());
    for (std::size_t c = 0; c < model.k(); ++c)
        terms[c] = std::log(model.components[c].weight) + component_log_density(model.components[c], x);
    return log_sum_exp(terms);
}

std::vector<double> responsibilities(const GmmModel& model, std::span<const double> x) {
    if (model.components.empty()) throw ArgumentError("empty GMM");
    if (x.size() != model.dim())
        throw ArgumentError("dimension mismatch: model " + std::to_string(model.dim()) + ", input " +
                            std::to_string(x.size()));
    std::vector<double> terms(model.k());
    for (std::size_t c = 0; c < model.k(); ++c)
        terms[c] = std::log(model.components[c].weight) + component_log_density(model.components[c], x);
    double lse = log_sum_exp(terms);
    double total = 0.0;
    for (auto& t : terms) {
        t = std::exp(t - lse);
        total += t;
    }
    for (auto& t : terms) t /= total;
    return terms;
}

double total_log_likelihood(const GmmModel& model, const Matrix& points) {
    double ll = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) ll += log_pdf(model, points.row(i));
    return ll;
}

EmRun em_refine(const Matrix& points, GmmModel model, const EmConfig& cfg) {
    cfg.validate();
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t k = model.k();
    if (k == 0) throw ArgumentError("EM needs an initial model");
    if (model.dim() != d) throw ArgumentError("initial model dimension does not match the data");
    if (n < k) throw ArgumentError("EM needs at least k points (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
    require_finite(points);

    for (auto& c : model.components)
        for (auto& v : c.variance) v = std::max(v, cfg.variance_floor);
    normalise_weights(model);

    EmRun run;
    Matrix resp(n, k);
    std::vector<double> terms(k);
    for (int iter = 0;; ++iter) {
        // E-step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = points.row(i);
            for (std::size_t c = 0; c < k; ++c)
                terms[c] = std::log(model.components[c].weight) + component_log_density(model.components[c], x);
            double lse = log_sum_exp(terms);
            ll += lse;
            for (std::size_t c = 0; c < k; ++c) resp(i, c) = std::exp(terms[c] - lse);
        }
        if (!run.log_likelihood.empty()) {
            double prev = run.log_likelihood.back();
            run.log_likelihood.push_back(ll);
            if (std::abs(ll - prev) < cfg.tol * std::max(1.0, std::abs(prev))) {
                run.converged = true;
                break;
            }
        } else {
            run.log_likelihood.push_back(ll);
        }
        if (iter >= cfg.max_iter) break;

        // M-step
        for (std::size_t c = 0; c < k; ++c) {
            auto& comp = model.components[c];
            double mass = 0.0;
            for (std::size_t i = 0; i < n; ++i) mass += resp(i, c);
            comp.weight = mass / static_cast<double>(n);
            if (mass < kMinMass) continue;
            std::fill(comp.mean.begin(), comp.mean.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) comp.mean[j] += resp(i, c) * points(i, j);
            for (auto& m : comp.mean) m /= mass;
            std::fill(comp.variance.begin(), comp.variance.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    double diff = points(i, j) - comp.mean[j];
                    comp.variance[j] += resp(i, c) * diff * diff;
                }
            for (auto& v : comp.variance) v = std::max(v / mass, cfg.variance_floor);
        }
        normalise_weights(model);
    }
    run.model = std::move(model);
    return run;
}

EmResult em_fit_traced(const Matrix& points, std::size_t k, const EmConfig& cfg) {
    cfg.validate();
    if (k == 0) throw ArgumentError("EM needs k >= 1");
    if (points.rows() < k)
        throw ArgumentError("EM needs at least k points (n=" + std::to_string(points.rows()) + ", k=" +
                            std::to_string(k) + ")");
    EmResult result;
    for (int r = 0; r < cfg.restarts; ++r) {
        auto km = kmeans(points, k, mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        GmmModel init;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < points.rows(); ++i)
                if (km.assignments[i] == c) members.push_back(i);
            GaussianComponent comp;
            if (members.empty()) {
                std::vector<std::size_t> all(points.rows());
                std::iota(all.begin(), all.end(), 0);
                comp = moments(points, all, cfg.variance_floor);
                comp.mean.assign(km.centroids.row(c).begin(), km.centroids.row(c).end());
            } else {
                comp = moments(points, members, cfg.variance_floor);
            }
            comp.weight = static_cast<double>(members.size()) / static_cast<double>(points.rows());
            init.components.push_back(std::move(comp));
        }
        auto run = em_refine(points, std::move(init), cfg);
        if (result.runs.empty() || run.log_likelihood.back() > result.log_likelihood) {
            result.log_likelihood = run.log_likelihood.back();
            result.best_run = result.runs.size();
        }
        result.runs.push_back(std::move(run));
    }
    result.model = result.runs[result.best_run].model;
    return result;
}

GmmModel em_fit(const Matrix& points, std::size_t k, const EmConfig& cfg) {
    return em_fit_traced(points, k, cfg).model;
}

void assign_component_patterns(GmmModel& model, const Matrix& points, std::span<const std::string> labels) {
    if (labels.size() != points.rows()) throw ArgumentError("label count does not match point count");
    // Label order of first appearance breaks ties.
    std::vector<std::string> order;
    std::map<std::string, std::size_t> index;
    for (const auto& l : labels)
        if (index.emplace(l, order.size()).second) order.push_back(l);

    Matrix mass(model.k(), order.size());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        auto r = responsibilities(model, points.row(i));
        for (std::size_t c = 0; c < model.k(); ++c) mass(c, index[labels[i]]) += r[c];
    }
    model.component_pattern.assign(model.k(), std::nullopt);
    for (std::size_t c = 0; c < model.k(); ++c) {
        double best = 0.0;
        for (std::size_t l = 0; l < order.size(); ++l)
            if (mass(c, l) > best) {
                best = mass(c, l);
                model.component_pattern[c] = order[l];
            }
    }
}

GmmModel fit_per_label(const Matrix& points, std::span<const std::size_t> labels,
                       std::span<const std::string> label_names, const EmConfig& cfg) {
    cfg.validate();
    if (labels.size() != points.rows()) throw ArgumentError("label count does not match point count");
    GmmModel init;
    std::vector<std::string> names;
    for (std::size_t l = 0; l < label_names.size(); ++l) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == l) members.push_back(i);
        if (members.empty()) throw ArgumentError("label '" + label_names[l] + "' has no points");
        auto comp = moments(points, members, cfg.variance_floor);
        comp.weight = static_cast<double>(members.size()) / static_cast<double>(points.rows());
        init.components.push_back(std::move(comp));
    }
    auto model = em_refine(points, std::move(init), cfg).model;
    std::vector<std::string> text_labels;
    text_labels.reserve(labels.size());
    for (auto l : labels) text_labels.push_back(label_names[l]);
    assign_component_patterns(model, points, text_labels);
    return model;
}

GmmModel add_component(const GmmModel& model, const Matrix& stored_points,
                       std::span<const std::string> stored_labels, const Matrix& new_points,
                       const std::string& label, const EmConfig& cfg) {
    cfg.validate();
    if (new_points.rows() < 2) throw ArgumentError("a new component needs at least 2 points");
    if (model.k() == 0) throw ArgumentError("cannot extend an empty GMM");
    if (stored_points.rows() != stored_labels.size()) throw ArgumentError("label count does not match point count");
    if (new_points.cols() != model.dim() || (!stored_points.empty() && stored_points.cols() != model.dim()))
        throw ArgumentError("dimension mismatch while adding a component");

    Matrix all = stored_points;
    std::vector<std::string> labels(stored_labels.begin(), stored_labels.end());
    for (std::size_t i = 0; i < new_points.rows(); ++i) {
        all.push_row(new_points.row(i));
        labels.push_back(label);
    }
    const double n_old = static_cast<double>(stored_points.rows());
    const double n_all = static_cast<double>(all.rows());

    GmmModel init = model;
    init.component_pattern.clear();
    for (auto& c : init.components) c.weight *= n_old / n_all;
    std::vector<std::size_t> fresh(new_points.rows());
    std::iota(fresh.begin(), fresh.end(), 0);
    auto comp = moments(new_points, fresh, cfg.variance_floor);
    comp.weight = static_cast<double>(new_points.rows()) / n_all;
    init.components.push_back(std::move(comp));

    auto refit = em_refine(all, std::move(init), cfg).model;
    assign_component_patterns(refit, all, labels);
    return refit;
}

}  // namespace strata
