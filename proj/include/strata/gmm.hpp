#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/matrix.hpp"

namespace strata {

/// One weighted diagonal-covariance Gaussian.
struct GaussianComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> variance;

    friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

struct GmmModel {
    std::vector<GaussianComponent> components;
    /// Optional unit-pattern label per component (same length as components).
    std::vector<std::optional<std::string>> component_pattern;

    std::size_t k() const noexcept { return components.size(); }
    std::size_t dim() const noexcept { return components.empty() ? 0 : components.front().mean.size(); }
    /// Throws ArgumentError if the model breaks its invariants.
    void validate(double variance_floor = 0.0) const;

    friend bool operator==(const GmmModel&, const GmmModel&) = default;
};

struct EmConfig {
    int max_iter = 200;
    double tol = 1e-6;
    double variance_floor = 1e-6;
    int restarts = 3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct KMeansResult {
    Matrix centroids;
    std::vector<std::size_t> assignments;
    /// Total squared distortion after every assignment pass.
    std::vector<double> distortion;
    std::size_t iterations = 0;
};

/// Lloyd's algorithm from `k` distinct seeded points; at most 100 iterations.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed);

struct EmRun {
    GmmModel model;
    /// Training log-likelihood of the parameters entering each E-step.
    std::vector<double> log_likelihood;
    bool converged = false;
};

struct EmResult {
    GmmModel model;
    double log_likelihood = 0.0;
    std::vector<EmRun> runs;  // one per restart
    std::size_t best_run = 0;
};

/// K-means initialised EM, best of cfg.restarts by final log-likelihood.
EmResult em_fit_traced(const Matrix& points, std::size_t k, const EmConfig& cfg);
GmmModel em_fit(const Matrix& points, std::size_t k, const EmConfig& cfg);

/// EM iterations starting from an explicit initial model.
EmRun em_refine(const Matrix& points, GmmModel init, const EmConfig& cfg);

/// Log of the mixture density, via log-sum-exp.
double log_pdf(const GmmModel& model, std::span<const double> x);
std::vector<double> responsibilities(const GmmModel& model, std::span<const double> x);
double total_log_likelihood(const GmmModel& model, const Matrix& points);

/// Per-label initialisation (one component per label, in `label_names`
/// order) followed by EM over all points; components are then labelled.
GmmModel fit_per_label(const Matrix& points, std::span<const std::size_t> labels,
                       std::span<const std::string> label_names, const EmConfig& cfg);

/// Refits with one extra component seeded from `new_points`. Existing
/// training data and labels must be supplied; the result is refit on the union.
GmmModel add_component(const GmmModel& model, const Matrix& stored_points,
                       std::span<const std::string> stored_labels, const Matrix& new_points,
                       const std::string& label, const EmConfig& cfg);

/// Labels each component by the largest responsibility-weighted label mass.
void assign_component_patterns(GmmModel& model, const Matrix& points, std::span<const std::string> labels);

}  // namespace strata
