#pragma once

// Posterior-predictive model criticism with a per-replicate quadratic
// logistic classifier.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "deepbf/models.hpp"
#include "deepbf/rng.hpp"

namespace deepbf {

/// d(y) = sigmoid(a + b y + c y^2).
struct QuadLogit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double logit(double y) const { return a + b * y + c * y * y; }
    double operator()(double y) const;
};

struct QuadFitInfo {
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0; // mean_real log d + mean_fake log(1 - d)
};

/// Maximises mean_real log d + mean_fake log(1 - d) by Newton's method with
/// backtracking, until the gradient norm drops below 1e-6 or 5000 steps. The
/// fit is deterministic.
QuadLogit fit_quadratic_logit(std::span<const double> real_obs, std::span<const double> fake,
                              QuadFitInfo* info = nullptr);

/// The objective above for a given classifier.
double quad_logit_objective(const QuadLogit& d, std::span<const double> real_obs, std::span<const double> fake);

/// Mean of d over the fake set.
double z_statistic(const QuadLogit& d, std::span<const double> fake);

struct ZReport {
    std::vector<double> z;
    double lo = 0.0; // 2.5% sample quantile
    double hi = 0.0; // 97.5% sample quantile
    bool contains_half = false;
};

/// Nearest-rank sample quantile (the ceil(p R)-th smallest value).
double nearest_rank_quantile(std::span<const double> values, double p);

/// For each replicate: fit against one posterior-predictive fake set and
/// score a second, independent one. Replicate r uses rng.substream(r).
ZReport criticize(const ModelSpec& model, std::span<const double> y_obs, std::size_t replicates, RngStream& rng);

} // namespace deepbf
