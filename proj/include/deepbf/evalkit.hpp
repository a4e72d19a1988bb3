#pragma once

// Estimation and inference metrics for Bayes-factor estimators.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deepbf/models.hpp"
#include "deepbf/rng.hpp"

namespace deepbf {

/// Maps datasets to (natural) log Bayes factors of m1 against m2.
using LogBfEvaluator = std::function<std::vector<double>(std::span<const Data>)>;

/// Evaluator backed by exact_log_bf. Throws NoOracle when called on a pair
/// without closed-form marginals.
LogBfEvaluator exact_evaluator(const ModelPair& pair);

/// Log Bayes factors over datasets simulated from each model. true_* is
/// empty when no oracle is available.
struct BfSampleSet {
    std::vector<double> true_m1, est_m1;
    std::vector<double> true_m2, est_m2;
    double prior_m1 = 0.5;
    double prior_m2 = 0.5;

    bool has_truth() const { return !true_m1.empty() || !true_m2.empty(); }
};

/// count datasets per model, model-j draws from rng.substream(j).
BfSampleSet simulate_sample_set(const ModelPair& pair, std::size_t n, std::size_t count, const LogBfEvaluator& est,
                                const LogBfEvaluator* exact, RngStream& rng);

struct MseResult {
    double value = 0.0;
    std::size_t excluded = 0; // pairs with a non-finite value
};

MseResult mse_log_bf(const BfSampleSet& s);

struct SpearmanResult {
    double value = 0.0;
    bool degenerate = false; // a constant vector was met; its rho counts as 0
};

/// Ranks with ties sharing their average rank (1-based).
std::vector<double> average_ranks(std::span<const double> v);
SpearmanResult spearman(std::span<const double> a, std::span<const double> b);
/// Per-model rho between truth and estimate, weighted by the model priors.
SpearmanResult spearman_weighted(const BfSampleSet& s);

/// Gaussian KDE with bandwidth 1.06 sd N^(-1/5).
struct Kde {
    std::vector<double> points;
    double bandwidth = 1.0;

    double operator()(double x) const;
};

Kde make_kde(std::span<const double> samples);

struct Grid {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;

    double step() const { return count > 1 ? (hi - lo) / static_cast<double>(count - 1) : 0.0; }
    double at(std::size_t i) const { return lo + step() * static_cast<double>(i); }
};

/// Pooled sample range padded by four of the larger bandwidth.
Grid kde_grid(const Kde& a, const Kde& b, std::size_t count = 512);

inline constexpr double kKdeFloor = 1e-12;

/// Riemann sum of p log(p / q) for the two KDEs over the grid, densities
/// floored at kKdeFloor. Non-finite samples are ignored.
double kl_between_samples(std::span<const double> a, std::span<const double> b, std::size_t grid_points = 512);

/// bf prior_m1 / (bf prior_m1 + prior_m2); bf = inf gives 1.
double posterior_model_prob(double bf, double prior_m1, double prior_m2);
double posterior_model_prob_from_log(double log_bf, double prior_m1, double prior_m2);

/// Mean posterior probability of m1 over count datasets drawn from the
/// prior mixture of the two models.
double estimated_prior(const LogBfEvaluator& est, const ModelPair& pair, std::size_t n, std::size_t count,
                       RngStream& rng);

struct SurprisePair {
    double p1 = 0.0; // share of m1 simulations strictly above the observed value
    double p2 = 0.0; // share of m2 simulations at or below it
};

/// Works on any strictly increasing scale (BF or log BF) as long as all
/// three arguments share it.
SurprisePair surprise(double bf_obs, std::span<const double> sims_m1, std::span<const double> sims_m2);

/// Prior-weighted mean squared gap between surprise tails computed with the
/// exact and with the estimated Bayes factors; each side uses its own values
/// for both the statistic and the reference sample.
double mse_surprise(const BfSampleSet& s);
double mse_surprise(const LogBfEvaluator& est, const LogBfEvaluator& exact, const ModelPair& pair, std::size_t n,
                    std::size_t count, RngStream& rng);

struct RocResult {
    std::vector<std::pair<double, double>> curve; // (FPR, TPR) from (0,0) to (1,1)
    double auc = 0.5;
};

RocResult roc_auc(std::span<const double> scores_m1, std::span<const double> scores_m2);
/// Mann-Whitney AUC alone, ties counted one half.
double auc(std::span<const double> scores_m1, std::span<const double> scores_m2);

/// Exact log Bayes factors within this distance of zero carry no sign.
inline constexpr double kSignTolerance = 1e-9;

/// Share of pairs whose estimate has the same sign as the truth, over pairs
/// whose exact log Bayes factor is signed (|t| > kSignTolerance).
double sign_agreement(const BfSampleSet& s);
/// Number of pairs sign_agreement skips as unsigned.
std::size_t unsigned_truths(const BfSampleSet& s);

struct Metric {
    std::string name;
    double value;
    std::string model; // "m1", "m2" or "all"
};

struct EvalReport {
    std::vector<Metric> metrics;
    BfSampleSet samples;
    std::size_t n = 0;
    std::uint64_t seed = 0;

    double get(const std::string& name, const std::string& model = "all") const;
};

/// Full metric bundle on freshly simulated data (count per model). Oracle
/// metrics are included only when `exact` is non-null.
EvalReport evaluate(const LogBfEvaluator& est, const LogBfEvaluator* exact, const ModelPair& pair, std::size_t n,
                    std::size_t count, std::size_t grid_points, RngStream& rng);

} // namespace deepbf
