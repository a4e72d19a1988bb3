#pragma once

// Deep Bayes factor estimation: a classifier trained on fresh simulations
// from both models, read out through the odds transform.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepbf/models.hpp"
#include "deepbf/nn.hpp"
#include "deepbf/rng.hpp"

namespace deepbf {

/// Which model's simulations carry label 1. The estimator approximates the
/// Bayes factor of the label-1 model against the other.
enum class Direction { m1_vs_m2, m2_vs_m1 };

std::string to_string(Direction d);
Direction parse_direction(const std::string& name);
Direction reversed(Direction d);

struct TrainConfig {
    std::uint64_t iterations = 40000;
    std::size_t minibatch_per_model = 200;
    ArchSpec arch;
    AdamConfig adam;
    std::uint64_t seed = 0;
    std::size_t eval_reference_batch = 200;
    Direction direction = Direction::m1_vs_m2;
    double eps = 0.0;

    void validate() const;
};

struct BfEstimator {
    Network net;
    AdamState adam;
    std::string pair_name;
    Hyperparams hyperparams;
    double prior_m1 = 0.5;
    std::size_t n = 0;
    Direction direction = Direction::m1_vs_m2;
    double eps = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t train_config_hash = 0;
    /// Simulated datasets that batch-norm networks are evaluated alongside
    /// (half from each model). Empty for networks without batch-norm.
    Matrix reference;
};

/// Runs cfg.iterations Adam steps, each on minibatch_per_model fresh datasets
/// of length n from each model. Throws NumericFailure on a non-finite loss.
BfEstimator train(const ModelPair& pair, std::size_t n, const TrainConfig& cfg, RngStream& rng);

/// The odds transform (D + eps) / ((1 - D) + eps).
double bf_from_probability(double d, double eps);

/// Classifier logit for each dataset (rows of length est.n).
std::vector<double> estimate_logits(const BfEstimator& est, std::span<const Data> ys);

/// Bayes factor of the label-1 model. With eps = 0 this is exp(logit), the
/// odds D / (1 - D) without rounding D first; otherwise bf_from_probability.
double estimate_bf(const BfEstimator& est, std::span<const double> y);
double estimate_log_bf(const BfEstimator& est, std::span<const double> y);
std::vector<double> estimate_bf_batch(const BfEstimator& est, std::span<const Data> ys);
std::vector<double> estimate_log_bf_batch(const BfEstimator& est, std::span<const Data> ys);

/// BF_12(y) * BF_21(y[split]) where est_rev_sub is trained on the reversed
/// direction at length split.size().
double partial_bf(const BfEstimator& est_full, const BfEstimator& est_rev_sub, std::span<const double> y,
                  std::span<const std::size_t> split);

/// BF_12(y, y) * BF_21(y) with est_double trained at length 2n.
double posterior_bf(const BfEstimator& est_double, const BfEstimator& est_rev, std::span<const double> y);

enum class IntrinsicMode { arithmetic, geometric };

/// BF_12(y) times the arithmetic or geometric mean of BF_21 over subsets of
/// size n_x: all of them in lexicographic order when there are at most
/// subset_limit, else subset_limit distinct ones sampled uniformly.
double intrinsic_bf(const BfEstimator& est_full, const BfEstimator& est_rev_sub, std::span<const double> y,
                    std::size_t n_x, IntrinsicMode mode, std::size_t subset_limit, RngStream& rng);

/// The size-k subsets of {0..n-1} used by intrinsic_bf.
std::vector<std::vector<std::size_t>> intrinsic_subsets(std::size_t n, std::size_t k, std::size_t subset_limit,
                                                        RngStream& rng);

} // namespace deepbf
