#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deepbf/rng.hpp"

namespace deepbf {

/// One dataset: n observations stored as doubles, count data included.
using Data = std::vector<double>;
using Hyperparams = std::map<std::string, double>;

enum class SupportKind { nonneg_integers, reals, nonneg_reals, counts_bounded };

struct Support {
    SupportKind kind = SupportKind::reals;
    std::uint64_t trials = 0; // only for counts_bounded

    bool contains(double y) const;
    bool operator==(const Support&) const = default;
};

/// A simulator-defined Bayesian model. The procedure members are the only
/// way the rest of the library touches a model, so custom models can be
/// wired by assigning lambdas.
struct ModelSpec {
    using PriorSampler = std::function<std::vector<double>(RngStream&)>;
    using ConditionalSampler = std::function<Data(std::span<const double> theta, std::size_t n, RngStream&)>;
    using LogMarginal = std::function<double(std::span<const double> y)>;
    using PredictiveSampler = std::function<Data(std::span<const double> y_obs, std::size_t m, RngStream&)>;

    std::string id;
    std::size_t param_dim = 1;
    Support support;
    PriorSampler prior_sampler;
    ConditionalSampler conditional_sampler;
    LogMarginal exact_log_marginal;      // empty when no closed form exists
    PredictiveSampler posterior_predictive; // empty when no conjugate form exists
};

struct ModelPair {
    std::string name;
    Hyperparams hyperparams;
    ModelSpec m1;
    ModelSpec m2;
    double prior_m1 = 0.5;
    double prior_m2 = 0.5;

    /// Throws InvalidParameter if priors or supports are inconsistent.
    void validate() const;
    /// The same pair with the roles of the two models exchanged.
    ModelPair swapped() const;
};

enum class BuiltinPair { data1, data2, data3, mpt };

BuiltinPair parse_builtin_pair(const std::string& name);
std::string to_string(BuiltinPair name);

/// Wires one of the built-in model pairs.
///
/// data1: NB(1, p), p ~ Beta(alpha1, beta1) against Poisson(lambda),
///        lambda ~ Gamma(alpha2, beta2). Keys alpha1, beta1, alpha2, beta2.
/// data2: two-component Gaussian mixture with Gaussian priors on both means
///        against a single Gaussian with a Gaussian prior on its mean. Keys
///        mix_mean1, mix_mean2, mix_prior_sd, mix_noise_sd, single_prior_mean,
///        single_prior_sd, single_noise_sd.
/// data3: Exp(lambda), lambda ~ Gamma(gamma_shape, gamma_rate) against
///        Exp(fixed_rate). Keys gamma_shape, gamma_rate, fixed_rate.
/// mpt:   process-dissociation (m1) against Stroop (m2) trees. Keys
///        trials_per_cell, n_participants, summed (0 = full, 1 = summed),
///        prior_{a,b,c}_{alpha,beta} for independent Beta priors.
///
/// Every family also accepts prior_m1. Unknown keys are rejected.
ModelPair make_builtin_pair(BuiltinPair name, const Hyperparams& hyperparams = {});
ModelPair make_builtin_pair(const std::string& name, const Hyperparams& hyperparams = {});

/// Largest n for which the data2 mixture marginal is summed exhaustively.
inline constexpr std::size_t kMixtureExhaustiveLimit = 20;

enum class MptTree { process_dissociation, stroop };
enum class MptLayout { full, summed };

struct MptSpec {
    std::uint64_t trials_per_cell = 36;
    std::size_t n_participants = 42;
    MptLayout layout = MptLayout::full;
    /// Beta(alpha, beta) priors on A, B and C, in that order.
    std::array<std::pair<double, double>, 3> priors{{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}};

    /// Length of one dataset: 6 per participant (full) or 12 (summed).
    std::size_t data_length() const;
};

/// Cell success probabilities in the order White Tool, White Gun, Black Tool,
/// Black Gun, Neutral Tool, Neutral Gun. A = automatic stereotype activation,
/// B = guessing "tool", C = controlled processing.
std::array<double, 6> mpt_cell_probabilities(MptTree tree, double a, double b, double c);

ModelSpec make_mpt_model(MptTree tree, const MptSpec& spec);

/// Draws theta from the prior and then n conditionally i.i.d. observations.
Data simulate_dataset(const ModelSpec& model, std::size_t n, RngStream& rng);

/// Like simulate_dataset but also returns the parameter draw.
std::pair<std::vector<double>, Data> simulate_with_parameters(const ModelSpec& model, std::size_t n,
                                                              RngStream& rng);

/// log BF_{1,2}(y) from the closed-form marginals. Throws NoOracle if either
/// model lacks one.
double exact_log_bf(const ModelPair& pair, std::span<const double> y);

/// m posterior-predictive draws, each with its own posterior parameter draw.
/// Throws Unsupported for models without a conjugate predictive.
Data posterior_predictive_sample(const ModelSpec& model, std::span<const double> y_obs, std::size_t m,
                                 RngStream& rng);

} // namespace deepbf
