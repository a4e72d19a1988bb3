#include "deepbf/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "deepbf/error.hpp"

namespace deepbf {

bool Support::contains(double y) const {
    if (!std::isfinite(y)) return false;
    switch (kind) {
    case SupportKind::reals:
        return true;
    case SupportKind::nonneg_reals:
        return y >= 0.0;
    case SupportKind::nonneg_integers:
        return y >= 0.0 && y == std::floor(y);
    case SupportKind::counts_bounded:
        return y >= 0.0 && y == std::floor(y) && y <= static_cast<double>(trials);
    }
    return false;
}

void ModelPair::validate() const {
    if (!(prior_m1 > 0.0 && prior_m1 < 1.0 && prior_m2 > 0.0 && prior_m2 < 1.0))
        throw InvalidParameter("model priors must lie in (0, 1)");
    if (std::fabs(prior_m1 + prior_m2 - 1.0) > 1e-12) throw InvalidParameter("model priors must sum to 1");
    if (!(m1.support == m2.support)) throw InvalidParameter("both models must declare the same data support");
    if (!m1.prior_sampler || !m1.conditional_sampler || !m2.prior_sampler || !m2.conditional_sampler)
        throw InvalidParameter("both models need prior and conditional samplers");
}

ModelPair ModelPair::swapped() const {
    ModelPair out = *this;
    std::swap(out.m1, out.m2);
    std::swap(out.prior_m1, out.prior_m2);
    return out;
}

BuiltinPair parse_builtin_pair(const std::string& name) {
    if (name == "data1") return BuiltinPair::data1;
    if (name == "data2") return BuiltinPair::data2;
    if (name == "data3") return BuiltinPair::data3;
    if (name == "mpt") return BuiltinPair::mpt;
    throw InvalidParameter("unknown model pair '" + name + "'");
}

std::string to_string(BuiltinPair name) {
    switch (name) {
    case BuiltinPair::data1: return "data1";
    case BuiltinPair::data2: return "data2";
    case BuiltinPair::data3: return "data3";
    case BuiltinPair::mpt: return "mpt";
    }
    return "?";
}

namespace {

double sum_of(std::span<const double> y) { return std::accumulate(y.begin(), y.end(), 0.0); }

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Reads the allowed keys, falling back to defaults, and rejects the rest.
class KeyReader {
public:
    KeyReader(const Hyperparams& hp, std::string family) : hp_(hp), family_(std::move(family)) {}

    double get(const std::string& key, double fallback) {
        seen_.insert(key);
        auto it = hp_.find(key);
        return it == hp_.end() ? fallback : it->second;
    }

    double positive(const std::string& key, double fallback) {
        const double v = get(key, fallback);
        if (!(std::isfinite(v) && v > 0.0))
            throw InvalidParameter(family_ + ": hyperparameter '" + key + "' must be finite and > 0");
        return v;
    }

    double finite(const std::string& key, double fallback) {
        const double v = get(key, fallback);
        if (!std::isfinite(v)) throw InvalidParameter(family_ + ": hyperparameter '" + key + "' must be finite");
        return v;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : hp_) {
            if (!seen_.count(key)) throw InvalidParameter(family_ + ": unknown hyperparameter '" + key + "'");
        }
    }

private:
    const Hyperparams& hp_;
    std::string family_;
    std::set<std::string> seen_;
};

Data iid(std::size_t n, const std::function<double()>& draw) {
    Data y(n);
    for (auto& v : y) v = draw();
    return y;
}

// --- data1: negative binomial against Poisson --------------------------------

std::pair<ModelSpec, ModelSpec> data1_models(double a1, double b1, double a2, double b2) {
    ModelSpec nb;
    nb.id = "data1.m1.negbin";
    nb.param_dim = 1;
    nb.support = {SupportKind::nonneg_integers};
    nb.prior_sampler = [a1, b1](RngStream& rng) { return std::vector<double>{rng.beta(a1, b1)}; };
    nb.conditional_sampler = [](std::span<const double> theta, std::size_t n, RngStream& rng) {
        const double p = theta[0];
        return iid(n, [&] { return static_cast<double>(rng.neg_binomial(1.0, p)); });
    };
    nb.exact_log_marginal = [a1, b1](std::span<const double> y) {
        const double n = static_cast<double>(y.size());
        return log_beta_fn(a1 + n, b1 + sum_of(y)) - log_beta_fn(a1, b1);
    };
    nb.posterior_predictive = [a1, b1](std::span<const double> y_obs, std::size_t m, RngStream& rng) {
        const double n = static_cast<double>(y_obs.size());
        const double s = sum_of(y_obs);
        return iid(m, [&] { return static_cast<double>(rng.neg_binomial(1.0, rng.beta(a1 + n, b1 + s))); });
    };

    ModelSpec pois;
    pois.id = "data1.m2.poisson";
    pois.param_dim = 1;
    pois.support = {SupportKind::nonneg_integers};
    pois.prior_sampler = [a2, b2](RngStream& rng) { return std::vector<double>{rng.gamma(a2, b2)}; };
    pois.conditional_sampler = [](std::span<const double> theta, std::size_t n, RngStream& rng) {
        const double lambda = theta[0];
        return iid(n, [&] { return static_cast<double>(rng.poisson(lambda)); });
    };
    pois.exact_log_marginal = [a2, b2](std::span<const double> y) {
        const double n = static_cast<double>(y.size());
        const double s = sum_of(y);
        double log_fact = 0.0;
        for (double v : y) log_fact += std::lgamma(v + 1.0);
        return a2 * std::log(b2) + std::lgamma(s + a2) - std::lgamma(a2) - (s + a2) * std::log(n + b2) - log_fact;
    };
    pois.posterior_predictive = [a2, b2](std::span<const double> y_obs, std::size_t m, RngStream& rng) {
        const double n = static_cast<double>(y_obs.size());
        const double s = sum_of(y_obs);
        return iid(m, [&] { return static_cast<double>(rng.poisson(rng.gamma(a2 + s, b2 + n))); });
    };
    return {nb, pois};
}

// --- data2: Gaussian mixture against a single Gaussian -----------------------

struct NormalGroup {
    double prior_mean;
    double prior_var;
    double noise_var;
};

/// log N(y; mu0 1, s2 I + t2 11') from the residual statistics of the m
/// observations assigned to the group: sr = sum(y - mu0), sr2 = sum((y - mu0)^2).
double group_log_marginal(double m, double sr, double sr2, const NormalGroup& g) {
    if (m == 0.0) return 0.0;
    const double s2 = g.noise_var;
    const double denom = s2 + m * g.prior_var;
    const double quad = (sr2 - g.prior_var * sr * sr / denom) / s2;
    return -0.5 * m * std::log(2.0 * std::numbers::pi) - 0.5 * (m - 1.0) * std::log(s2) - 0.5 * std::log(denom) -
           0.5 * quad;
}

double group_log_marginal(std::span<const double> y, const NormalGroup& g) {
    double sr = 0.0, sr2 = 0.0;
    for (double v : y) {
        const double r = v - g.prior_mean;
        sr += r;
        sr2 += r * r;
    }
    return group_log_marginal(static_cast<double>(y.size()), sr, sr2, g);
}

std::pair<ModelSpec, ModelSpec> data2_models(double mean1, double mean2, double mix_prior_sd, double mix_noise_sd,
                                             double single_mean, double single_prior_sd, double single_noise_sd) {
    ModelSpec mix;
    mix.id = "data2.m1.mixture";
    mix.param_dim = 2;
    mix.support = {SupportKind::reals};
    mix.prior_sampler = [=](RngStream& rng) {
        const double mu1 = rng.normal(mean1, mix_prior_sd);
        const double mu2 = rng.normal(mean2, mix_prior_sd);
        return std::vector<double>{mu1, mu2};
    };
    mix.conditional_sampler = [mix_noise_sd](std::span<const double> theta, std::size_t n, RngStream& rng) {
        const double mu1 = theta[0], mu2 = theta[1];
        return iid(n, [&] {
            const bool first = rng.uniform01() < 0.5;
            return rng.normal(first ? mu1 : mu2, mix_noise_sd);
        });
    };
    const NormalGroup g1{mean1, mix_prior_sd * mix_prior_sd, mix_noise_sd * mix_noise_sd};
    const NormalGroup g2{mean2, mix_prior_sd * mix_prior_sd, mix_noise_sd * mix_noise_sd};
    mix.exact_log_marginal = [g1, g2](std::span<const double> y) {
        if (y.size() > kMixtureExhaustiveLimit)
            throw NoOracle("mixture marginal is only summed exhaustively for n <= 20");
        // Sum over all 2^n component assignments, each with probability 2^-n.
        const std::uint64_t count = std::uint64_t{1} << y.size();
        double acc_max = -std::numeric_limits<double>::infinity();
        double acc = 0.0;
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            double m1 = 0.0, sr1 = 0.0, sq1 = 0.0, m2 = 0.0, sr2 = 0.0, sq2 = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if ((mask >> i) & 1U) {
                    const double r = y[i] - g1.prior_mean;
                    m1 += 1.0;
                    sr1 += r;
                    sq1 += r * r;
                } else {
                    const double r = y[i] - g2.prior_mean;
                    m2 += 1.0;
                    sr2 += r;
                    sq2 += r * r;
                }
            }
            const double term = group_log_marginal(m1, sr1, sq1, g1) + group_log_marginal(m2, sr2, sq2, g2);
            if (term > acc_max) {
                acc = acc * std::exp(acc_max - term) + 1.0;
                acc_max = term;
            } else {
                acc += std::exp(term - acc_max);
            }
        }
        return acc_max + std::log(acc) - static_cast<double>(y.size()) * std::numbers::ln2;
    };

    ModelSpec single;
    single.id = "data2.m2.normal";
    single.param_dim = 1;
    single.support = {SupportKind::reals};
    single.prior_sampler = [=](RngStream& rng) { return std::vector<double>{rng.normal(single_mean, single_prior_sd)}; };
    single.conditional_sampler = [single_noise_sd](std::span<const double> theta, std::size_t n, RngStream& rng) {
        const double mu = theta[0];
        return iid(n, [&] { return rng.normal(mu, single_noise_sd); });
    };
    const NormalGroup gs{single_mean, single_prior_sd * single_prior_sd, single_noise_sd * single_noise_sd};
    single.exact_log_marginal = [gs](std::span<const double> y) { return group_log_marginal(y, gs); };
    single.posterior_predictive = [gs, single_noise_sd](std::span<const double> y_obs, std::size_t m, RngStream& rng) {
        const double n = static_cast<double>(y_obs.size());
        const double post_var = 1.0 / (1.0 / gs.prior_var + n / gs.noise_var);
        const double post_mean = post_var * (gs.prior_mean / gs.prior_var + sum_of(y_obs) / gs.noise_var);
        const double post_sd = std::sqrt(post_var);
        return iid(m, [&] { return rng.normal(rng.normal(post_mean, post_sd), single_noise_sd); });
    };
    return {mix, single};
}

// --- data3: hierarchical exponential against a fixed rate --------------------

std::pair<ModelSpec, ModelSpec> data3_models(double shape, double rate, double fixed_rate) {
    ModelSpec hier;
    hier.id = "data3.m1.gamma_exponential";
    hier.param_dim = 1;
    hier.support = {SupportKind::nonneg_reals};
    hier.prior_sampler = [shape, rate](RngStream& rng) { return std::vector<double>{rng.gamma(shape, rate)}; };
    hier.conditional_sampler = [](std::span<const double> theta, std::size_t n, RngStream& rng) {
        const double lambda = theta[0];
        return iid(n, [&] { return rng.exponential(lambda); });
    };
    hier.exact_log_marginal = [shape, rate](std::span<const double> y) {
        const double n = static_cast<double>(y.size());
        const double s = sum_of(y);
        return shape * std::log(rate) - std::lgamma(shape) + std::lgamma(n + shape) - (n + shape) * std::log(s + rate);
    };
    hier.posterior_predictive = [shape, rate](std::span<const double> y_obs, std::size_t m, RngStream& rng) {
        const double n = static_cast<double>(y_obs.size());
        const double s = sum_of(y_obs);
        return iid(m, [&] { return rng.exponential(rng.gamma(shape + n, rate + s)); });
    };

    ModelSpec fixed;
    fixed.id = "data3.m2.exponential";
    fixed.param_dim = 1;
    fixed.support = {SupportKind::nonneg_reals};
    fixed.prior_sampler = [fixed_rate](RngStream&) { return std::vector<double>{fixed_rate}; };
    fixed.conditional_sampler = [](std::span<const double> theta, std::size_t n, RngStream& rng) {
        const double lambda = theta[0];
        return iid(n, [&] { return rng.exponential(lambda); });
    };
    fixed.exact_log_marginal = [fixed_rate](std::span<const double> y) {
        return static_cast<double>(y.size()) * std::log(fixed_rate) - fixed_rate * sum_of(y);
    };
    // The parameter is fixed, so the predictive ignores the observed data.
    fixed.posterior_predictive = [fixed_rate](std::span<const double>, std::size_t m, RngStream& rng) {
        return iid(m, [&] { return rng.exponential(fixed_rate); });
    };
    return {hier, fixed};
}

} // namespace

// --- MPT ------------------------------------------------------------------------

std::size_t MptSpec::data_length() const { return layout == MptLayout::full ? 6 * n_participants : 12; }

std::array<double, 6> mpt_cell_probabilities(MptTree tree, double a, double b, double c) {
    if (tree == MptTree::process_dissociation) {
        return {
            c + (1 - c) * (a + (1 - a) * b),
            c + (1 - c) * (1 - a) * (1 - b),
            c + (1 - c) * (1 - a) * b,
            c + (1 - c) * (a + (1 - a) * (1 - b)),
            c + (1 - c) * b,
            c + (1 - c) * (1 - b),
        };
    }
    return {
        a + (1 - a) * (c + (1 - c) * b),
        (1 - a) * (c + (1 - c) * (1 - b)),
        (1 - a) * (c + (1 - c) * b),
        a + (1 - a) * (c + (1 - c) * (1 - b)),
        c + (1 - c) * b,
        c + (1 - c) * (1 - b),
    };
}

ModelSpec make_mpt_model(MptTree tree, const MptSpec& spec) {
    if (spec.trials_per_cell == 0 || spec.n_participants == 0)
        throw InvalidParameter("mpt: trials_per_cell and n_participants must be positive");
    for (const auto& [alpha, beta] : spec.priors) {
        if (!(std::isfinite(alpha) && alpha > 0.0 && std::isfinite(beta) && beta > 0.0))
            throw InvalidParameter("mpt: Beta prior parameters must be > 0");
    }
    ModelSpec model;
    model.id = tree == MptTree::process_dissociation ? "mpt.m1.pd" : "mpt.m2.stroop";
    model.param_dim = 3;
    const std::uint64_t bound =
        spec.layout == MptLayout::full ? spec.trials_per_cell : spec.trials_per_cell * spec.n_participants;
    model.support = {SupportKind::counts_bounded, bound};
    model.prior_sampler = [priors = spec.priors](RngStream& rng) {
        std::vector<double> theta(3);
        for (std::size_t i = 0; i < 3; ++i) theta[i] = rng.beta(priors[i].first, priors[i].second);
        return theta;
    };
    model.conditional_sampler = [tree, spec](std::span<const double> theta, std::size_t n, RngStream& rng) {
        if (n != spec.data_length())
            throw InvalidParameter("mpt: dataset length must be " + std::to_string(spec.data_length()));
        const auto p = mpt_cell_probabilities(tree, theta[0], theta[1], theta[2]);
        Data y(n);
        if (spec.layout == MptLayout::full) {
            // Parameters are shared by every participant.
            for (std::size_t i = 0; i < spec.n_participants; ++i)
                for (std::size_t j = 0; j < 6; ++j)
                    y[6 * i + j] = static_cast<double>(rng.binomial(spec.trials_per_cell, p[j]));
        } else {
            const std::uint64_t total = spec.trials_per_cell * spec.n_participants;
            for (std::size_t j = 0; j < 6; ++j) {
                const std::uint64_t k = rng.binomial(total, p[j]);
                y[j] = static_cast<double>(k);
                y[6 + j] = static_cast<double>(total - k);
            }
        }
        return y;
    };
    return model;
}

// --- Builtin registry --------------------------------------------------------

ModelPair make_builtin_pair(BuiltinPair name, const Hyperparams& hyperparams) {
    const std::string family = to_string(name);
    KeyReader keys(hyperparams, family);
    ModelPair pair;
    pair.name = family;
    pair.hyperparams = hyperparams;
    switch (name) {
    case BuiltinPair::data1: {
        const double a1 = keys.positive("alpha1", 1.0), b1 = keys.positive("beta1", 1.0);
        const double a2 = keys.positive("alpha2", 1.0), b2 = keys.positive("beta2", 1.0);
        std::tie(pair.m1, pair.m2) = data1_models(a1, b1, a2, b2);
        break;
    }
    case BuiltinPair::data2: {
        const double mean1 = keys.finite("mix_mean1", 2.0), mean2 = keys.finite("mix_mean2", -2.0);
        const double prior_sd = keys.positive("mix_prior_sd", 1.5), noise_sd = keys.positive("mix_noise_sd", 2.0);
        const double single_mean = keys.finite("single_prior_mean", 0.0);
        const double single_sd = keys.positive("single_prior_sd", 1.0);
        const double single_noise = keys.positive("single_noise_sd", 2.5);
        std::tie(pair.m1, pair.m2) =
            data2_models(mean1, mean2, prior_sd, noise_sd, single_mean, single_sd, single_noise);
        break;
    }
    case BuiltinPair::data3: {
        const double shape = keys.positive("gamma_shape", 2.0), rate = keys.positive("gamma_rate", 2.0);
        const double fixed = keys.positive("fixed_rate", 3.0);
        std::tie(pair.m1, pair.m2) = data3_models(shape, rate, fixed);
        break;
    }
    case BuiltinPair::mpt: {
        MptSpec spec;
        const double trials = keys.positive("trials_per_cell", 36.0);
        const double participants = keys.positive("n_participants", 42.0);
        if (trials != std::floor(trials) || participants != std::floor(participants))
            throw InvalidParameter("mpt: trials_per_cell and n_participants must be integers");
        spec.trials_per_cell = static_cast<std::uint64_t>(trials);
        spec.n_participants = static_cast<std::size_t>(participants);
        const double summed = keys.get("summed", 0.0);
        if (summed != 0.0 && summed != 1.0) throw InvalidParameter("mpt: 'summed' must be 0 or 1");
        spec.layout = summed == 1.0 ? MptLayout::summed : MptLayout::full;
        const char* names[3] = {"a", "b", "c"};
        for (std::size_t i = 0; i < 3; ++i) {
            const std::string base = std::string("prior_") + names[i];
            spec.priors[i] = {keys.positive(base + "_alpha", 1.0), keys.positive(base + "_beta", 1.0)};
        }
        pair.m1 = make_mpt_model(MptTree::process_dissociation, spec);
        pair.m2 = make_mpt_model(MptTree::stroop, spec);
        break;
    }
    }
    pair.prior_m1 = keys.get("prior_m1", 0.5);
    pair.prior_m2 = 1.0 - pair.prior_m1;
    keys.reject_unknown();
    pair.validate();
    return pair;
}

ModelPair make_builtin_pair(const std::string& name, const Hyperparams& hyperparams) {
    return make_builtin_pair(parse_builtin_pair(name), hyperparams);
}

// --- Operations ----------------------------------------------------------------

std::pair<std::vector<double>, Data> simulate_with_parameters(const ModelSpec& model, std::size_t n,
                                                              RngStream& rng) {
    if (n == 0) throw InvalidParameter("dataset length must be >= 1");
    auto theta = model.prior_sampler(rng);
    auto y = model.conditional_sampler(theta, n, rng);
    return {std::move(theta), std::move(y)};
}

Data simulate_dataset(const ModelSpec& model, std::size_t n, RngStream& rng) {
    return simulate_with_parameters(model, n, rng).second;
}

double exact_log_bf(const ModelPair& pair, std::span<const double> y) {
    if (!pair.m1.exact_log_marginal || !pair.m2.exact_log_marginal)
        throw NoOracle("model pair '" + pair.name + "' has no closed-form marginal likelihood");
    return pair.m1.exact_log_marginal(y) - pair.m2.exact_log_marginal(y);
}

Data posterior_predictive_sample(const ModelSpec& model, std::span<const double> y_obs, std::size_t m,
                                 RngStream& rng) {
    if (!model.posterior_predictive)
        throw Unsupported("model '" + model.id + "' has no conjugate posterior predictive sampler");
    if (m == 0) throw InvalidParameter("posterior predictive sample size must be >= 1");
    return model.posterior_predictive(y_obs, m, rng);
}

} // namespace deepbf
