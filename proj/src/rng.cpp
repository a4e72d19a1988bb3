#include "deepbf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "deepbf/error.hpp"

namespace deepbf {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t x) { return splitmix64(x); }

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Below this mean Poisson draws use sequential-search inversion.
constexpr double kPoissonInversionLimit = 30.0;
// Binomial draws with trials * min(p, 1 - p) below this use inversion.
constexpr double kBinomialInversionLimit = 30.0;

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::uint64_t x = seed ^ mix64(stream_id + 0x632BE59BD9B4E019ULL);
    for (auto& w : s_) w = splitmix64(x);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RngStream new_stream(std::uint64_t seed, std::uint64_t stream_id) { return RngStream(seed, stream_id); }

RngStream RngStream::substream(std::uint64_t index) const {
    std::uint64_t x = stream_id_ * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL;
    std::uint64_t id = splitmix64(x) ^ mix64(index ^ 0xA0761D6478BD642FULL);
    return RngStream(seed_, id);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double RngStream::normal(double mean, double sd) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + sd * spare_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * f;
    has_spare_ = true;
    return mean + sd * (u * f);
}

// Marsaglia & Tsang (2000); shapes below one are boosted by U^(1/shape).
double RngStream::gamma(double shape, double rate) {
    if (shape < 1.0) {
        const double g = gamma(shape + 1.0, 1.0);
        return g * std::pow(uniform_open(), 1.0 / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal(0.0, 1.0);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

double RngStream::beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
}

double RngStream::exponential(double rate) { return -std::log(uniform_open()) / rate; }

std::uint64_t RngStream::poisson(double mean) {
    if (mean == 0.0) return 0;
    if (mean > kPoissonInversionLimit) return poisson_ptrs(mean);
    for (;;) {
        const double u = uniform01();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        // Rounding in the running sum can leave cdf a hair below u; restart
        // rather than walk into the far tail.
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        if (k < 1000) return k;
    }
}

// Hörmann (1993) transformed rejection with squeeze.
std::uint64_t RngStream::poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform01() - 0.5;
        const double v = uniform01();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

std::uint64_t RngStream::neg_binomial(double r, double p) {
    if (p == 1.0) return 0;
    if (r == 1.0) {
        // Geometric inversion: P(Y >= y) = (1 - p)^y.
        return static_cast<std::uint64_t>(std::floor(std::log(uniform_open()) / std::log1p(-p)));
    }
    return poisson(gamma(r, p / (1.0 - p)));
}

std::uint64_t RngStream::binomial_inversion(std::uint64_t trials, double p) {
    if (trials == 0 || p == 0.0) return 0;
    if (p > 0.5) return trials - binomial_inversion(trials, 1.0 - p);
    const double q = 1.0 - p;
    const double s = p / q;
    const double a = (static_cast<double>(trials) + 1.0) * s;
    for (;;) {
        double r = std::pow(q, static_cast<double>(trials));
        double u = uniform01();
        std::uint64_t x = 0;
        while (u > r) {
            u -= r;
            ++x;
            if (x > trials) break;
            r *= a / static_cast<double>(x) - s;
        }
        if (x <= trials) return x;
    }
}

// Devroye's order-statistic splitting: the i-th smallest of n uniforms is
// Beta(i, n + 1 - i); recursing on the side that contains p keeps the draw
// exact while shrinking the problem geometrically.
std::uint64_t RngStream::binomial(std::uint64_t trials, double p) {
    if (p == 0.0) return 0;
    if (p == 1.0) return trials;
    std::uint64_t acc = 0;
    while (static_cast<double>(trials) * std::min(p, 1.0 - p) >= kBinomialInversionLimit) {
        const std::uint64_t i = (trials + 1) / 2;
        const double x = beta(static_cast<double>(i), static_cast<double>(trials + 1 - i));
        if (x <= p) {
            acc += i;
            trials -= i;
            p = (p - x) / (1.0 - x);
        } else {
            trials = i - 1;
            p = p / x;
        }
    }
    return acc + binomial_inversion(trials, p);
}

std::size_t RngStream::categorical(const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = uniform01() * total;
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        cum += weights[i];
        last_positive = i;
        if (u < cum) return i;
    }
    return last_positive;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw InvalidParameter(std::string("invalid distribution parameter: ") + what);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }
bool probability(double x) { return x >= 0.0 && x <= 1.0; }

} // namespace

void validate(const DistSpec& spec) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, dist::Normal>) {
                require(std::isfinite(d.mean), "normal mean must be finite");
                require(positive(d.sd), "normal sd must be > 0");
            } else if constexpr (std::is_same_v<T, dist::Gamma>) {
                require(positive(d.shape) && positive(d.rate), "gamma shape and rate must be > 0");
            } else if constexpr (std::is_same_v<T, dist::Beta>) {
                require(positive(d.a) && positive(d.b), "beta a and b must be > 0");
            } else if constexpr (std::is_same_v<T, dist::Exponential>) {
                require(positive(d.rate), "exponential rate must be > 0");
            } else if constexpr (std::is_same_v<T, dist::Poisson>) {
                require(std::isfinite(d.mean) && d.mean >= 0.0, "poisson mean must be >= 0");
            } else if constexpr (std::is_same_v<T, dist::NegBinomial>) {
                require(positive(d.r), "neg_binomial r must be > 0");
                require(d.p > 0.0 && d.p <= 1.0, "neg_binomial p must lie in (0, 1]");
            } else if constexpr (std::is_same_v<T, dist::Binomial>) {
                require(probability(d.p), "binomial p must lie in [0, 1]");
            } else if constexpr (std::is_same_v<T, dist::Categorical>) {
                require(!d.weights.empty(), "categorical weights must be non-empty");
                double total = 0.0;
                for (double w : d.weights) {
                    require(std::isfinite(w) && w >= 0.0, "categorical weights must be >= 0");
                    total += w;
                }
                require(total > 0.0, "categorical weights must have a positive sum");
            }
        },
        spec);
}

double sample(const DistSpec& spec, RngStream& rng) {
    validate(spec);
    return std::visit(
        [&rng](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, dist::Uniform01>) return rng.uniform01();
            else if constexpr (std::is_same_v<T, dist::Normal>) return rng.normal(d.mean, d.sd);
            else if constexpr (std::is_same_v<T, dist::Gamma>) return rng.gamma(d.shape, d.rate);
            else if constexpr (std::is_same_v<T, dist::Beta>) return rng.beta(d.a, d.b);
            else if constexpr (std::is_same_v<T, dist::Exponential>) return rng.exponential(d.rate);
            else if constexpr (std::is_same_v<T, dist::Poisson>) return static_cast<double>(rng.poisson(d.mean));
            else if constexpr (std::is_same_v<T, dist::NegBinomial>)
                return static_cast<double>(rng.neg_binomial(d.r, d.p));
            else if constexpr (std::is_same_v<T, dist::Binomial>)
                return static_cast<double>(rng.binomial(d.trials, d.p));
            else return static_cast<double>(rng.categorical(d.weights));
        },
        spec);
}

} // namespace deepbf
