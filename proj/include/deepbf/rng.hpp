#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

namespace deepbf {

/// Seeded xoshiro256** stream. The state is derived from (seed, stream_id)
/// through splitmix64, so equal arguments give bit-identical sequences and
/// distinct stream ids give unrelated ones.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01();
    /// Uniform on the open interval (0, 1); safe under log().
    double uniform_open();

    double normal(double mean, double sd);
    double gamma(double shape, double rate);
    double beta(double a, double b);
    double exponential(double rate);
    std::uint64_t poisson(double mean);
    /// P(Y = y) = C(y + r - 1, y) p^r (1 - p)^y, y = 0, 1, 2, ...
    std::uint64_t neg_binomial(double r, double p);
    std::uint64_t binomial(std::uint64_t trials, double p);
    std::size_t categorical(const std::vector<double>& weights);

    /// Independent child stream; deterministic in (seed, stream_id, index).
    RngStream substream(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> s_{};
    double spare_normal_ = 0.0;
    bool has_spare_ = false;

    std::uint64_t poisson_ptrs(double mean);
    std::uint64_t binomial_inversion(std::uint64_t trials, double p);
};

RngStream new_stream(std::uint64_t seed, std::uint64_t stream_id);

namespace dist {
struct Uniform01 {};
struct Normal { double mean; double sd; };
struct Gamma { double shape; double rate; };
struct Beta { double a; double b; };
struct Exponential { double rate; };
struct Poisson { double mean; };
struct NegBinomial { double r; double p; };
struct Binomial { std::uint64_t trials; double p; };
struct Categorical { std::vector<double> weights; };
} // namespace dist

using DistSpec = std::variant<dist::Uniform01, dist::Normal, dist::Gamma, dist::Beta,
                              dist::Exponential, dist::Poisson, dist::NegBinomial,
                              dist::Binomial, dist::Categorical>;

/// Throws InvalidParameter when the spec violates its parameter constraints.
void validate(const DistSpec& spec);

/// One draw. Integer-valued families are returned as exact doubles.
double sample(const DistSpec& spec, RngStream& rng);

} // namespace deepbf
