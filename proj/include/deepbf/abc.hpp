#pragma once

// Rank-based ABC Bayes factors from a stratified reference table.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepbf/models.hpp"
#include "deepbf/rng.hpp"

namespace deepbf {

enum class AbcDistance { euclidean, euclidean_on_sorted };

std::string to_string(AbcDistance d);
AbcDistance parse_abc_distance(const std::string& name);

struct AbcConfig {
    std::uint64_t total_samples = 100000; // M
    std::size_t strata = 100;             // m, divides M
    std::size_t per_stratum_keep = 10;    // k-tilde
    std::size_t final_keep = 100;         // k
    AbcDistance distance = AbcDistance::euclidean;
    /// Summary statistic; empty means the full dataset.
    std::function<Data(std::span<const double>)> summary;

    void validate() const;
};

struct AbcResult {
    double estimate = 1.0;
    std::size_t n1 = 0; // accepted datasets simulated from m1
    std::size_t n2 = 0;
    /// True when the stratified selection provably equals the global top-k.
    bool exact = true;
};

struct AbcSurvivor {
    double distance;
    std::uint64_t index; // position in the reference table
    int label;           // 1 or 2

    bool operator==(const AbcSurvivor&) const = default;
};

/// (distance, index) ordering used for every ranking.
bool survivor_less(const AbcSurvivor& a, const AbcSurvivor& b);

/// The keep smallest distances, ties broken by ascending index, sorted.
/// Indices are offset by index_offset.
std::vector<AbcSurvivor> stratum_topk(std::span<const double> distances, std::span<const int> labels, std::size_t keep,
                                      std::uint64_t index_offset = 0);

/// prior_m2 (n1 + 1) / (prior_m1 (n2 + 1)).
double abc_smoothed_estimate(std::size_t n1, std::size_t n2, double prior_m1, double prior_m2);

/// Simulates the reference table stratum by stratum (labels drawn from the
/// model priors) and scores every query against it. Only one stratum's
/// datasets and distances are held at a time.
///
/// Entry j of stratum s has table index s * (M / m) + j and is drawn from
/// r = rng.substream(s).substream(j): model 1 when r.uniform01() < prior_m1,
/// then simulate_dataset(model, n, r).
std::vector<AbcResult> abc_estimate_batch(const ModelPair& pair, std::span<const Data> queries, const AbcConfig& cfg,
                                          RngStream& rng);

} // namespace deepbf
