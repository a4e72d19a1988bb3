#include "deepbf/abc.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "deepbf/error.hpp"
#include "deepbf/kernels.hpp"
#include "deepbf/nn.hpp"
#include "deepbf/parallel.hpp"

namespace deepbf {

std::string to_string(AbcDistance d) { return d == AbcDistance::euclidean ? "euclidean" : "euclidean_on_sorted"; }

AbcDistance parse_abc_distance(const std::string& name) {
    if (name == "euclidean") return AbcDistance::euclidean;
    if (name == "euclidean_on_sorted") return AbcDistance::euclidean_on_sorted;
    throw InvalidParameter("unknown ABC distance '" + name + "' (expected euclidean or euclidean_on_sorted)");
}

void AbcConfig::validate() const {
    if (total_samples == 0 || strata == 0 || per_stratum_keep == 0)
        throw InvalidParameter("ABC sample, strata and keep counts must be positive");
    if (total_samples % strata != 0) throw InvalidParameter("ABC strata must divide total_samples");
    if (per_stratum_keep > total_samples / strata)
        throw InvalidParameter("ABC per_stratum_keep exceeds the stratum size");
    if (final_keep < 2) throw InvalidParameter("ABC final_keep must be at least 2");
    if (strata * per_stratum_keep < final_keep) throw InvalidParameter("ABC needs strata * per_stratum_keep >= final_keep");
}

bool survivor_less(const AbcSurvivor& a, const AbcSurvivor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.index < b.index;
}

std::vector<AbcSurvivor> stratum_topk(std::span<const double> distances, std::span<const int> labels, std::size_t keep,
                                      std::uint64_t index_offset) {
    if (distances.size() != labels.size()) throw ShapeMismatch("distances and labels differ in length");
    if (keep > distances.size()) throw InvalidParameter("cannot keep more entries than there are");
    std::vector<AbcSurvivor> all(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i) all[i] = {distances[i], index_offset + i, labels[i]};
    const auto mid = all.begin() + static_cast<std::ptrdiff_t>(keep);
    std::partial_sort(all.begin(), mid, all.end(), survivor_less);
    all.erase(mid, all.end());
    return all;
}

double abc_smoothed_estimate(std::size_t n1, std::size_t n2, double prior_m1, double prior_m2) {
    return (prior_m2 * static_cast<double>(n1 + 1)) / (prior_m1 * static_cast<double>(n2 + 1));
}

namespace {

struct QueryState {
    std::vector<AbcSurvivor> top; // running global top-k, sorted
    // Smallest candidate any stratum had to drop (its (k-tilde + 1)-th).
    AbcSurvivor min_dropped{std::numeric_limits<double>::infinity(), std::numeric_limits<std::uint64_t>::max(), 0};
};

Data summarize(const AbcConfig& cfg, std::span<const double> y) {
    Data s = cfg.summary ? cfg.summary(y) : Data(y.begin(), y.end());
    if (cfg.distance == AbcDistance::euclidean_on_sorted) std::sort(s.begin(), s.end());
    return s;
}

} // namespace

std::vector<AbcResult> abc_estimate_batch(const ModelPair& pair, std::span<const Data> queries, const AbcConfig& cfg,
                                          RngStream& rng) {
    cfg.validate();
    pair.validate();
    if (queries.empty()) throw InvalidParameter("ABC needs at least one query");
    const std::size_t n = queries[0].size();
    for (const Data& q : queries)
        if (q.size() != n) throw ShapeMismatch("all ABC queries must share one length");

    std::vector<Data> qs;
    qs.reserve(queries.size());
    for (const Data& q : queries) qs.push_back(summarize(cfg, q));
    const std::size_t dim = qs[0].size();

    const std::size_t stratum_size = cfg.total_samples / cfg.strata;
    const std::size_t keep = cfg.per_stratum_keep, k = cfg.final_keep;
    // One extra candidate per stratum decides the exactness flag.
    const std::size_t probe = std::min(keep + 1, stratum_size);
    const auto& kern = kernels::active();

    std::vector<QueryState> state(qs.size());
    Matrix refs(stratum_size, dim);
    std::vector<int> labels(stratum_size);

    for (std::size_t s = 0; s < cfg.strata; ++s) {
        const RngStream srng = rng.substream(s);
        parallel_for(stratum_size, [&](std::size_t j) {
            RngStream r = srng.substream(j);
            const bool from_m1 = r.uniform01() < pair.prior_m1;
            const Data y = simulate_dataset(from_m1 ? pair.m1 : pair.m2, n, r);
            const Data sy = summarize(cfg, y);
            if (sy.size() != dim) throw ShapeMismatch("summary statistic changed length");
            std::copy(sy.begin(), sy.end(), refs.row(j));
            labels[j] = from_m1 ? 1 : 2;
        });
        const std::uint64_t offset = static_cast<std::uint64_t>(s) * stratum_size;
        parallel_for(qs.size(), [&](std::size_t q) {
            std::vector<double> dist(stratum_size);
            kern.sq_distances(qs[q].data(), refs.data.data(), stratum_size, dim, dist.data());
            std::vector<AbcSurvivor> cand = stratum_topk(dist, labels, probe, offset);
            QueryState& st = state[q];
            if (cand.size() > keep) {
                if (survivor_less(cand[keep], st.min_dropped)) st.min_dropped = cand[keep];
                cand.resize(keep);
            }
            std::vector<AbcSurvivor> merged;
            merged.reserve(st.top.size() + cand.size());
            std::merge(st.top.begin(), st.top.end(), cand.begin(), cand.end(), std::back_inserter(merged), survivor_less);
            if (merged.size() > k) merged.resize(k);
            st.top = std::move(merged);
        });
    }

    std::vector<AbcResult> out(qs.size());
    for (std::size_t q = 0; q < qs.size(); ++q) {
        const QueryState& st = state[q];
        AbcResult& r = out[q];
        for (const AbcSurvivor& a : st.top) (a.label == 1 ? r.n1 : r.n2) += 1;
        r.estimate = abc_smoothed_estimate(r.n1, r.n2, pair.prior_m1, pair.prior_m2);
        // A dropped candidate ranking ahead of the final k-th would have made
        // the global top-k.
        r.exact = !survivor_less(st.min_dropped, st.top.back());
    }
    return out;
}

} // namespace deepbf
