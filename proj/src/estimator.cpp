#include "deepbf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "deepbf/checkpoint.hpp"
#include "deepbf/error.hpp"
#include "deepbf/parallel.hpp"

namespace deepbf {

std::string to_string(Direction d) { return d == Direction::m1_vs_m2 ? "m1_vs_m2" : "m2_vs_m1"; }

Direction parse_direction(const std::string& name) {
    if (name == "m1_vs_m2") return Direction::m1_vs_m2;
    if (name == "m2_vs_m1") return Direction::m2_vs_m1;
    throw InvalidParameter("unknown direction '" + name + "' (expected m1_vs_m2 or m2_vs_m1)");
}

Direction reversed(Direction d) { return d == Direction::m1_vs_m2 ? Direction::m2_vs_m1 : Direction::m1_vs_m2; }

void TrainConfig::validate() const {
    if (iterations < 1) throw InvalidParameter("train.iterations must be at least 1");
    if (minibatch_per_model < 2) throw InvalidParameter("train.minibatch_per_model must be at least 2");
    if (eval_reference_batch < 2) throw InvalidParameter("train.eval_reference_batch must be at least 2");
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidParameter("train.eps must be finite and nonnegative");
    deepbf::validate(arch);
    (void)make_adam_state(Network{}, adam);
}

namespace {

// Substream layout of the training stream.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kReferenceStream = 1;
constexpr std::uint64_t kFirstIterationStream = 2;

// Fills rows [row0, row0 + count) of x with datasets from `model`, dataset i
// drawing from rng.substream(stream0 + i).
void simulate_rows(const ModelSpec& model, std::size_t n, const RngStream& rng, std::uint64_t stream0,
                   std::size_t count, Matrix& x, std::size_t row0) {
    parallel_for(count, [&](std::size_t i) {
        RngStream s = rng.substream(stream0 + i);
        const Data y = simulate_dataset(model, n, s);
        std::copy(y.begin(), y.end(), x.row(row0 + i));
    });
}

const ModelSpec& label1_model(const ModelPair& pair, Direction d) { return d == Direction::m1_vs_m2 ? pair.m1 : pair.m2; }
const ModelSpec& label0_model(const ModelPair& pair, Direction d) { return d == Direction::m1_vs_m2 ? pair.m2 : pair.m1; }

void check_length(const BfEstimator& est, std::size_t len) {
    if (len != est.n)
        throw ShapeMismatch("dataset has length " + std::to_string(len) + ", estimator was trained for n = " +
                            std::to_string(est.n));
}

double log_bf_from_logit(double z, double eps) {
    if (eps == 0.0) return z;
    return std::log(sigmoid(z) + eps) - std::log(sigmoid(-z) + eps);
}

double bf_from_logit(double z, double eps) {
    if (eps == 0.0) return std::exp(z);
    return (sigmoid(z) + eps) / (sigmoid(-z) + eps);
}

std::uint64_t uniform_below(RngStream& rng, std::uint64_t bound) {
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do x = rng.next_u64();
    while (x >= limit);
    return x % bound;
}

// C(n, k), or nullopt-like max() on overflow.
std::uint64_t choose_saturating(std::size_t n, std::size_t k) {
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    k = std::min(k, n - k);
    unsigned __int128 c = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > kMax) return kMax;
    }
    return static_cast<std::uint64_t>(c);
}

// The rank-th size-k subset of {0..n-1} in lexicographic order.
std::vector<std::size_t> unrank_combination(std::size_t n, std::size_t k, std::uint64_t rank) {
    std::vector<std::size_t> out;
    out.reserve(k);
    std::size_t next = 0;
    for (std::size_t slot = 0; slot < k; ++slot) {
        for (std::size_t v = next;; ++v) {
            const std::uint64_t with_v = choose_saturating(n - v - 1, k - slot - 1);
            if (rank < with_v) {
                out.push_back(v);
                next = v + 1;
                break;
            }
            rank -= with_v;
        }
    }
    return out;
}

} // namespace

BfEstimator train(const ModelPair& pair, std::size_t n, const TrainConfig& cfg, RngStream& rng) {
    if (n < 1) throw InvalidParameter("dataset length n must be at least 1");
    cfg.validate();
    pair.validate();

    BfEstimator est;
    RngStream init = rng.substream(kInitStream);
    est.net = build_network(cfg.arch, n, init);
    est.adam = make_adam_state(est.net, cfg.adam);
    est.pair_name = pair.name;
    est.hyperparams = pair.hyperparams;
    est.prior_m1 = pair.prior_m1;
    est.n = n;
    est.direction = cfg.direction;
    est.eps = cfg.eps;
    est.seed = cfg.seed;
    est.train_config_hash = config_hash(to_json(cfg));

    const ModelSpec& pos = label1_model(pair, cfg.direction);
    const ModelSpec& neg = label0_model(pair, cfg.direction);
    const std::size_t s = cfg.minibatch_per_model;

    Batch batch;
    batch.x = Matrix(2 * s, n);
    batch.labels.assign(2 * s, 0.0);
    std::fill(batch.labels.begin(), batch.labels.begin() + static_cast<std::ptrdiff_t>(s), 1.0);

    for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
        const RngStream it = rng.substream(kFirstIterationStream + t);
        simulate_rows(pos, n, it, 0, s, batch.x, 0);
        simulate_rows(neg, n, it, s, s, batch.x, s);
        const LossGrad lg = backward(est.net, batch);
        if (!std::isfinite(lg.loss))
            throw NumericFailure("non-finite training loss at iteration " + std::to_string(t + 1));
        adam_step(est.net, lg.grad, est.adam);
    }

    if (est.net.has_batchnorm()) {
        const std::size_t r = cfg.eval_reference_batch;
        const RngStream ref = rng.substream(kReferenceStream);
        est.reference = Matrix(r, n);
        simulate_rows(pair.m1, n, ref, 0, r / 2, est.reference, 0);
        simulate_rows(pair.m2, n, ref, r / 2, r - r / 2, est.reference, r / 2);
    }
    return est;
}

double bf_from_probability(double d, double eps) { return (d + eps) / ((1.0 - d) + eps); }

std::vector<double> estimate_logits(const BfEstimator& est, std::span<const Data> ys) {
    for (const Data& y : ys) check_length(est, y.size());
    std::vector<double> out(ys.size());
    const std::size_t n = est.n;
    if (est.net.has_batchnorm()) {
        // Each query is normalised together with the reference batch.
        const std::size_t r = est.reference.rows;
        if (r == 0) throw InvalidParameter("batch-norm estimator has no reference batch");
        parallel_for(ys.size(), [&](std::size_t q) {
            Matrix x(r + 1, n);
            std::copy(est.reference.data.begin(), est.reference.data.end(), x.data.begin());
            std::copy(ys[q].begin(), ys[q].end(), x.row(r));
            out[q] = forward_logits(est.net, x, Mode::eval)[r];
        });
        return out;
    }
    constexpr std::size_t kChunk = 2048;
    const std::size_t chunks = (ys.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunk, end = std::min(ys.size(), begin + kChunk);
        Matrix x(end - begin, n);
        for (std::size_t q = begin; q < end; ++q) std::copy(ys[q].begin(), ys[q].end(), x.row(q - begin));
        const std::vector<double> z = forward_logits(est.net, x, Mode::eval);
        std::copy(z.begin(), z.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
    });
    return out;
}

std::vector<double> estimate_log_bf_batch(const BfEstimator& est, std::span<const Data> ys) {
    std::vector<double> z = estimate_logits(est, ys);
    for (double& v : z) v = log_bf_from_logit(v, est.eps);
    return z;
}

std::vector<double> estimate_bf_batch(const BfEstimator& est, std::span<const Data> ys) {
    std::vector<double> z = estimate_logits(est, ys);
    for (double& v : z) v = bf_from_logit(v, est.eps);
    return z;
}

double estimate_bf(const BfEstimator& est, std::span<const double> y) {
    const Data one(y.begin(), y.end());
    return estimate_bf_batch(est, std::span<const Data>(&one, 1))[0];
}

double estimate_log_bf(const BfEstimator& est, std::span<const double> y) {
    const Data one(y.begin(), y.end());
    return estimate_log_bf_batch(est, std::span<const Data>(&one, 1))[0];
}

double partial_bf(const BfEstimator& est_full, const BfEstimator& est_rev_sub, std::span<const double> y,
                  std::span<const std::size_t> split) {
    check_length(est_full, y.size());
    check_length(est_rev_sub, split.size());
    if (est_rev_sub.direction == est_full.direction)
        throw InvalidParameter("partial_bf needs the subset estimator trained in the reversed direction");
    Data x;
    x.reserve(split.size());
    for (std::size_t i : split) {
        if (i >= y.size()) throw ShapeMismatch("split index " + std::to_string(i) + " out of range");
        x.push_back(y[i]);
    }
    return estimate_bf(est_full, y) * estimate_bf(est_rev_sub, x);
}

double posterior_bf(const BfEstimator& est_double, const BfEstimator& est_rev, std::span<const double> y) {
    check_length(est_rev, y.size());
    check_length(est_double, 2 * y.size());
    Data yy(y.begin(), y.end());
    yy.insert(yy.end(), y.begin(), y.end());
    std::vector<std::size_t> split(y.size());
    std::iota(split.begin(), split.end(), std::size_t{0});
    return partial_bf(est_double, est_rev, yy, split);
}

std::vector<std::vector<std::size_t>> intrinsic_subsets(std::size_t n, std::size_t k, std::size_t subset_limit,
                                                        RngStream& rng) {
    if (k < 1 || k >= n) throw InvalidParameter("subset size must satisfy 1 <= n_x < n");
    if (subset_limit < 1) throw InvalidParameter("subset_limit must be positive");
    const std::uint64_t total = choose_saturating(n, k);
    std::vector<std::vector<std::size_t>> out;
    if (total <= subset_limit) {
        std::vector<std::size_t> c(k);
        std::iota(c.begin(), c.end(), std::size_t{0});
        while (true) {
            out.push_back(c);
            std::size_t i = k;
            while (i > 0 && c[i - 1] == n - k + i - 1) --i;
            if (i == 0) break;
            ++c[i - 1];
            for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
        }
        return out;
    }
    if (total < std::numeric_limits<std::uint64_t>::max()) {
        // Floyd's sampler over ranks, then unrank in ascending order.
        std::set<std::uint64_t> ranks;
        for (std::uint64_t j = total - subset_limit; j < total; ++j) {
            const std::uint64_t t = uniform_below(rng, j + 1);
            if (!ranks.insert(t).second) ranks.insert(j);
        }
        for (std::uint64_t r : ranks) out.push_back(unrank_combination(n, k, r));
        return out;
    }
    std::set<std::vector<std::size_t>> seen;
    std::vector<std::size_t> pool(n);
    while (seen.size() < subset_limit) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_below(rng, n - i)]);
        std::vector<std::size_t> c(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(c.begin(), c.end());
        seen.insert(std::move(c));
    }
    return {seen.begin(), seen.end()};
}

double intrinsic_bf(const BfEstimator& est_full, const BfEstimator& est_rev_sub, std::span<const double> y,
                    std::size_t n_x, IntrinsicMode mode, std::size_t subset_limit, RngStream& rng) {
    check_length(est_full, y.size());
    check_length(est_rev_sub, n_x);
    if (est_rev_sub.direction == est_full.direction)
        throw InvalidParameter("intrinsic_bf needs the subset estimator trained in the reversed direction");
    const auto subsets = intrinsic_subsets(y.size(), n_x, subset_limit, rng);
    std::vector<Data> xs;
    xs.reserve(subsets.size());
    for (const auto& s : subsets) {
        Data x;
        x.reserve(s.size());
        for (std::size_t i : s) x.push_back(y[i]);
        xs.push_back(std::move(x));
    }
    const double full = estimate_bf(est_full, y);
    const double count = static_cast<double>(xs.size());
    if (mode == IntrinsicMode::arithmetic) {
        double sum = 0.0;
        for (double b : estimate_bf_batch(est_rev_sub, xs)) sum += b;
        return full * (sum / count);
    }
    double sum_log = 0.0;
    for (double l : estimate_log_bf_batch(est_rev_sub, xs)) sum_log += l;
    return full * std::exp(sum_log / count);
}

} // namespace deepbf
