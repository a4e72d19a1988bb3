#include "deepbf/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "deepbf/error.hpp"
#include "deepbf/nn.hpp"
#include "deepbf/parallel.hpp"

namespace deepbf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Data> simulate_many(const ModelSpec& model, std::size_t n, std::size_t count, const RngStream& rng) {
    std::vector<Data> out(count);
    parallel_for(count, [&](std::size_t i) {
        RngStream r = rng.substream(i);
        out[i] = simulate_dataset(model, n, r);
    });
    return out;
}

std::vector<double> finite_only(std::span<const double> v) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v)
        if (std::isfinite(x)) out.push_back(x);
    return out;
}

double share_greater(const std::vector<double>& sorted, double x) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

double share_at_most(const std::vector<double>& sorted, double x) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

// Mean over i of (tail(exact_i) - tail(est_i))^2 for one model.
template <class Tail>
double tail_gap(std::span<const double> exact, std::span<const double> est, Tail tail) {
    const std::vector<double> se = sorted_copy(exact), ss = sorted_copy(est);
    double sum = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        const double d = tail(se, exact[i]) - tail(ss, est[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(exact.size());
}

void require_truth(const BfSampleSet& s, const char* what) {
    if (!s.has_truth()) throw NoOracle(std::string(what) + " needs exact log Bayes factors");
    if (s.true_m1.size() != s.est_m1.size() || s.true_m2.size() != s.est_m2.size())
        throw ShapeMismatch("exact and estimated samples differ in length");
}

} // namespace

LogBfEvaluator exact_evaluator(const ModelPair& pair) {
    return [pair](std::span<const Data> ys) {
        std::vector<double> out(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) out[i] = exact_log_bf(pair, ys[i]);
        return out;
    };
}

BfSampleSet simulate_sample_set(const ModelPair& pair, std::size_t n, std::size_t count, const LogBfEvaluator& est,
                                const LogBfEvaluator* exact, RngStream& rng) {
    if (count == 0) throw InvalidParameter("sample set needs at least one dataset per model");
    BfSampleSet s;
    s.prior_m1 = pair.prior_m1;
    s.prior_m2 = pair.prior_m2;
    const std::vector<Data> d1 = simulate_many(pair.m1, n, count, rng.substream(1));
    const std::vector<Data> d2 = simulate_many(pair.m2, n, count, rng.substream(2));
    s.est_m1 = est(d1);
    s.est_m2 = est(d2);
    if (exact != nullptr) {
        s.true_m1 = (*exact)(d1);
        s.true_m2 = (*exact)(d2);
    }
    return s;
}

MseResult mse_log_bf(const BfSampleSet& s) {
    require_truth(s, "mse_log_bf");
    MseResult r;
    auto term = [&](const std::vector<double>& t, const std::vector<double>& e) {
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!std::isfinite(t[i]) || !std::isfinite(e[i])) {
                ++r.excluded;
                continue;
            }
            const double d = t[i] - e[i];
            sum += d * d;
            ++used;
        }
        return used > 0 ? sum / static_cast<double>(used) : kNaN;
    };
    r.value = s.prior_m1 * term(s.true_m1, s.est_m1) + s.prior_m2 * term(s.true_m2, s.est_m2);
    return r;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i + 1;
        while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t) ranks[idx[t]] = r;
        i = j;
    }
    return ranks;
}

SpearmanResult spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("spearman inputs differ in length");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isnan(a[i]) && !std::isnan(b[i])) {
            x.push_back(a[i]);
            y.push_back(b[i]);
        }
    if (x.size() < 2) throw InvalidParameter("spearman needs at least two points");
    const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
    const double mean = 0.5 * static_cast<double>(x.size() + 1);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean, dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return {0.0, true};
    return {sxy / std::sqrt(sxx * syy), false};
}

SpearmanResult spearman_weighted(const BfSampleSet& s) {
    require_truth(s, "spearman_weighted");
    const SpearmanResult r1 = spearman(s.true_m1, s.est_m1), r2 = spearman(s.true_m2, s.est_m2);
    return {s.prior_m1 * r1.value + s.prior_m2 * r2.value, r1.degenerate || r2.degenerate};
}

double Kde::operator()(double x) const {
    const double norm = 1.0 / (static_cast<double>(points.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    double sum = 0.0;
    for (double p : points) {
        const double u = (x - p) / bandwidth;
        sum += std::exp(-0.5 * u * u);
    }
    return norm * sum;
}

Kde make_kde(std::span<const double> samples) {
    Kde k;
    k.points = finite_only(samples);
    if (k.points.empty()) throw InvalidParameter("KDE needs at least one finite sample");
    const double n = static_cast<double>(k.points.size());
    const double mean = std::accumulate(k.points.begin(), k.points.end(), 0.0) / n;
    double ss = 0.0;
    for (double p : k.points) ss += (p - mean) * (p - mean);
    const double sd = k.points.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    k.bandwidth = sd > 0.0 ? 1.06 * sd * std::pow(n, -0.2) : 1e-3 * std::max(1.0, std::fabs(mean));
    return k;
}

Grid kde_grid(const Kde& a, const Kde& b, std::size_t count) {
    if (count < 2) throw InvalidParameter("KDE grid needs at least two points");
    const auto [amin, amax] = std::minmax_element(a.points.begin(), a.points.end());
    const auto [bmin, bmax] = std::minmax_element(b.points.begin(), b.points.end());
    const double pad = 4.0 * std::max(a.bandwidth, b.bandwidth);
    return {std::min(*amin, *bmin) - pad, std::max(*amax, *bmax) + pad, count};
}

double kl_between_samples(std::span<const double> a, std::span<const double> b, std::size_t grid_points) {
    const Kde ka = make_kde(a), kb = make_kde(b);
    const Grid g = kde_grid(ka, kb, grid_points);
    double sum = 0.0;
    for (std::size_t i = 0; i < g.count; ++i) {
        const double x = g.at(i);
        const double p = std::max(ka(x), kKdeFloor), q = std::max(kb(x), kKdeFloor);
        sum += p * std::log(p / q);
    }
    return sum * g.step();
}

double posterior_model_prob(double bf, double prior_m1, double prior_m2) {
    if (!(bf >= 0.0)) throw InvalidParameter("Bayes factor must be nonnegative");
    if (std::isinf(bf)) return 1.0;
    return bf * prior_m1 / (bf * prior_m1 + prior_m2);
}

double posterior_model_prob_from_log(double log_bf, double prior_m1, double prior_m2) {
    if (std::isnan(log_bf)) throw InvalidParameter("log Bayes factor is NaN");
    return sigmoid(log_bf + std::log(prior_m1) - std::log(prior_m2));
}

double estimated_prior(const LogBfEvaluator& est, const ModelPair& pair, std::size_t n, std::size_t count,
                       RngStream& rng) {
    if (count == 0) throw InvalidParameter("estimated_prior needs at least one dataset");
    std::vector<Data> ys(count);
    parallel_for(count, [&](std::size_t i) {
        RngStream r = rng.substream(i);
        const bool from_m1 = r.uniform01() < pair.prior_m1;
        ys[i] = simulate_dataset(from_m1 ? pair.m1 : pair.m2, n, r);
    });
    double sum = 0.0;
    for (double l : est(ys)) sum += posterior_model_prob_from_log(l, pair.prior_m1, pair.prior_m2);
    return sum / static_cast<double>(count);
}

SurprisePair surprise(double bf_obs, std::span<const double> sims_m1, std::span<const double> sims_m2) {
    if (sims_m1.empty() || sims_m2.empty()) throw InvalidParameter("surprise needs simulations from both models");
    SurprisePair p;
    for (double v : sims_m1) p.p1 += v > bf_obs ? 1.0 : 0.0;
    for (double v : sims_m2) p.p2 += v <= bf_obs ? 1.0 : 0.0;
    p.p1 /= static_cast<double>(sims_m1.size());
    p.p2 /= static_cast<double>(sims_m2.size());
    return p;
}

double mse_surprise(const BfSampleSet& s) {
    require_truth(s, "mse_surprise");
    const double g1 = tail_gap(s.true_m1, s.est_m1, share_greater);
    const double g2 = tail_gap(s.true_m2, s.est_m2, share_at_most);
    return s.prior_m1 * g1 + s.prior_m2 * g2;
}

double mse_surprise(const LogBfEvaluator& est, const LogBfEvaluator& exact, const ModelPair& pair, std::size_t n,
                    std::size_t count, RngStream& rng) {
    return mse_surprise(simulate_sample_set(pair, n, count, est, &exact, rng));
}

double auc(std::span<const double> scores_m1, std::span<const double> scores_m2) {
    if (scores_m1.empty() || scores_m2.empty()) throw InvalidParameter("AUC needs scores from both models");
    const std::vector<double> s2 = sorted_copy(scores_m2);
    double wins = 0.0;
    for (double a : scores_m1) {
        const auto [lo, hi] = std::equal_range(s2.begin(), s2.end(), a);
        wins += static_cast<double>(lo - s2.begin()) + 0.5 * static_cast<double>(hi - lo);
    }
    return wins / (static_cast<double>(scores_m1.size()) * static_cast<double>(scores_m2.size()));
}

RocResult roc_auc(std::span<const double> scores_m1, std::span<const double> scores_m2) {
    RocResult r;
    r.auc = auc(scores_m1, scores_m2);
    const std::vector<double> s1 = sorted_copy(scores_m1), s2 = sorted_copy(scores_m2);
    std::vector<double> cuts;
    cuts.push_back(std::numeric_limits<double>::infinity());
    std::vector<double> all(s1);
    all.insert(all.end(), s2.begin(), s2.end());
    std::sort(all.begin(), all.end(), std::greater<>());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    for (double c : all)
        if (c != cuts.back()) cuts.push_back(c);
    if (cuts.back() != -std::numeric_limits<double>::infinity()) cuts.push_back(-std::numeric_limits<double>::infinity());
    for (double c : cuts) r.curve.emplace_back(share_greater(s2, c), share_greater(s1, c));
    return r;
}

double sign_agreement(const BfSampleSet& s) {
    require_truth(s, "sign_agreement");
    auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
    double agree = 0.0, total = 0.0;
    auto add = [&](const std::vector<double>& t, const std::vector<double>& e) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (std::isnan(t[i]) || std::isnan(e[i]) || std::abs(t[i]) <= kSignTolerance) continue;
            agree += sign(t[i]) == sign(e[i]) ? 1.0 : 0.0;
            total += 1.0;
        }
    };
    add(s.true_m1, s.est_m1);
    add(s.true_m2, s.est_m2);
    return total > 0.0 ? agree / total : kNaN;
}

std::size_t unsigned_truths(const BfSampleSet& s) {
    require_truth(s, "unsigned_truths");
    std::size_t count = 0;
    for (const auto* t : {&s.true_m1, &s.true_m2})
        for (double v : *t) count += std::abs(v) <= kSignTolerance ? 1 : 0;
    return count;
}

double EvalReport::get(const std::string& name, const std::string& model) const {
    for (const Metric& m : metrics)
        if (m.name == name && m.model == model) return m.value;
    throw InvalidParameter("report has no metric '" + name + "' for model '" + model + "'");
}

EvalReport evaluate(const LogBfEvaluator& est, const LogBfEvaluator* exact, const ModelPair& pair, std::size_t n,
                    std::size_t count, std::size_t grid_points, RngStream& rng) {
    EvalReport rep;
    rep.n = n;
    rep.seed = rng.seed();
    auto add = [&](std::string name, double v, std::string model = "all") {
        rep.metrics.push_back({std::move(name), v, std::move(model)});
    };
    const BfSampleSet s = simulate_sample_set(pair, n, count, est, exact, rng);

    std::size_t infinite = 0;
    for (const auto* v : {&s.est_m1, &s.est_m2})
        for (double x : *v) infinite += std::isinf(x) ? 1 : 0;
    add("infinite_estimates", static_cast<double>(infinite));

    add("auc_estimated", auc(s.est_m1, s.est_m2));
    RngStream prior_rng = rng.substream(3);
    add("estimated_prior", estimated_prior(est, pair, n, count, prior_rng));

    if (exact != nullptr) {
        const MseResult mse = mse_log_bf(s);
        add("log_bf_mse", mse.value);
        add("log_bf_mse_excluded", static_cast<double>(mse.excluded));
        const SpearmanResult r1 = spearman(s.true_m1, s.est_m1), r2 = spearman(s.true_m2, s.est_m2);
        add("spearman_rho", r1.value, "m1");
        add("spearman_rho", r2.value, "m2");
        add("spearman_rho", s.prior_m1 * r1.value + s.prior_m2 * r2.value);
        add("spearman_degenerate", (r1.degenerate || r2.degenerate) ? 1.0 : 0.0);
        const double kl1 = kl_between_samples(s.true_m1, s.est_m1, grid_points);
        const double kl2 = kl_between_samples(s.true_m2, s.est_m2, grid_points);
        add("kl_log_bf", kl1, "m1");
        add("kl_log_bf", kl2, "m2");
        add("kl_log_bf", s.prior_m1 * kl1 + s.prior_m2 * kl2);
        add("auc_exact", auc(s.true_m1, s.true_m2));
        RngStream prior_exact_rng = rng.substream(3);
        add("estimated_prior_exact", estimated_prior(*exact, pair, n, count, prior_exact_rng));
        add("surprise_mse", mse_surprise(s));
        add("sign_agreement", sign_agreement(s));
        add("sign_unsigned_truths", static_cast<double>(unsigned_truths(s)));
    }
    rep.samples = s;
    return rep;
}

} // namespace deepbf
