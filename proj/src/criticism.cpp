#include "deepbf/criticism.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "deepbf/error.hpp"
#include "deepbf/nn.hpp"
#include "deepbf/parallel.hpp"

namespace deepbf {

namespace {

constexpr std::size_t kMaxSteps = 5000;
constexpr double kGradTol = 1e-6;

// log sigmoid(z) and log(1 - sigmoid(z)) without cancellation.
double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

void check_finite(std::span<const double> v, const char* what) {
    if (v.empty()) throw InvalidParameter(std::string(what) + " must be non-empty");
    for (double x : v)
        if (!std::isfinite(x)) throw InvalidParameter(std::string(what) + " contains a non-finite value");
}

// Features 1, u, u^2 (u the pooled standardised input) made orthonormal
// under the objective's per-point weights, which keeps the problem well
// conditioned. Rows of `basis` give each orthonormal feature as a
// combination of (1, u, u^2); all-zero rows are dropped directions.
struct Features {
    double mean = 0.0;
    double sd = 1.0;
    std::array<std::array<double, 3>, 3> basis{};
    std::vector<std::array<double, 3>> real, fake; // orthonormal features per point
};

std::array<double, 3> raw(double u) { return {1.0, u, u * u}; }

Features build_features(std::span<const double> r, std::span<const double> f) {
    Features ft;
    const double nr = static_cast<double>(r.size()), nf = static_cast<double>(f.size());
    double sum = 0.0;
    for (double y : r) sum += y;
    for (double y : f) sum += y;
    ft.mean = sum / (nr + nf);
    double ss = 0.0;
    for (double y : r) ss += (y - ft.mean) * (y - ft.mean);
    for (double y : f) ss += (y - ft.mean) * (y - ft.mean);
    const double sd = std::sqrt(ss / (nr + nf));
    ft.sd = sd > 0.0 ? sd : 1.0;

    // Weighted Gram matrix of the raw features, weights 1/(2 n_class).
    std::array<std::array<double, 3>, 3> g{};
    auto accumulate = [&](std::span<const double> ys, double w) {
        for (double y : ys) {
            const auto x = raw((y - ft.mean) / ft.sd);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) g[i][j] += w * x[i] * x[j];
        }
    };
    accumulate(r, 0.5 / nr);
    accumulate(f, 0.5 / nf);

    // Gram-Schmidt in coefficient space: <p, q> = p' G q.
    auto inner = [&](const std::array<double, 3>& p, const std::array<double, 3>& q) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += p[i] * g[i][j] * q[j];
        return s;
    };
    for (int k = 0; k < 3; ++k) {
        std::array<double, 3> v{};
        v[k] = 1.0;
        const double orig = std::sqrt(std::max(inner(v, v), 0.0));
        for (int j = 0; j < k; ++j) {
            const double proj = inner(v, ft.basis[j]);
            for (int i = 0; i < 3; ++i) v[i] -= proj * ft.basis[j][i];
        }
        const double norm = std::sqrt(std::max(inner(v, v), 0.0));
        if (norm > 1e-10 * std::max(orig, 1.0)) {
            for (double& c : v) c /= norm;
            ft.basis[k] = v;
        } else {
            ft.basis[k] = {0.0, 0.0, 0.0};
        }
    }

    auto project = [&](double y) {
        const auto x = raw((y - ft.mean) / ft.sd);
        std::array<double, 3> o{};
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i) o[k] += ft.basis[k][i] * x[i];
        return o;
    };
    for (double y : r) ft.real.push_back(project(y));
    for (double y : f) ft.fake.push_back(project(y));
    return ft;
}

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double objective(const Features& ft, const std::array<double, 3>& th) {
    double sr = 0.0, sf = 0.0;
    for (const auto& x : ft.real) sr += log_sigmoid(dot(th, x));
    for (const auto& x : ft.fake) sf += log_sigmoid(-dot(th, x));
    return sr / static_cast<double>(ft.real.size()) + sf / static_cast<double>(ft.fake.size());
}

// Gradient and negated Hessian of the objective.
void derivatives(const Features& ft, const std::array<double, 3>& th, std::array<double, 3>& g,
                 std::array<std::array<double, 3>, 3>& h) {
    g = {};
    h = {};
    auto add = [&](const std::vector<std::array<double, 3>>& xs, double sign) {
        const double w = 1.0 / static_cast<double>(xs.size());
        for (const auto& x : xs) {
            const double p = sigmoid(sign * dot(th, x));
            const double curv = w * p * (1.0 - p);
            for (int i = 0; i < 3; ++i) {
                g[i] += sign * w * (1.0 - p) * x[i];
                for (int j = 0; j < 3; ++j) h[i][j] += curv * x[i] * x[j];
            }
        }
    };
    add(ft.real, 1.0);
    add(ft.fake, -1.0);
}

// Solves (h + ridge I) d = g by Gaussian elimination with partial pivoting.
std::array<double, 3> solve(std::array<std::array<double, 3>, 3> h, std::array<double, 3> g) {
    const double ridge = 1e-12 * std::max({h[0][0], h[1][1], h[2][2], 1e-300});
    for (int i = 0; i < 3; ++i) h[i][i] += ridge;
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(h[r][c]) > std::abs(h[piv][c])) piv = r;
        std::swap(h[c], h[piv]);
        std::swap(g[c], g[piv]);
        if (h[c][c] == 0.0) continue;
        for (int r = c + 1; r < 3; ++r) {
            const double f = h[r][c] / h[c][c];
            for (int k = c; k < 3; ++k) h[r][k] -= f * h[c][k];
            g[r] -= f * g[c];
        }
    }
    std::array<double, 3> d{};
    for (int c = 2; c >= 0; --c) {
        if (h[c][c] == 0.0) continue;
        double v = g[c];
        for (int k = c + 1; k < 3; ++k) v -= h[c][k] * d[k];
        d[c] = v / h[c][c];
    }
    return d;
}

} // namespace

double QuadLogit::operator()(double y) const { return sigmoid(logit(y)); }

double quad_logit_objective(const QuadLogit& d, std::span<const double> real_obs, std::span<const double> fake) {
    double sr = 0.0, sf = 0.0;
    for (double y : real_obs) sr += log_sigmoid(d.logit(y));
    for (double y : fake) sf += log_sigmoid(-d.logit(y));
    return sr / static_cast<double>(real_obs.size()) + sf / static_cast<double>(fake.size());
}

QuadLogit fit_quadratic_logit(std::span<const double> real_obs, std::span<const double> fake, QuadFitInfo* info) {
    check_finite(real_obs, "observed data");
    check_finite(fake, "fake data");
    const Features ft = build_features(real_obs, fake);

    std::array<double, 3> th{};
    double f = objective(ft, th);
    std::array<double, 3> g;
    std::array<std::array<double, 3>, 3> h;
    derivatives(ft, th, g, h);
    double gn = std::sqrt(dot(g, g));
    std::size_t it = 0;
    for (; it < kMaxSteps && gn >= kGradTol; ++it) {
        std::array<double, 3> d = solve(h, g);
        double slope = dot(g, d);
        if (!(slope > 0.0)) {
            d = g;
            slope = gn * gn;
        }
        bool moved = false;
        for (double step = 1.0; step > 1e-12; step *= 0.5) {
            std::array<double, 3> cand;
            for (int i = 0; i < 3; ++i) cand[i] = th[i] + step * d[i];
            const double fc = objective(ft, cand);
            // Armijo condition.
            if (fc >= f + 1e-4 * step * slope) {
                th = cand;
                f = fc;
                moved = true;
                break;
            }
        }
        if (!moved) break;
        derivatives(ft, th, g, h);
        gn = std::sqrt(dot(g, g));
    }

    // Back to (1, u, u^2), then to (1, y, y^2) with u = (y - mean) / sd.
    std::array<double, 3> alpha{};
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i) alpha[i] += th[k] * ft.basis[k][i];
    const double m = ft.mean, s = ft.sd;
    QuadLogit d;
    d.a = alpha[0] - alpha[1] * m / s + alpha[2] * m * m / (s * s);
    d.b = alpha[1] / s - 2.0 * alpha[2] * m / (s * s);
    d.c = alpha[2] / (s * s);
    if (info != nullptr) *info = {it, gn, f};
    return d;
}

double z_statistic(const QuadLogit& d, std::span<const double> fake) {
    if (fake.empty()) throw InvalidParameter("fake data must be non-empty");
    double sum = 0.0;
    for (double y : fake) sum += d(y);
    return sum / static_cast<double>(fake.size());
}

double nearest_rank_quantile(std::span<const double> values, double p) {
    if (values.empty()) throw InvalidParameter("quantile of an empty sample");
    if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("quantile level must lie in (0, 1]");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(s.size())));
    return s[std::clamp<std::size_t>(rank, 1, s.size()) - 1];
}

ZReport criticize(const ModelSpec& model, std::span<const double> y_obs, std::size_t replicates, RngStream& rng) {
    if (!model.posterior_predictive)
        throw Unsupported("model '" + model.id + "' has no conjugate posterior predictive sampler");
    if (replicates < 100) throw InvalidParameter("criticism needs at least 100 replicates");
    check_finite(y_obs, "observed data");
    const std::size_t n = y_obs.size();
    ZReport rep;
    rep.z.assign(replicates, 0.0);
    parallel_for(replicates, [&](std::size_t r) {
        RngStream s = rng.substream(r);
        const Data fit_fake = posterior_predictive_sample(model, y_obs, n, s);
        const QuadLogit d = fit_quadratic_logit(y_obs, fit_fake);
        const Data eval_fake = posterior_predictive_sample(model, y_obs, n, s);
        rep.z[r] = z_statistic(d, eval_fake);
    });
    rep.lo = nearest_rank_quantile(rep.z, 0.025);
    rep.hi = nearest_rank_quantile(rep.z, 0.975);
    rep.contains_half = rep.lo <= 0.5 && 0.5 <= rep.hi;
    return rep;
}

} // namespace deepbf
