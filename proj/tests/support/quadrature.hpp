#pragma once

// Numerical-quadrature marginal likelihoods for the conjugate example
// models, computed without the closed forms used by the library.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepbf/models.hpp"

namespace deepbf::testing {

inline double data_sum(const Data& y) { return std::accumulate(y.begin(), y.end(), 0.0); }

// Integrates exp(f(x) - f(x_peak)) over [lo, hi] with adaptive Gauss-Kronrod
// after locating the peak of f on a coarse grid.
template <class F>
inline double log_integral(F f, double lo, double hi) {
    double peak = -INFINITY, arg = lo;
    const int grid = 4000;
    for (int i = 1; i < grid; ++i) {
        const double x = lo + (hi - lo) * i / grid;
        const double v = f(x);
        if (v > peak) {
            peak = v;
            arg = x;
        }
    }
    auto g = [&](double x) { return std::exp(f(x) - peak); };
    using boost::math::quadrature::gauss_kronrod;
    const double step = (hi - lo) / grid;
    const double a = std::max(lo, arg - 3 * step), b = std::min(hi, arg + 3 * step);
    double total = gauss_kronrod<double, 61>::integrate(g, a, b, 15, 1e-13);
    if (a > lo) total += gauss_kronrod<double, 61>::integrate(g, lo, a, 15, 1e-13);
    if (b < hi) total += gauss_kronrod<double, 61>::integrate(g, b, hi, 15, 1e-13);
    return peak + std::log(total);
}

// log of the Beta(a, b) prior integral of the geometric likelihood.
inline double quad_log_nb_marginal(const Data& y, double a, double b) {
    const double n = static_cast<double>(y.size()), s = data_sum(y);
    auto f = [&](double p) {
        return (n + a - 1) * std::log(p) + (s + b - 1) * std::log1p(-p) - std::lgamma(a) - std::lgamma(b) +
               std::lgamma(a + b);
    };
    // tanh-sinh copes with the endpoint behaviour of the Beta density.
    double peak = -INFINITY;
    for (int i = 1; i < 2000; ++i) peak = std::max(peak, f(i / 2000.0));
    boost::math::quadrature::tanh_sinh<double> ts;
    const double v = ts.integrate([&](double p) { return std::exp(f(p) - peak); }, 0.0, 1.0);
    return peak + std::log(v);
}

inline double quad_log_poisson_marginal(const Data& y, double a, double b) {
    const double n = static_cast<double>(y.size()), s = data_sum(y);
    double log_fact = 0;
    for (double v : y) log_fact += std::lgamma(v + 1);
    auto f = [&](double lam) {
        return a * std::log(b) - std::lgamma(a) + (a + s - 1) * std::log(lam) - (b + n) * lam - log_fact;
    };
    const double mode = std::max((a + s - 1) / (b + n), 1e-3);
    const double sd = std::sqrt(a + s) / (b + n);
    return log_integral(f, 0.0, mode + 60 * sd + 20.0 / (b + n));
}

inline double quad_log_exp_gamma_marginal(const Data& y, double shape, double rate) {
    const double n = static_cast<double>(y.size()), s = data_sum(y);
    auto f = [&](double lam) {
        return shape * std::log(rate) - std::lgamma(shape) + (shape + n - 1) * std::log(lam) - (rate + s) * lam;
    };
    const double mode = (shape + n - 1) / (rate + s);
    const double sd = std::sqrt(shape + n) / (rate + s);
    return log_integral(f, 0.0, mode + 60 * sd + 20.0 / (rate + s));
}

inline double bf_scale_error(double a, double b) { return std::abs(std::expm1(a - b)); }

/// Oracle log Bayes factor for data1 (Beta-geometric against Gamma-Poisson).
inline double quadrature_log_bf_data1(const Data& y, double a1, double b1, double a2, double b2) {
    return quad_log_nb_marginal(y, a1, b1) - quad_log_poisson_marginal(y, a2, b2);
}

/// Oracle log Bayes factor for data3 (Gamma-exponential against a fixed rate).
inline double quadrature_log_bf_data3(const Data& y, double shape, double rate, double fixed_rate) {
    const double log_m2 = static_cast<double>(y.size()) * std::log(fixed_rate) - fixed_rate * data_sum(y);
    return quad_log_exp_gamma_marginal(y, shape, rate) - log_m2;
}

} // namespace deepbf::testing
