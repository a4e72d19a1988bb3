#pragma once

// Central finite-difference gradient check shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "deepbf/nn.hpp"
#include "deepbf/rng.hpp"

namespace deepbf::testing {

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0; // coordinates whose step straddles a ReLU kink
};

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

/// Compares backward() against (L(p + h) - L(p - h)) / 2h per parameter. A
/// coordinate is skipped when the h and h/2 differences disagree, which only
/// happens when the perturbation crosses a non-differentiable point.
inline GradCheck check_gradients(const Network& net, const Batch& batch, double h = 1e-5) {
    Network work = net;
    const std::vector<double> analytic = backward(work, batch, false).grad;
    GradCheck out;
    auto central = [&](std::size_t k, double step) {
        const double p = work.params[k];
        work.params[k] = p + step;
        const double up = loss(work, batch);
        work.params[k] = p - step;
        const double down = loss(work, batch);
        work.params[k] = p;
        return (up - down) / (2 * step);
    };
    for (std::size_t k = 0; k < work.params.size(); ++k) {
        const double fd = central(k, h);
        const double fd_half = central(k, h / 2);
        if (rel_error(fd, fd_half) > 1e-3) {
            ++out.skipped;
            continue;
        }
        out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic[k], fd));
        ++out.checked;
    }
    return out;
}

/// Small networks of each kind, sized for exhaustive gradient checks.
inline ArchSpec small_arch(ArchKind kind) {
    ArchSpec a;
    a.kind = kind;
    switch (kind) {
    case ArchKind::fnn:
        a.width = 16;
        a.depth = 1;
        break;
    case ArchKind::bnn:
        a.first_width = 16;
        a.depth = 1;
        a.min_width = 4;
        break;
    case ArchKind::deepset:
        a.inner_widths = {8, 8};
        a.q = 2;
        a.width = 8;
        a.depth = 1;
        break;
    }
    return a;
}

/// Random network with perturbed batch-norm affine parameters so that every
/// parameter has a non-trivial gradient.
inline Network random_network(ArchKind kind, std::size_t input_dim, RngStream& rng) {
    Network net = build_network(small_arch(kind), input_dim, rng);
    for (const Layer& l : net.layers) {
        if (l.kind == LayerKind::dense) {
            double* b = net.params.data() + l.param_offset + l.in * l.out;
            for (std::size_t o = 0; o < l.out; ++o) b[o] = rng.normal(0.0, 0.1);
        } else if (l.kind == LayerKind::batchnorm) {
            double* g = net.params.data() + l.param_offset;
            for (std::size_t c = 0; c < 2 * l.in; ++c) g[c] += rng.normal(0.0, 0.2);
        }
    }
    return net;
}

inline Batch random_batch(std::size_t rows, std::size_t dim, RngStream& rng) {
    Batch b;
    b.x = Matrix(rows, dim);
    for (double& v : b.x.data) v = rng.normal(0.0, 1.0);
    b.labels.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) b.labels[r] = r % 2 == 0 ? 1.0 : 0.0;
    return b;
}

} // namespace deepbf::testing
