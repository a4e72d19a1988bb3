#include "deepbf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deepbf/error.hpp"
#include "deepbf/kernels.hpp"

namespace deepbf {

std::string to_string(ArchKind kind) {
    switch (kind) {
    case ArchKind::fnn: return "fnn";
    case ArchKind::bnn: return "bnn";
    case ArchKind::deepset: return "deepset";
    }
    return "?";
}

ArchKind parse_arch_kind(const std::string& name) {
    if (name == "fnn") return ArchKind::fnn;
    if (name == "bnn") return ArchKind::bnn;
    if (name == "deepset") return ArchKind::deepset;
    throw InvalidParameter("unknown architecture '" + name + "' (expected fnn, bnn or deepset)");
}

std::string to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::mean_pool: return "mean_pool";
    }
    return "?";
}

void validate(const ArchSpec& arch) {
    switch (arch.kind) {
    case ArchKind::fnn:
        if (arch.width == 0) throw InvalidParameter("fnn width must be positive");
        break;
    case ArchKind::bnn:
        if (!(arch.reduction_ratio > 0.0 && arch.reduction_ratio <= 1.0))
            throw InvalidParameter("bnn reduction_ratio must lie in (0, 1]");
        if (arch.min_width == 0) throw InvalidParameter("bnn min_width must be positive");
        break;
    case ArchKind::deepset:
        if (arch.width == 0) throw InvalidParameter("deepset head width must be positive");
        if (arch.q == 0) throw InvalidParameter("deepset q must be positive");
        for (std::size_t w : arch.inner_widths)
            if (w == 0) throw InvalidParameter("deepset inner widths must be positive");
        break;
    }
}

std::vector<std::size_t> bnn_hidden_widths(const ArchSpec& arch, std::size_t input_dim) {
    std::size_t w = arch.first_width != 0 ? arch.first_width : std::max<std::size_t>(64, 2 * input_dim);
    std::vector<std::size_t> widths{w};
    for (std::size_t d = 0; d < arch.depth; ++d) {
        w = std::max(static_cast<std::size_t>(std::floor(static_cast<double>(w) * arch.reduction_ratio)), arch.min_width);
        widths.push_back(w);
    }
    return widths;
}

bool Network::has_batchnorm() const {
    return std::any_of(layers.begin(), layers.end(), [](const Layer& l) { return l.kind == LayerKind::batchnorm; });
}

namespace {

class Builder {
public:
    Builder(Network& net, RngStream& rng) : net_(net), rng_(rng) {}

    void dense(std::size_t in, std::size_t out) {
        Layer l{LayerKind::dense, in, out, net_.params.size(), 0, 1};
        const double bound = std::sqrt(6.0 / static_cast<double>(in));
        for (std::size_t k = 0; k < in * out; ++k) net_.params.push_back((2.0 * rng_.uniform01() - 1.0) * bound);
        net_.params.resize(net_.params.size() + out, 0.0);
        net_.layers.push_back(l);
    }

    void batchnorm(std::size_t dim) {
        Layer l{LayerKind::batchnorm, dim, dim, net_.params.size(), net_.buffers.size(), 1};
        net_.params.resize(net_.params.size() + dim, 1.0);
        net_.params.resize(net_.params.size() + dim, 0.0);
        net_.buffers.resize(net_.buffers.size() + dim, 0.0);
        net_.buffers.resize(net_.buffers.size() + dim, 1.0);
        net_.layers.push_back(l);
    }

    void relu(std::size_t dim) { net_.layers.push_back({LayerKind::relu, dim, dim, 0, 0, 1}); }

    void mean_pool(std::size_t dim, std::size_t group) {
        net_.layers.push_back({LayerKind::mean_pool, dim, dim, 0, 0, group});
    }

    void fnn_head(std::size_t in, std::size_t width, std::size_t depth) {
        dense(in, width);
        relu(width);
        for (std::size_t d = 0; d < depth; ++d) {
            dense(width, width);
            relu(width);
        }
        dense(width, 1);
    }

private:
    Network& net_;
    RngStream& rng_;
};

struct Tape {
    std::vector<Matrix> acts; // acts[i] is the input of layer i; acts.back() the logits
    std::vector<Matrix> xhat; // batch-norm normalised inputs, per layer
    std::vector<std::vector<double>> inv_std;
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> var;
};

// Buffers keep their capacity between calls, so a training loop does not
// allocate per layer and step.
void reshape(Matrix& m, std::size_t rows, std::size_t cols) {
    m.rows = rows;
    m.cols = cols;
    m.data.resize(rows * cols);
}

// DeepSet rows are sorted so the per-observation features, and hence the
// pooled mean, are computed in one canonical order.
void prepare_input(const Network& net, const Matrix& x, Matrix& out) {
    if (x.cols != net.input_dim)
        throw ShapeMismatch("input has " + std::to_string(x.cols) + " columns, network expects " +
                            std::to_string(net.input_dim));
    if (x.rows == 0) throw ShapeMismatch("empty input batch");
    if (net.arch.kind != ArchKind::deepset) {
        reshape(out, x.rows, x.cols);
        std::copy(x.data.begin(), x.data.end(), out.data.begin());
        return;
    }
    reshape(out, x.rows * x.cols, 1);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double* dst = out.row(r * x.cols);
        std::copy(x.row(r), x.row(r) + x.cols, dst);
        std::sort(dst, dst + x.cols);
    }
}

void batchnorm_forward(const Layer& l, const double* gamma, const double* beta, const Matrix& x, Matrix& y,
                       Tape& tape, std::size_t idx) {
    const std::size_t rows = x.rows, dim = l.in;
    std::vector<double>& mean = tape.mean[idx];
    std::vector<double>& var = tape.var[idx];
    std::vector<double>& inv = tape.inv_std[idx];
    mean.assign(dim, 0.0);
    var.assign(dim, 0.0);
    inv.resize(dim);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += x(r, c);
    for (std::size_t c = 0; c < dim; ++c) mean[c] /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = x(r, c) - mean[c];
            var[c] += d * d;
        }
    for (std::size_t c = 0; c < dim; ++c) {
        var[c] /= static_cast<double>(rows);
        inv[c] = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);
    }
    Matrix& xhat = tape.xhat[idx];
    reshape(xhat, rows, dim);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
            const double h = (x(r, c) - mean[c]) * inv[c];
            xhat(r, c) = h;
            y(r, c) = gamma[c] * h + beta[c];
        }
}

// Fills tape.acts; the logits end up in tape.acts.back().
void run(const Network& net, const Matrix& input, Mode mode, Tape& tape) {
    const std::size_t n = net.layers.size();
    tape.acts.resize(n + 1);
    tape.xhat.resize(n);
    tape.inv_std.resize(n);
    tape.mean.resize(n);
    tape.var.resize(n);
    prepare_input(net, input, tape.acts[0]);
    if (mode == Mode::train && net.has_batchnorm() && tape.acts[0].rows < 2)
        throw ShapeMismatch("batch-norm in train mode needs at least two rows");
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < n; ++i) {
        const Layer& l = net.layers[i];
        const Matrix& x = tape.acts[i];
        Matrix& y = tape.acts[i + 1];
        switch (l.kind) {
        case LayerKind::dense: {
            reshape(y, x.rows, l.out);
            const double* w = net.params.data() + l.param_offset;
            k.dense_forward(x.data.data(), x.rows, l.in, w, w + l.in * l.out, l.out, y.data.data());
            break;
        }
        case LayerKind::batchnorm: {
            reshape(y, x.rows, l.out);
            const double* gamma = net.params.data() + l.param_offset;
            batchnorm_forward(l, gamma, gamma + l.in, x, y, tape, i);
            break;
        }
        case LayerKind::relu:
            reshape(y, x.rows, l.out);
            for (std::size_t e = 0; e < x.data.size(); ++e) y.data[e] = x.data[e] > 0.0 ? x.data[e] : 0.0;
            break;
        case LayerKind::mean_pool: {
            const std::size_t g = l.group, out_rows = x.rows / g;
            reshape(y, out_rows, l.out);
            std::fill(y.data.begin(), y.data.end(), 0.0);
            for (std::size_t b = 0; b < out_rows; ++b) {
                double* yr = y.row(b);
                for (std::size_t j = 0; j < g; ++j) {
                    const double* xr = x.row(b * g + j);
                    for (std::size_t c = 0; c < l.in; ++c) yr[c] += xr[c];
                }
                for (std::size_t c = 0; c < l.in; ++c) yr[c] /= static_cast<double>(g);
            }
            break;
        }
        }
    }
}

Tape& scratch_tape() {
    thread_local Tape tape;
    return tape;
}

struct ClassCounts {
    double n1 = 0.0;
    double n0 = 0.0;
};

ClassCounts count_labels(const Batch& batch) {
    if (batch.labels.size() != batch.x.rows)
        throw ShapeMismatch("batch has " + std::to_string(batch.x.rows) + " rows but " +
                            std::to_string(batch.labels.size()) + " labels");
    ClassCounts c;
    for (double lab : batch.labels) {
        if (lab == 1.0) c.n1 += 1.0;
        else if (lab == 0.0) c.n0 += 1.0;
        else throw InvalidParameter("labels must be 0 or 1");
    }
    return c;
}

double loss_from_logits(const std::vector<double>& z, const std::vector<double>& labels, ClassCounts c) {
    double s1 = 0.0, s0 = 0.0;
    for (std::size_t r = 0; r < z.size(); ++r) {
        const double d = std::clamp(sigmoid(z[r]), kLossClamp, 1.0 - kLossClamp);
        if (labels[r] == 1.0) s1 += std::log(d);
        else s0 += std::log(1.0 - d);
    }
    double total = 0.0;
    if (c.n1 > 0.0) total += s1 / c.n1;
    if (c.n0 > 0.0) total += s0 / c.n0;
    return -total;
}

} // namespace

Network build_network(const ArchSpec& arch, std::size_t input_dim, RngStream& rng) {
    if (input_dim == 0) throw InvalidParameter("input_dim must be positive");
    validate(arch);
    Network net;
    net.arch = arch;
    net.input_dim = input_dim;
    Builder b(net, rng);
    switch (arch.kind) {
    case ArchKind::fnn:
        b.fnn_head(input_dim, arch.width, arch.depth);
        break;
    case ArchKind::bnn: {
        std::size_t prev = input_dim;
        for (std::size_t w : bnn_hidden_widths(arch, input_dim)) {
            b.dense(prev, w);
            b.batchnorm(w);
            b.relu(w);
            prev = w;
        }
        b.dense(prev, 1);
        break;
    }
    case ArchKind::deepset: {
        std::size_t prev = 1;
        for (std::size_t w : arch.inner_widths) {
            b.dense(prev, w);
            b.relu(w);
            prev = w;
        }
        b.dense(prev, arch.q);
        b.mean_pool(arch.q, input_dim);
        b.fnn_head(arch.q, arch.width, arch.depth);
        break;
    }
    }
    return net;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> forward_logits(const Network& net, const Matrix& x, Mode mode) {
    Tape& tape = scratch_tape();
    run(net, x, mode, tape);
    return tape.acts.back().data;
}

std::vector<double> forward(const Network& net, const Matrix& x, Mode mode) {
    std::vector<double> out = forward_logits(net, x, mode);
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = std::nextafter(1.0, 0.0);
    for (double& v : out) v = std::clamp(sigmoid(v), lo, hi);
    return out;
}

double loss(const Network& net, const Batch& batch) {
    const ClassCounts c = count_labels(batch);
    return loss_from_logits(forward_logits(net, batch.x, Mode::train), batch.labels, c);
}

LossGrad backward(Network& net, const Batch& batch, bool update_running_stats) {
    const ClassCounts c = count_labels(batch);
    Tape& tape = scratch_tape();
    run(net, batch.x, Mode::train, tape);
    const std::vector<double>& z = tape.acts.back().data;

    LossGrad out;
    out.loss = loss_from_logits(z, batch.labels, c);
    out.grad.assign(net.params.size(), 0.0);

    thread_local Matrix dy, dx;
    reshape(dy, z.size(), 1);
    for (std::size_t r = 0; r < z.size(); ++r) {
        if (batch.labels[r] == 1.0) dy.data[r] = -sigmoid(-z[r]) / c.n1;
        else dy.data[r] = sigmoid(z[r]) / c.n0;
    }

    const auto& k = kernels::active();
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const Layer& l = net.layers[i];
        const Matrix& x = tape.acts[i];
        switch (l.kind) {
        case LayerKind::dense: {
            const double* w = net.params.data() + l.param_offset;
            double* dw = out.grad.data() + l.param_offset;
            if (i > 0) reshape(dx, x.rows, l.in);
            k.dense_backward(x.data.data(), dy.data.data(), x.rows, l.in, l.out, w, i > 0 ? dx.data.data() : nullptr,
                             dw, dw + l.in * l.out);
            break;
        }
        case LayerKind::batchnorm: {
            const std::size_t rows = x.rows, dim = l.in;
            const double* gamma = net.params.data() + l.param_offset;
            double* dgamma = out.grad.data() + l.param_offset;
            double* dbeta = dgamma + dim;
            const Matrix& xhat = tape.xhat[i];
            const std::vector<double>& inv = tape.inv_std[i];
            std::vector<double> sum_dh(dim, 0.0), sum_dh_h(dim, 0.0);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t col = 0; col < dim; ++col) {
                    const double g = dy(r, col);
                    dbeta[col] += g;
                    dgamma[col] += g * xhat(r, col);
                    const double dh = g * gamma[col];
                    sum_dh[col] += dh;
                    sum_dh_h[col] += dh * xhat(r, col);
                }
            reshape(dx, rows, dim);
            const double nr = static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t col = 0; col < dim; ++col) {
                    const double dh = dy(r, col) * gamma[col];
                    dx(r, col) = inv[col] / nr * (nr * dh - sum_dh[col] - xhat(r, col) * sum_dh_h[col]);
                }
            if (update_running_stats) {
                double* rm = net.buffers.data() + l.buffer_offset;
                double* rv = rm + dim;
                for (std::size_t col = 0; col < dim; ++col) {
                    rm[col] = (1.0 - kBatchNormMomentum) * rm[col] + kBatchNormMomentum * tape.mean[i][col];
                    rv[col] = (1.0 - kBatchNormMomentum) * rv[col] + kBatchNormMomentum * tape.var[i][col];
                }
            }
            break;
        }
        case LayerKind::relu: {
            // In place: dy becomes this layer's input gradient.
            const Matrix& y = tape.acts[i + 1];
            for (std::size_t e = 0; e < dy.data.size(); ++e)
                if (!(y.data[e] > 0.0)) dy.data[e] = 0.0;
            continue;
        }
        case LayerKind::mean_pool: {
            const double g = static_cast<double>(l.group);
            reshape(dx, x.rows, l.in);
            for (std::size_t r = 0; r < x.rows; ++r) {
                const double* dyr = dy.row(r / l.group);
                for (std::size_t col = 0; col < l.in; ++col) dx(r, col) = dyr[col] / g;
            }
            break;
        }
        }
        std::swap(dy, dx);
    }
    return out;
}

AdamState make_adam_state(const Network& net, const AdamConfig& config) {
    if (!(config.lr > 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.epsilon > 0.0) ||
        !(config.decay > 0.0 && config.decay <= 1.0) || config.decay_every == 0)
        throw InvalidParameter("invalid Adam configuration");
    AdamState s;
    s.config = config;
    s.m.assign(net.params.size(), 0.0);
    s.v.assign(net.params.size(), 0.0);
    return s;
}

double scheduled_lr(const AdamConfig& config, std::uint64_t completed_steps) {
    return config.lr * std::pow(config.decay, static_cast<double>(completed_steps / config.decay_every));
}

void adam_step(Network& net, std::span<const double> grad, AdamState& state) {
    const std::size_t n = net.params.size();
    if (grad.size() != n || state.m.size() != n || state.v.size() != n)
        throw ShapeMismatch("gradient or optimizer state does not match the network");
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.t + 1);
    const kernels::AdamCoefficients coef{scheduled_lr(c, state.t), c.beta1, c.beta2, 1.0 - std::pow(c.beta1, t),
                                         1.0 - std::pow(c.beta2, t), c.epsilon};
    kernels::active().adam_update(n, net.params.data(), grad.data(), state.m.data(), state.v.data(), coef);
    ++state.t;
}

} // namespace deepbf
