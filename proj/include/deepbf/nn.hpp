#pragma once

// Dense / batch-norm / set-pooling classifiers with exact backpropagation and
// Adam. Every network ends in a single logit passed through a sigmoid.
//
// Parameters live in one flat vector (Network::params) so the optimizer and
// the gradient are plain arrays; each layer records its offset into it.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepbf/rng.hpp"

namespace deepbf {

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Batch {
    Matrix x;
    std::vector<double> labels; // 1 or 0 per row
};

enum class ArchKind { fnn, bnn, deepset };

std::string to_string(ArchKind kind);
ArchKind parse_arch_kind(const std::string& name);

struct ArchSpec {
    ArchKind kind = ArchKind::fnn;

    // fnn, and the head of deepset: one input layer of `width`, then `depth`
    // further width x width layers.
    std::size_t width = 64;
    std::size_t depth = 2;

    // bnn: hidden widths first_width, then depth times max(floor(prev * ratio), floor).
    // first_width = 0 picks max(64, 2 * input_dim).
    std::size_t first_width = 0;
    double reduction_ratio = 0.5;
    std::size_t min_width = 16;

    // deepset: per-observation MLP (1 -> inner_widths... -> q), mean pooled.
    std::size_t q = 2;
    std::vector<std::size_t> inner_widths{64, 64, 64};

    bool operator==(const ArchSpec&) const = default;
};

/// Throws InvalidParameter on zero widths, a ratio outside (0, 1], etc.
void validate(const ArchSpec& arch);

/// Hidden widths of a BNN for the given input dimension.
std::vector<std::size_t> bnn_hidden_widths(const ArchSpec& arch, std::size_t input_dim);

enum class LayerKind { dense, batchnorm, relu, mean_pool };

std::string to_string(LayerKind kind);

struct Layer {
    LayerKind kind;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t param_offset = 0;  // dense: w (in x out) then b; batchnorm: gamma then beta
    std::size_t buffer_offset = 0; // batchnorm: running mean then running var
    std::size_t group = 1;         // mean_pool: rows pooled into one

    bool operator==(const Layer&) const = default;
};

enum class Mode { train, eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kLossClamp = 1e-7;

struct Network {
    ArchSpec arch;
    std::size_t input_dim = 0;
    std::vector<Layer> layers;
    std::vector<double> params;
    std::vector<double> buffers;

    std::size_t param_count() const { return params.size(); }
    bool has_batchnorm() const;
};

Network build_network(const ArchSpec& arch, std::size_t input_dim, RngStream& rng);

/// Final-layer logits, one per row. In either mode batch-norm layers
/// normalise with the statistics of `x` itself; running statistics are only
/// touched by backward().
std::vector<double> forward_logits(const Network& net, const Matrix& x, Mode mode = Mode::eval);

/// sigmoid(forward_logits), kept strictly inside (0, 1).
std::vector<double> forward(const Network& net, const Matrix& x, Mode mode = Mode::eval);

double sigmoid(double z);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad; // same layout as Network::params
};

/// Negative mean log-likelihood of the labels (each class averaged
/// separately) and its exact gradient.
double loss(const Network& net, const Batch& batch);

/// loss() plus gradient. When update_running_stats is set, batch-norm running
/// statistics move towards this batch's statistics.
LossGrad backward(Network& net, const Batch& batch, bool update_running_stats = true);

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double decay = 0.99;
    std::uint64_t decay_every = 1000;

    bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t t = 0; // completed steps
    std::vector<double> m;
    std::vector<double> v;
};

AdamState make_adam_state(const Network& net, const AdamConfig& config = {});

/// Learning rate used for the update that follows `completed_steps` steps.
double scheduled_lr(const AdamConfig& config, std::uint64_t completed_steps);

void adam_step(Network& net, std::span<const double> grad, AdamState& state);

} // namespace deepbf
