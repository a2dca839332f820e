#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metaood/diff/ops.hpp"
#include "metaood/random.hpp"

namespace metaood {

using diff::Matrix;
using diff::Tape;
using diff::Var;

struct EncoderConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t latent_dim = 0;
    double dropout_rate = 0.1;

    /// Throws metaood::Error on a zero dimension or a rate outside [0, 1).
    void validate() const;
    std::size_t layer_count() const { return hidden_dims.size() + 1; }
    std::size_t fan_in(std::size_t layer) const;
    std::size_t fan_out(std::size_t layer) const;

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Meta-learned parameters shared across tasks: the encoder weights and the
/// log of the covariance shrinkage β.
struct CommonParams {
    EncoderConfig config;
    std::vector<Matrix> weights;  // layer l: fan_in x fan_out
    std::vector<Matrix> biases;   // layer l: 1 x fan_out
    double log_beta = 0.0;

    double beta() const;
    std::size_t parameter_count() const;  // including log_beta

    /// Layer-major flat view: W₀, b₀, W₁, b₁, ..., log_beta.
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);

    friend bool operator==(const CommonParams&, const CommonParams&) = default;
};

inline constexpr double kInitialBeta = 0.1;

/// Glorot-uniform weights, zero biases, β = 0.1. Deterministic in `seed`.
CommonParams init_params(const EncoderConfig& config, std::uint64_t seed);

/// CommonParams placed on a tape.
struct BoundParams {
    const EncoderConfig* config = nullptr;
    std::vector<Var> weights;
    std::vector<Var> biases;
    Var log_beta;

    Var beta() const { return diff::exp(log_beta); }
    /// Gradients of all bound leaves in CommonParams::flatten order.
    std::vector<double> flat_grad() const;
};

BoundParams bind(Tape& tape, const CommonParams& params, bool requires_grad);

/// Forward pass Linear → ReLU → Dropout → ... → Linear. Dropout (inverted scaling)
/// is applied only when `dropout_rng` is non-null.
Var embed(const BoundParams& params, const Var& x, Rng* dropout_rng = nullptr);

struct Standardized {
    Var support;
    Var query;
    Var scale;  // 1 x D, clamped standard deviation of the support
};

inline constexpr double kStandardizeFloor = 1e-6;

/// Divides support and query embeddings by the per-dimension population standard
/// deviation of the support, floored at `floor`. Requires at least two support rows.
Standardized standardize(const Var& support_z, const Var& query_z, double floor = kStandardizeFloor);

}  // namespace metaood
