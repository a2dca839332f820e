#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metaood/dataset.hpp"

namespace metaood {

enum class Warp { none, sine };

/// Generator for task families with known class-conditional densities.
///
/// Each class draws a latent point z ~ N(mean_k, cov_k) in `latent_dim`
/// dimensions. The shared warp maps z to R1·g(R0·z) with R0, R1 random rotations and
/// g(u) = u + warp_strength·sin(u) elementwise (a monotone bijection for strength < 1).
/// `noise_dims` extra features are uniform on [-noise_half_width, noise_half_width]
/// independent of the class; their density is constant so they never change the
/// ranking of true densities.
struct SynthSpec {
    std::size_t n_tasks = 10;
    std::size_t classes_per_task = 3;
    std::size_t instances_per_class = 50;
    std::size_t latent_dim = 2;
    std::size_t noise_dims = 0;
    double noise_half_width = 0.0;
    double mean_scale = 3.0;  // class means ~ N(0, mean_scale² I)
    double cov_min = 0.5;     // eigenvalue range of the class covariances
    double cov_max = 1.5;
    Warp warp = Warp::none;
    double warp_strength = 0.8;
    double train_fraction = 0.6;
    double val_fraction = 0.2;

    /// Throws metaood::Error for a degenerate covariance, empty counts or a
    /// non-invertible warp.
    void validate() const;
    std::size_t input_dim() const noexcept { return latent_dim + noise_dims; }
};

struct ClassTruth {
    std::uint32_t class_id;
    std::uint32_t task;
    std::vector<double> mean;  // latent_dim
    diff::Matrix cov;          // latent_dim x latent_dim
};

struct SynthTruth {
    SynthSpec spec;
    diff::Matrix rotation_in;   // R0
    diff::Matrix rotation_out;  // R1
    std::vector<ClassTruth> classes;  // indexed by global class id

    /// log p(x | class) in the input space, including the warp Jacobian and the
    /// uniform noise block. -inf outside the noise box.
    double log_density(std::uint32_t class_id, std::span<const double> x) const;

    std::string to_json() const;
};

struct SynthResult {
    TaskDataset data;
    SynthTruth truth;
};

SynthResult synth_tasks(const SynthSpec& spec, std::uint64_t seed);

/// Oracle OoD score: negative log of the equal-weight mixture of the true densities of
/// `classes` at x.
double true_ood_score(const SynthTruth& truth, std::span<const std::uint32_t> classes,
                      std::span<const double> x);

}  // namespace metaood
