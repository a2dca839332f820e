#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metaood/diff/ops.hpp"

namespace metaood {

using diff::Matrix;
using diff::Var;

struct AdaptOptions {
    // false: Σ_k = scatter/|S_k| + βI.  true: Σ_k = (scatter + βI)/|S_k|.
    bool beta_inside = false;
};

/// One adapted mixture component. All members live on the tape of the support
/// embeddings and are differentiable w.r.t. them and β.
struct GmmComponent {
    std::size_t count = 0;
    double weight = 0.0;  // |S_k| / N_S
    Var mean;             // 1 x D
    Var cov;              // D x D
    Var chol;             // lower Cholesky factor of cov
    Var logdet;           // 1 x 1
};

struct GmmParams {
    std::size_t dim = 0;
    std::vector<GmmComponent> components;
};

/// Closed-form maximum-likelihood fit of a labeled support set: class means,
/// population-form scatter shrunk by β, and weights |S_k|/N_S.
///
/// Throws DomainError for a class without support rows. A Cholesky failure is
/// retried once with jitter 1e-8·trace/D before the NotPositiveDefiniteError
/// escapes.
GmmParams adapt(const Var& support_z, std::span<const std::size_t> labels, std::size_t n_classes,
                const Var& beta, const AdaptOptions& options = {});

/// K x M matrix of log γ_k + log N(z_m | μ_k, Σ_k).
Var class_log_terms(const GmmParams& params, const Var& z);

/// log Σ_k γ_k N(z | μ_k, Σ_k) per query row, as a 1 x M row.
Var log_density(const GmmParams& params, const Var& z);

/// Negative log density (higher = more anomalous).
Var ood_score(const GmmParams& params, const Var& z);

/// Same values as adapt + log_density, computed through the Woodbury identity and
/// the matrix determinant lemma: only N_k x N_k systems are factorized.
Var log_density_woodbury(const Var& support_z, std::span<const std::size_t> labels,
                         std::size_t n_classes, const Var& beta, const Var& z,
                         const AdaptOptions& options = {});

/// K x M per-class terms of the Woodbury path, matching class_log_terms.
Var class_log_terms_woodbury(const Var& support_z, std::span<const std::size_t> labels, std::size_t n_classes,
                             const Var& beta, const Var& z, const AdaptOptions& options = {});

/// True when every class has fewer support rows than latent dimensions.
bool prefer_woodbury(std::size_t dim, std::span<const std::size_t> labels, std::size_t n_classes);

struct Classification {
    Var log_posterior;                // K x M
    std::vector<std::size_t> labels;  // argmax per query, lowest index wins ties
};

Classification classify(const GmmParams& params, const Var& z);

/// Posterior and argmax from precomputed K x M class terms.
Classification classify_terms(const Var& terms);

enum class VariantKind { full_gmm, shared_cov, spherical, single_gaussian, kde };

std::string_view to_string(VariantKind kind);
VariantKind parse_variant(std::string_view name);

struct VariantSpec {
    VariantKind kind = VariantKind::full_gmm;
    double tau = 1.0;        // spherical covariance τI
    double bandwidth = 0.0;  // kde kernel width; <= 0 selects Scott's rule

    void validate() const;
};

/// OoD score (1 x M) under the chosen density model.
///   full_gmm        -log p(z) under the adapted mixture
///   shared_cov      min_k squared Mahalanobis distance under one pooled covariance
///   spherical       -log Σ_k (1/K) N(z | μ_k, τI)
///   single_gaussian -log N(z | mean, cov + βI), labels ignored
///   kde             -log mean_i N(z | z_i, h²I), labels ignored
Var variant_score(const VariantSpec& spec, const Var& support_z, std::span<const std::size_t> labels,
                  std::size_t n_classes, const Var& beta, const Var& z,
                  const AdaptOptions& options = {});

/// Predicted labels under the variant's class model; label-free variants fall back
/// to the full mixture.
std::vector<std::size_t> variant_classify(const VariantSpec& spec, const Var& support_z,
                                          std::span<const std::size_t> labels, std::size_t n_classes,
                                          const Var& beta, const Var& z,
                                          const AdaptOptions& options = {});

/// Scott's rule bandwidth N^(-1/(D+4)) times the mean per-dimension standard
/// deviation of the support.
double scott_bandwidth(const Matrix& support_z);

/// Plain-value copy of adapted parameters, for export.
struct GmmSnapshot {
    std::vector<double> weights;
    std::vector<Matrix> means;
    std::vector<Matrix> covs;

    std::string to_json() const;
};

GmmSnapshot snapshot(const GmmParams& params);

}  // namespace metaood
