#include "metaood/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "metaood/error.hpp"

namespace metaood {

namespace dd = metaood::diff;
using dd::Axis;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<std::vector<std::size_t>> rows_by_class(std::span<const std::size_t> labels,
                                                    std::size_t n_classes) {
    std::vector<std::vector<std::size_t>> rows(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_classes) {
            throw DomainError("gmm: label " + std::to_string(labels[i]) + " outside 0.." +
                              std::to_string(n_classes - 1));
        }
        rows[labels[i]].push_back(i);
    }
    for (std::size_t k = 0; k < n_classes; ++k) {
        if (rows[k].empty()) throw DomainError("gmm: class " + std::to_string(k) + " has no support instances");
    }
    return rows;
}

void check_inputs(const Var& support_z, std::span<const std::size_t> labels, std::size_t n_classes,
                  const Var& beta) {
    if (n_classes == 0) throw DomainError("gmm: need at least one class");
    if (support_z.shape().rows != labels.size()) {
        throw DimensionError("gmm: support rows and labels differ in length");
    }
    if (beta.value().size() != 1 || !(beta.item() > 0.0)) throw DomainError("gmm: beta must be a positive scalar");
}

Var symmetrize(const Var& s) { return dd::scale(s + dd::transpose(s), 0.5); }

Var factor_with_retry(Var& cov) {
    try {
        return dd::cholesky(cov);
    } catch (const NotPositiveDefiniteError&) {
        const Matrix& c = cov.value();
        double trace = 0.0;
        for (std::size_t i = 0; i < c.rows(); ++i) trace += c(i, i);
        const double jitter = 1e-8 * std::abs(trace) / static_cast<double>(c.rows());
        cov = dd::add_diagonal(cov, cov.tape()->scalar(jitter));
        return dd::cholesky(cov);
    }
}

// Squared Mahalanobis distance of each query row under the factor `chol`, as 1 x M.
Var mahalanobis_sq(const Var& chol, const Var& mean, const Var& z) {
    const Var diff = z - dd::broadcast_rows(mean, z.shape().rows);
    return dd::sum(dd::square(dd::trisolve(chol, dd::transpose(diff))), Axis::over_rows);
}

// N x M squared Euclidean distances between rows of `a` (N x D) and rows of `z` (M x D).
Var pairwise_sq_dist(const Var& a, const Var& z) {
    const std::size_t n = a.shape().rows, m = z.shape().rows;
    const Var cross = dd::matmul(a, dd::transpose(z));
    const Var zn = dd::broadcast_rows(dd::sum(dd::square(dd::transpose(z)), Axis::over_rows), n);
    const Var an = dd::transpose(dd::broadcast_rows(dd::transpose(dd::sum(dd::square(a), Axis::over_cols)), m));
    return an + zn - dd::scale(cross, 2.0);
}

Var empty_row(const Var& z) { return z.tape()->constant(Matrix(1, 0)); }

std::vector<std::size_t> column_argmax(const Matrix& m) {
    std::vector<std::size_t> out(m.cols(), 0);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        for (std::size_t r = 1; r < m.rows(); ++r) {
            if (m(r, c) > m(out[c], c)) out[c] = r;
        }
    }
    return out;
}

}  // namespace

GmmParams adapt(const Var& support_z, std::span<const std::size_t> labels, std::size_t n_classes,
                const Var& beta, const AdaptOptions& options) {
    check_inputs(support_z, labels, n_classes, beta);
    const auto rows = rows_by_class(labels, n_classes);
    GmmParams params;
    params.dim = support_z.shape().cols;
    const double total = static_cast<double>(labels.size());
    for (const auto& class_rows : rows) {
        const double n = static_cast<double>(class_rows.size());
        GmmComponent comp;
        comp.count = class_rows.size();
        comp.weight = n / total;
        const Var members = dd::gather_rows(support_z, class_rows);
        comp.mean = dd::mean(members, Axis::over_rows);
        const Var centered = members - dd::broadcast_rows(comp.mean, class_rows.size());
        const Var scatter = symmetrize(dd::matmul(dd::transpose(centered), centered));
        comp.cov = options.beta_inside ? dd::scale(dd::add_diagonal(scatter, beta), 1.0 / n)
                                       : dd::add_diagonal(dd::scale(scatter, 1.0 / n), beta);
        comp.chol = factor_with_retry(comp.cov);
        comp.logdet = dd::logdet_from_cholesky(comp.chol);
        params.components.push_back(std::move(comp));
    }
    return params;
}

Var class_log_terms(const GmmParams& params, const Var& z) {
    if (z.shape().cols != params.dim) throw DimensionError("gmm: query dimension mismatch");
    const double d = static_cast<double>(params.dim);
    std::vector<Var> terms;
    for (const GmmComponent& comp : params.components) {
        const Var quad = mahalanobis_sq(comp.chol, comp.mean, z);
        const Var t = dd::scale(quad, -0.5) - dd::scale(comp.logdet, 0.5);
        terms.push_back(dd::add_scalar(t, std::log(comp.weight) - 0.5 * d * kLog2Pi));
    }
    return dd::concat_rows(terms);
}

Var log_density(const GmmParams& params, const Var& z) {
    if (z.shape().rows == 0) return empty_row(z);
    return dd::logsumexp(class_log_terms(params, z), Axis::over_rows);
}

Var ood_score(const GmmParams& params, const Var& z) { return -log_density(params, z); }

Var class_log_terms_woodbury(const Var& support_z, std::span<const std::size_t> labels, std::size_t n_classes,
                             const Var& beta, const Var& z, const AdaptOptions& options) {
    check_inputs(support_z, labels, n_classes, beta);
    if (z.shape().cols != support_z.shape().cols) throw DimensionError("gmm: query dimension mismatch");
    const auto rows = rows_by_class(labels, n_classes);
    const double d = static_cast<double>(support_z.shape().cols);
    const double total = static_cast<double>(labels.size());
    const std::size_t m = z.shape().rows;
    std::vector<Var> terms;
    for (const auto& class_rows : rows) {
        const std::size_t nk = class_rows.size();
        const double n = static_cast<double>(nk);
        const Var shrink = options.beta_inside ? dd::scale(beta, 1.0 / n) : beta;
        const Var members = dd::gather_rows(support_z, class_rows);
        const Var mu = dd::mean(members, Axis::over_rows);
        const Var a = members - dd::broadcast_rows(mu, nk);
        // C = n·b·I + A·Aᵀ (n_k x n_k)
        Var inner = dd::add_diagonal(dd::matmul(a, dd::transpose(a)), dd::scale(shrink, n));
        const Var chol = factor_with_retry(inner);
        // log det Σ = (D - n)·log b + log det C - n·log n
        const Var logdet = dd::add_scalar(dd::scale(dd::log(shrink), d - n) + dd::logdet_from_cholesky(chol),
                                          -n * std::log(n));
        // dᵀΣ⁻¹d = (‖d‖² - ‖L_C⁻¹·A·d‖²) / b
        const Var diff_t = dd::transpose(z - dd::broadcast_rows(mu, m));
        const Var norm_sq = dd::sum(dd::square(diff_t), Axis::over_rows);
        const Var projected = dd::trisolve(chol, dd::matmul(a, diff_t));
        const Var corr = dd::sum(dd::square(projected), Axis::over_rows);
        const Var quad = (norm_sq - corr) * dd::reciprocal(shrink);
        const Var t = dd::scale(quad, -0.5) - dd::scale(logdet, 0.5);
        terms.push_back(dd::add_scalar(t, std::log(n / total) - 0.5 * d * kLog2Pi));
    }
    return dd::concat_rows(terms);
}

Var log_density_woodbury(const Var& support_z, std::span<const std::size_t> labels, std::size_t n_classes,
                         const Var& beta, const Var& z, const AdaptOptions& options) {
    if (z.shape().rows == 0) {
        check_inputs(support_z, labels, n_classes, beta);
        return empty_row(z);
    }
    return dd::logsumexp(class_log_terms_woodbury(support_z, labels, n_classes, beta, z, options), Axis::over_rows);
}

bool prefer_woodbury(std::size_t dim, std::span<const std::size_t> labels, std::size_t n_classes) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t l : labels) {
        if (l < n_classes) ++counts[l];
    }
    return std::all_of(counts.begin(), counts.end(), [dim](std::size_t c) { return dim > c; });
}

Classification classify(const GmmParams& params, const Var& z) { return classify_terms(class_log_terms(params, z)); }

Classification classify_terms(const Var& terms) {
    const Var lse = dd::logsumexp(terms, Axis::over_rows);
    Classification out;
    out.log_posterior = terms - dd::broadcast_rows(lse, terms.shape().rows);
    out.labels = column_argmax(out.log_posterior.value());
    return out;
}

std::string_view to_string(VariantKind kind) {
    switch (kind) {
        case VariantKind::full_gmm: return "full_gmm";
        case VariantKind::shared_cov: return "shared_cov";
        case VariantKind::spherical: return "spherical";
        case VariantKind::single_gaussian: return "single_gaussian";
        case VariantKind::kde: return "kde";
    }
    return "?";
}

VariantKind parse_variant(std::string_view name) {
    for (VariantKind k : {VariantKind::full_gmm, VariantKind::shared_cov, VariantKind::spherical,
                          VariantKind::single_gaussian, VariantKind::kde}) {
        if (to_string(k) == name) return k;
    }
    throw Error("unknown variant '" + std::string(name) + "'");
}

void VariantSpec::validate() const {
    if (!(tau > 0.0)) throw Error("variant: tau must be positive");
    if (!std::isfinite(bandwidth)) throw Error("variant: bandwidth must be finite");
}

double scott_bandwidth(const Matrix& support_z) {
    const std::size_t n = support_z.rows(), d = support_z.cols();
    double mean_sd = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        double mu = 0.0;
        for (std::size_t r = 0; r < n; ++r) mu += support_z(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) var += (support_z(r, c) - mu) * (support_z(r, c) - mu);
        mean_sd += std::sqrt(var / static_cast<double>(n));
    }
    mean_sd /= static_cast<double>(d);
    const double h = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0)) * mean_sd;
    return std::max(h, 1e-6);
}

namespace {

Var shared_cov_distances(const Var& support_z, const std::vector<std::vector<std::size_t>>& rows,
                         const Var& beta, const Var& z, const AdaptOptions& options) {
    const double total = static_cast<double>(support_z.shape().rows);
    std::vector<Var> means;
    Var pooled;
    for (const auto& class_rows : rows) {
        const Var members = dd::gather_rows(support_z, class_rows);
        const Var mu = dd::mean(members, Axis::over_rows);
        const Var centered = members - dd::broadcast_rows(mu, class_rows.size());
        const Var scatter = dd::matmul(dd::transpose(centered), centered);
        pooled = pooled.valid() ? pooled + scatter : scatter;
        means.push_back(mu);
    }
    const Var sym = symmetrize(pooled);
    Var cov = options.beta_inside ? dd::scale(dd::add_diagonal(sym, beta), 1.0 / total)
                                  : dd::add_diagonal(dd::scale(sym, 1.0 / total), beta);
    const Var chol = factor_with_retry(cov);
    std::vector<Var> dist;
    for (const Var& mu : means) dist.push_back(mahalanobis_sq(chol, mu, z));
    return dd::concat_rows(dist);  // K x M
}

Var spherical_terms(const Var& support_z, const std::vector<std::vector<std::size_t>>& rows, double tau,
                    const Var& z) {
    const double d = static_cast<double>(support_z.shape().cols);
    const double k = static_cast<double>(rows.size());
    std::vector<Var> terms;
    for (const auto& class_rows : rows) {
        const Var mu = dd::mean(dd::gather_rows(support_z, class_rows), Axis::over_rows);
        const Var diff_t = dd::transpose(z - dd::broadcast_rows(mu, z.shape().rows));
        const Var sq = dd::sum(dd::square(diff_t), Axis::over_rows);
        terms.push_back(dd::add_scalar(dd::scale(sq, -0.5 / tau), -std::log(k) - 0.5 * d * std::log(2.0 * std::numbers::pi * tau)));
    }
    return dd::concat_rows(terms);  // K x M
}

}  // namespace

Var variant_score(const VariantSpec& spec, const Var& support_z, std::span<const std::size_t> labels,
                  std::size_t n_classes, const Var& beta, const Var& z, const AdaptOptions& options) {
    spec.validate();
    check_inputs(support_z, labels, n_classes, beta);
    if (z.shape().cols != support_z.shape().cols) throw DimensionError("gmm: query dimension mismatch");
    if (z.shape().rows == 0) return empty_row(z);
    switch (spec.kind) {
        case VariantKind::full_gmm:
            return ood_score(adapt(support_z, labels, n_classes, beta, options), z);
        case VariantKind::shared_cov: {
            const Var dist = shared_cov_distances(support_z, rows_by_class(labels, n_classes), beta, z, options);
            return -dd::max(-dist, Axis::over_rows);
        }
        case VariantKind::spherical:
            return -dd::logsumexp(spherical_terms(support_z, rows_by_class(labels, n_classes), spec.tau, z),
                                  Axis::over_rows);
        case VariantKind::single_gaussian: {
            const std::vector<std::size_t> one(labels.size(), 0);
            return ood_score(adapt(support_z, one, 1, beta, options), z);
        }
        case VariantKind::kde: {
            const double h = spec.bandwidth > 0.0 ? spec.bandwidth : scott_bandwidth(support_z.value());
            const double d = static_cast<double>(support_z.shape().cols);
            const double n = static_cast<double>(support_z.shape().rows);
            const Var sq = pairwise_sq_dist(support_z, z);
            const Var terms = dd::scale(sq, -0.5 / (h * h));
            const Var lse = dd::logsumexp(terms, Axis::over_rows);
            return -dd::add_scalar(lse, -std::log(n) - 0.5 * d * std::log(2.0 * std::numbers::pi * h * h));
        }
    }
    throw Error("variant: unhandled kind");
}

std::vector<std::size_t> variant_classify(const VariantSpec& spec, const Var& support_z,
                                          std::span<const std::size_t> labels, std::size_t n_classes,
                                          const Var& beta, const Var& z, const AdaptOptions& options) {
    spec.validate();
    check_inputs(support_z, labels, n_classes, beta);
    if (z.shape().rows == 0) return {};
    switch (spec.kind) {
        case VariantKind::shared_cov: {
            const Var dist = shared_cov_distances(support_z, rows_by_class(labels, n_classes), beta, z, options);
            return column_argmax((-dist).value());
        }
        case VariantKind::spherical:
            return column_argmax(spherical_terms(support_z, rows_by_class(labels, n_classes), spec.tau, z).value());
        case VariantKind::full_gmm:
        case VariantKind::single_gaussian:
        case VariantKind::kde:
            break;
    }
    return classify(adapt(support_z, labels, n_classes, beta, options), z).labels;
}

GmmSnapshot snapshot(const GmmParams& params) {
    GmmSnapshot s;
    for (const GmmComponent& c : params.components) {
        s.weights.push_back(c.weight);
        s.means.push_back(c.mean.value());
        s.covs.push_back(c.cov.value());
    }
    return s;
}

std::string GmmSnapshot::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t k = 0; k < weights.size(); ++k) {
        std::vector<std::vector<double>> cov(covs[k].rows());
        for (std::size_t r = 0; r < covs[k].rows(); ++r) {
            cov[r].assign(covs[k].row_span(r).begin(), covs[k].row_span(r).end());
        }
        j.push_back({{"weight", weights[k]},
                     {"mean", std::vector<double>(means[k].data().begin(), means[k].data().end())},
                     {"cov", cov}});
    }
    return nlohmann::json{{"components", j}}.dump(2);
}

}  // namespace metaood
