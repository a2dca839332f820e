#include "metaood/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "metaood/error.hpp"
#include "metaood/random.hpp"

namespace metaood {

using diff::Matrix;

namespace {

Matrix random_rotation(std::size_t n, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix q(n, n);
    // Gram-Schmidt on the columns of a Gaussian matrix.
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> v(n);
        for (double& x : v) x = normal(rng);
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += v[r] * q(r, p);
            for (std::size_t r = 0; r < n; ++r) v[r] -= dot * q(r, p);
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < n; ++r) q(r, c) = v[r] / norm;
    }
    return q;
}

std::vector<double> mat_vec(const Matrix& m, std::span<const double> v) {
    std::vector<double> out(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[r] += m(r, c) * v[c];
    return out;
}

std::vector<double> mat_t_vec(const Matrix& m, std::span<const double> v) {
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c) * v[r];
    return out;
}

// Inverse of g(u) = u + a·sin(u); the root lies in [v - a, v + a].
double inverse_sine_warp(double v, double a) {
    double lo = v - a, hi = v + a;
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (mid + a * std::sin(mid) < v) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double gaussian_log_pdf(std::span<const double> z, std::span<const double> mean, const Matrix& cov) {
    const Matrix l = diff::cholesky_factor(cov);
    Matrix d(z.size(), 1);
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = z[i] - mean[i];
    const Matrix y = diff::solve_lower(l, d);
    double quad = 0.0, logdet = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        quad += y[i] * y[i];
        logdet += 2.0 * std::log(l(i, i));
    }
    return -0.5 * (static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

}  // namespace

void SynthSpec::validate() const {
    if (n_tasks < 2) throw Error("synth: need at least 2 tasks");
    if (classes_per_task < 2) throw Error("synth: need at least 2 classes per task");
    if (instances_per_class == 0) throw Error("synth: instances_per_class must be positive");
    if (latent_dim == 0) throw Error("synth: latent_dim must be positive");
    if (!(cov_min > 0.0) || !(cov_max >= cov_min)) {
        throw Error("synth: degenerate covariance spec (need 0 < cov_min <= cov_max)");
    }
    if (noise_dims > 0 && !(noise_half_width > 0.0)) {
        throw Error("synth: noise_half_width must be positive when noise_dims > 0");
    }
    if (warp == Warp::sine && !(warp_strength >= 0.0 && warp_strength < 1.0)) {
        throw Error("synth: warp_strength must lie in [0, 1) for an invertible warp");
    }
    if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction >= 1.0) {
        throw Error("synth: split fractions must leave room for a test split");
    }
}

double SynthTruth::log_density(std::uint32_t class_id, std::span<const double> x) const {
    const ClassTruth& cls = classes.at(class_id);
    const std::size_t d = spec.latent_dim;
    double log_noise = 0.0;
    for (std::size_t i = d; i < x.size(); ++i) {
        if (std::abs(x[i]) > spec.noise_half_width) return -std::numeric_limits<double>::infinity();
        log_noise -= std::log(2.0 * spec.noise_half_width);
    }
    const std::span<const double> informative = x.first(d);
    if (spec.warp == Warp::none) return gaussian_log_pdf(informative, cls.mean, cls.cov) + log_noise;

    const std::vector<double> v = mat_t_vec(rotation_out, informative);
    std::vector<double> u(d);
    double log_jacobian = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        u[i] = inverse_sine_warp(v[i], spec.warp_strength);
        log_jacobian += std::log(1.0 + spec.warp_strength * std::cos(u[i]));
    }
    const std::vector<double> z = mat_t_vec(rotation_in, u);
    return gaussian_log_pdf(z, cls.mean, cls.cov) - log_jacobian + log_noise;
}

std::string SynthTruth::to_json() const {
    nlohmann::json j;
    j["latent_dim"] = spec.latent_dim;
    j["noise_dims"] = spec.noise_dims;
    j["noise_half_width"] = spec.noise_half_width;
    j["warp"] = spec.warp == Warp::sine ? "sine" : "none";
    j["warp_strength"] = spec.warp_strength;
    auto rows = [](const Matrix& m) {
        std::vector<std::vector<double>> out(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row_span(r).begin(), m.row_span(r).end());
        return out;
    };
    j["rotation_in"] = rows(rotation_in);
    j["rotation_out"] = rows(rotation_out);
    nlohmann::json cls = nlohmann::json::array();
    for (const ClassTruth& c : classes) {
        cls.push_back({{"class", c.class_id}, {"task", c.task}, {"mean", c.mean}, {"cov", rows(c.cov)}});
    }
    j["classes"] = cls;
    return j.dump(2);
}

SynthResult synth_tasks(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> eig(spec.cov_min, spec.cov_max);
    std::uniform_real_distribution<double> noise(-spec.noise_half_width, spec.noise_half_width);

    const std::size_t d = spec.latent_dim;
    SynthResult result;
    SynthTruth& truth = result.truth;
    truth.spec = spec;
    if (spec.warp == Warp::sine) {
        truth.rotation_in = random_rotation(d, rng);
        truth.rotation_out = random_rotation(d, rng);
    } else {
        truth.rotation_in = Matrix::identity(d);
        truth.rotation_out = Matrix::identity(d);
    }

    const std::size_t n_classes = spec.n_tasks * spec.classes_per_task;
    const std::size_t n = n_classes * spec.instances_per_class;
    TaskDataset& data = result.data;
    data.features = Matrix(n, spec.input_dim());
    data.class_labels.reserve(n);
    data.task_ids.reserve(n);

    std::size_t row = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        ClassTruth cls;
        cls.class_id = static_cast<std::uint32_t>(c);
        cls.task = static_cast<std::uint32_t>(c / spec.classes_per_task);
        cls.mean.resize(d);
        for (double& m : cls.mean) m = spec.mean_scale * normal(rng);
        const Matrix rot = random_rotation(d, rng);
        Matrix scaled = rot;
        for (std::size_t r = 0; r < d; ++r) {
            const double lambda = eig(rng);
            for (std::size_t k = 0; k < d; ++k) scaled(k, r) *= lambda;
        }
        cls.cov = diff::matmul_nt(scaled, rot);
        cls.cov = (cls.cov + cls.cov.transpose()) * 0.5;
        const Matrix l = diff::cholesky_factor(cls.cov);

        for (std::size_t i = 0; i < spec.instances_per_class; ++i, ++row) {
            std::vector<double> eps(d);
            for (double& e : eps) e = normal(rng);
            std::vector<double> z = mat_vec(l, eps);
            for (std::size_t k = 0; k < d; ++k) z[k] += cls.mean[k];
            std::vector<double> x = z;
            if (spec.warp == Warp::sine) {
                std::vector<double> u = mat_vec(truth.rotation_in, z);
                for (double& v : u) v += spec.warp_strength * std::sin(v);
                x = mat_vec(truth.rotation_out, u);
            }
            for (std::size_t k = 0; k < d; ++k) data.features(row, k) = static_cast<float>(x[k]);
            for (std::size_t k = 0; k < spec.noise_dims; ++k) {
                data.features(row, d + k) = static_cast<float>(noise(rng));
            }
            data.class_labels.push_back(cls.class_id);
            data.task_ids.push_back(cls.task);
        }
        truth.classes.push_back(std::move(cls));
    }

    std::vector<std::uint32_t> order(spec.n_tasks);
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * spec.n_tasks));
    const auto n_val = static_cast<std::size_t>(std::lround(spec.val_fraction * spec.n_tasks));
    for (std::size_t i = 0; i < order.size(); ++i) {
        data.task_split[order[i]] = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::test;
    }
    data.validate();
    return result;
}

double true_ood_score(const SynthTruth& truth, std::span<const std::uint32_t> classes,
                      std::span<const double> x) {
    std::vector<double> terms;
    terms.reserve(classes.size());
    for (std::uint32_t c : classes) terms.push_back(truth.log_density(c, x));
    const double m = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(m)) return std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - m);
    return -(m + std::log(acc / static_cast<double>(classes.size())));
}

}  // namespace metaood
