#include "metaood/encoder.hpp"

#include <cmath>
#include <string>

#include "metaood/error.hpp"

namespace metaood {

namespace dd = metaood::diff;
using diff::Shape;

void EncoderConfig::validate() const {
    if (input_dim == 0) throw Error("encoder: input_dim must be positive");
    if (latent_dim == 0) throw Error("encoder: latent_dim must be positive");
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw Error("encoder: hidden layer widths must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw Error("encoder: dropout_rate must lie in [0, 1)");
    }
}

std::size_t EncoderConfig::fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

std::size_t EncoderConfig::fan_out(std::size_t layer) const {
    return layer == hidden_dims.size() ? latent_dim : hidden_dims[layer];
}

double CommonParams::beta() const { return std::exp(log_beta); }

std::size_t CommonParams::parameter_count() const {
    std::size_t n = 1;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> CommonParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].data().begin(), weights[l].data().end());
        flat.insert(flat.end(), biases[l].data().begin(), biases[l].data().end());
    }
    flat.push_back(log_beta);
    return flat;
}

void CommonParams::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw DimensionError("params: flat vector has " + std::to_string(flat.size()) +
                             " entries, expected " + std::to_string(parameter_count()));
    }
    std::size_t at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (double& v : weights[l].data()) v = flat[at++];
        for (double& v : biases[l].data()) v = flat[at++];
    }
    log_beta = flat[at];
}

CommonParams init_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    CommonParams p;
    p.config = config;
    for (std::size_t l = 0; l < config.layer_count(); ++l) {
        const std::size_t in = config.fan_in(l);
        const std::size_t out = config.fan_out(l);
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-a, a);
        Matrix w(in, out);
        for (double& v : w.data()) v = dist(rng);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(1, out);
    }
    p.log_beta = std::log(kInitialBeta);
    return p;
}

std::vector<double> BoundParams::flat_grad() const {
    std::vector<double> g;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        g.insert(g.end(), weights[l].grad().data().begin(), weights[l].grad().data().end());
        g.insert(g.end(), biases[l].grad().data().begin(), biases[l].grad().data().end());
    }
    g.push_back(log_beta.grad()[0]);
    return g;
}

BoundParams bind(Tape& tape, const CommonParams& params, bool requires_grad) {
    BoundParams b;
    b.config = &params.config;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        b.weights.push_back(tape.leaf(params.weights[l], requires_grad));
        b.biases.push_back(tape.leaf(params.biases[l], requires_grad));
    }
    b.log_beta = tape.scalar(params.log_beta, requires_grad);
    return b;
}

Var embed(const BoundParams& params, const Var& x, Rng* dropout_rng) {
    const EncoderConfig& config = *params.config;
    if (x.shape().cols != config.input_dim) {
        throw DimensionError("embed: input has " + std::to_string(x.shape().cols) +
                             " features, encoder expects " + std::to_string(config.input_dim));
    }
    const std::size_t batch = x.shape().rows;
    Tape& tape = *x.tape();
    Var h = x;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        h = dd::matmul(h, params.weights[l]) + dd::broadcast_rows(params.biases[l], batch);
        if (l + 1 == params.weights.size()) break;
        h = dd::relu(h);
        if (dropout_rng != nullptr && config.dropout_rate > 0.0) {
            const double keep = 1.0 - config.dropout_rate;
            std::bernoulli_distribution coin(keep);
            Matrix mask(h.shape().rows, h.shape().cols);
            for (double& m : mask.data()) m = coin(*dropout_rng) ? 1.0 / keep : 0.0;
            h = h * tape.constant(std::move(mask));
        }
    }
    return h;
}

Standardized standardize(const Var& support_z, const Var& query_z, double floor) {
    const Shape s = support_z.shape();
    if (s.rows < 2) throw DimensionError("standardize: need at least two support rows");
    if (query_z.shape().cols != s.cols) throw DimensionError("standardize: dimension mismatch");
    const Var mu = dd::mean(support_z, dd::Axis::over_rows);
    const Var centered = support_z - dd::broadcast_rows(mu, s.rows);
    const Var var = dd::mean(dd::square(centered), dd::Axis::over_rows);
    // clamp on the variance keeps sqrt away from its singular derivative at 0
    const Var sd = dd::clamp_min(dd::sqrt(dd::clamp_min(var, floor * floor)), floor);
    const Var inv = dd::reciprocal(sd);
    Standardized out;
    out.scale = sd;
    out.support = support_z * dd::broadcast_rows(inv, s.rows);
    out.query = query_z * dd::broadcast_rows(inv, query_z.shape().rows);
    return out;
}

}  // namespace metaood
