#include <benchmark/benchmark.h>

#include <random>

#include "metaood/gmm.hpp"
#include "metaood/objective.hpp"
#include "metaood/synth.hpp"

using namespace metaood;
using diff::Matrix;
using diff::Tape;
using diff::Var;

namespace {

constexpr std::size_t kWay = 5;
constexpr std::size_t kShot = 5;
constexpr std::size_t kQueries = 50;

Matrix gaussian(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Matrix m(r, c);
    for (double& v : m.data()) v = normal(rng);
    return m;
}

std::vector<std::size_t> shot_labels() {
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < kWay; ++k) labels.insert(labels.end(), kShot, k);
    return labels;
}

// forward + backward of the mixture log density, D = range(0)
template <bool Woodbury>
void BM_LogDensity(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    const Matrix support = gaussian(kWay * kShot, d, rng);
    const Matrix queries = gaussian(kQueries, d, rng);
    const auto labels = shot_labels();
    for (auto _ : state) {
        Tape tape;
        const Var s = tape.leaf(support, true);
        const Var q = tape.leaf(queries, true);
        const Var beta = tape.scalar(0.1, true);
        Var out;
        if constexpr (Woodbury) {
            out = log_density_woodbury(s, labels, kWay, beta, q);
        } else {
            out = log_density(adapt(s, labels, kWay, beta), q);
        }
        tape.backward(diff::sum(out));
        benchmark::DoNotOptimize(beta.grad());
    }
}
BENCHMARK(BM_LogDensity<false>)->Name("log_density/direct")->Arg(8)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_LogDensity<true>)->Name("log_density/woodbury")->Arg(8)->Arg(32)->Arg(64)->Arg(128);

// one meta-training step: sample, embed, adapt, smooth AUC, backward
void BM_EpisodeStep(benchmark::State& state) {
    SynthSpec spec;
    spec.n_tasks = 20;
    spec.classes_per_task = 6;
    spec.instances_per_class = 30;
    spec.latent_dim = 4;
    spec.noise_dims = 28;
    spec.noise_half_width = 4.0;
    const SynthResult synth = synth_tasks(spec, 2);
    const EpisodeSampler sampler(synth.data, Split::train, EpisodeSpec{});
    const CommonParams params = init_params(EncoderConfig{spec.input_dim(), {64}, static_cast<std::size_t>(state.range(0)), 0.0}, 3);
    Rng rng(4);
    for (auto _ : state) {
        const Episode episode = sampler.sample(rng);
        Tape tape;
        const BoundParams bound = bind(tape, params, true);
        const Var loss = meta_objective(ObjectiveKind::auc, bound, episode, ForwardOptions{});
        tape.backward(loss);
        benchmark::DoNotOptimize(bound.flat_grad());
    }
}
BENCHMARK(BM_EpisodeStep)->Name("episode_step")->Arg(8)->Arg(32);

void BM_ExactAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = normal(rng) + 1.0;
        b[i] = normal(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(exact_auc(a, b));
}
BENCHMARK(BM_ExactAuc)->Name("exact_auc")->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
