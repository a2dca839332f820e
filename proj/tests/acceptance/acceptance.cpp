// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when any
// gating criterion fails; the Omniglot stretch run reports but never gates.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "metaood/checkpoint.hpp"
#include "metaood/error.hpp"
#include "metaood/synth.hpp"
#include "metaood/trainer.hpp"
#include "support/op_catalog.hpp"
#include "support/optimality.hpp"
#include "support/oracles.hpp"
#include "support/pipeline.hpp"

using namespace metaood;
namespace oracle = metaood::oracle;
namespace dd = metaood::diff;
using diff::Tape;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<std::size_t> balanced_labels(std::size_t k, std::size_t per) {
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), per, c);
    return labels;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    constexpr double tol = 1e-4;
    double worst_op = 0.0, worst_pipeline = 0.0;
    std::string worst_name;
    std::mt19937_64 rng(2024);
    for (int seed = 0; seed < 20; ++seed) {
        for (const auto& op : oracle::op_cases(rng)) {
            const double e = oracle::gradient_relative_error(op.fn, op.inputs);
            if (e > worst_op) {
                worst_op = e;
                worst_name = op.name;
            }
        }
    }
    SynthSpec spec;
    spec.n_tasks = 6;
    spec.instances_per_class = 12;
    spec.latent_dim = 3;
    spec.noise_dims = 2;
    spec.noise_half_width = 3.0;
    spec.warp = Warp::sine;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TaskDataset data = synth_tasks(spec, seed).data;
        const EncoderConfig enc{data.input_dim(), {6}, 4, 0.1};
        const CommonParams params = init_params(enc, seed);
        Rng rng(seed);
        const Episode ep = EpisodeSampler(data, Split::train, {3, 3, 2, 4, OodMode::pooled}).sample(rng);
        worst_pipeline = std::max(worst_pipeline, oracle::pipeline_gradient_error(params, ep, ObjectiveKind::auc, {}));
    }
    return {worst_op < tol && worst_pipeline < tol,
            fmt("max rel err %.2e over ops (worst %s), %.2e over embed-standardize-adapt-score-smooth_auc; 20 seeds",
                worst_op, worst_name.c_str(), worst_pipeline)};
}

Outcome closed_form_optimality() {
    std::mt19937_64 rng(7);
    std::size_t failures = 0, comparisons = 0;
    double closest = INFINITY;
    const double scales[] = {1e-3, 1e-2, 1e-1};
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + rng() % 4, k = 2 + rng() % 3;
        std::vector<std::size_t> labels;
        for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), 2 + rng() % 6, c);
        const Matrix support = oracle::random_matrix(labels.size(), d, rng, 1.0 + trial % 3);
        const double beta = 0.05 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
        Tape t;
        const GmmSnapshot snap = snapshot(adapt(t.constant(support), labels, k, t.scalar(beta)));
        oracle::DenseGmm g;
        g.weights = snap.weights;
        for (std::size_t c = 0; c < k; ++c) {
            g.means.push_back(oracle::to_eigen(snap.means[c]).transpose());
            g.covs.push_back(oracle::to_eigen(snap.covs[c]));
        }
        const Eigen::MatrixXd x = oracle::to_eigen(support);
        const double best = oracle::penalized_support_loglik(g, x, labels, beta);
        for (int j = 0; j < 1000; ++j) {
            const double other =
                oracle::penalized_support_loglik(oracle::perturb(g, beta, scales[j % 3], rng), x, labels, beta);
            ++comparisons;
            closest = std::min(closest, best - other);
            if (other > best + 1e-9) ++failures;
        }
    }
    return {failures == 0, fmt("%zu failures in %zu comparisons (100 supports, D 2..5, K 2..4); smallest margin %.2e",
                               failures, comparisons, closest)};
}

Outcome woodbury_equivalence() {
    std::mt19937_64 rng(31);
    double worst_value = 0.0, worst_grad = 0.0;
    std::size_t cases = 0;
    for (std::size_t d = 2; d <= 64; ++d) {
        for (std::size_t per = 1; per <= 10; ++per) {
            const std::size_t k = 1 + rng() % 3;
            const auto labels = balanced_labels(k, per);
            const std::vector<Matrix> inputs{oracle::random_matrix(k * per, d, rng),
                                             oracle::random_matrix(3, d, rng, 1.5),
                                             Matrix::scalar(std::log(0.05 + 0.5 * (rng() % 100) / 100.0))};
            auto direct = [&](Tape&, const std::vector<Var>& in) {
                return dd::sum(ood_score(adapt(in[0], labels, k, dd::exp(in[2])), in[1]));
            };
            auto woodbury = [&](Tape&, const std::vector<Var>& in) {
                return dd::sum(-log_density_woodbury(in[0], labels, k, dd::exp(in[2]), in[1]));
            };
            // per-query values
            Tape t;
            const Var s = t.constant(inputs[0]), z = t.constant(inputs[1]), b = dd::exp(t.constant(inputs[2]));
            const Matrix a = ood_score(adapt(s, labels, k, b), z).value();
            const Matrix w = (-log_density_woodbury(s, labels, k, b, z)).value();
            worst_value = std::max(worst_value, dd::max_abs_diff(a, w));
            const auto ga = oracle::analytic_gradients(direct, inputs);
            const auto gw = oracle::analytic_gradients(woodbury, inputs);
            for (std::size_t i = 0; i < ga.size(); ++i) worst_grad = std::max(worst_grad, dd::max_abs_diff(ga[i], gw[i]));
            ++cases;
        }
    }
    return {worst_value < 1e-8 && worst_grad < 1e-6,
            fmt("max |score diff| %.2e, max |grad diff| %.2e over %zu cases (D 2..64, N_k 1..10)", worst_value,
                worst_grad, cases)};
}

Outcome auc_oracle() {
    std::mt19937_64 rng(99);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t no = 1 + rng() % 20, ni = 1 + rng() % 20;
        std::uniform_int_distribution<int> pick(0, 1 + static_cast<int>(rng() % 8));
        std::vector<double> ood(no), id(ni);
        for (double& v : ood) v = pick(rng) * 0.25;
        for (double& v : id) v = pick(rng) * 0.25;
        if (exact_auc(ood, id) != oracle::pairwise_auc(ood, id)) ++mismatches;
        if (exact_auc(ood, id, TieMode::strict) != oracle::pairwise_auc(ood, id, true)) ++mismatches;
    }
    double worst_smooth = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        // distinct grid points 0.1 apart, dealt randomly to the two sets
        const std::size_t no = 1 + rng() % 10, ni = 1 + rng() % 10;
        std::vector<double> grid(no + ni);
        std::iota(grid.begin(), grid.end(), 0.0);
        std::shuffle(grid.begin(), grid.end(), rng);
        std::vector<double> ood, id;
        for (std::size_t i = 0; i < grid.size(); ++i) (i < no ? ood : id).push_back(0.1 * grid[i]);
        Matrix so = Matrix::row(ood), si = Matrix::row(id);
        so *= 100.0;
        si *= 100.0;
        Tape t;
        const double smooth = smooth_auc(t.constant(so), t.constant(si)).item();
        worst_smooth = std::max(worst_smooth, std::abs(smooth - exact_auc(ood, id)));
    }
    return {mismatches == 0 && worst_smooth < 0.01,
            fmt("%zu mismatches vs pairwise on 10^4 tied instances (both tie modes); smooth at scale 100 off by <= %.2e",
                mismatches, worst_smooth)};
}

// ---------------------------------------------------------------------------

SynthSpec e2e_spec() {
    SynthSpec s;
    s.n_tasks = 40;
    s.classes_per_task = 3;
    s.instances_per_class = 30;
    s.latent_dim = 4;
    s.noise_dims = 24;
    s.noise_half_width = 12.0;
    s.mean_scale = 3.0;
    s.cov_min = 0.05;
    s.cov_max = 0.2;
    s.warp = Warp::sine;
    s.warp_strength = 0.8;
    return s;
}

const EpisodeSpec kEvalSpec{3, 5, 5, 5, OodMode::single_category};

TrainConfig e2e_config(std::uint64_t seed) {
    TrainConfig c;
    c.episode_spec = {3, 5, 5, 15, OodMode::pooled};
    c.val_episode_spec = kEvalSpec;
    c.learning_rate = 1e-2;
    c.max_epochs = 20;
    c.episodes_per_epoch = 100;  // 2,000 episodes
    c.val_episodes = 64;
    c.patience = 20;
    c.seed = seed;
    return c;
}

double oracle_auc(const SynthTruth& truth, std::span<const Episode> episodes) {
    double total = 0.0;
    for (const Episode& e : episodes) {
        std::vector<double> o, i;
        for (std::size_t m = 0; m < e.query_ood.rows(); ++m) o.push_back(true_ood_score(truth, e.classes, e.query_ood.row_span(m)));
        for (std::size_t m = 0; m < e.query_id.rows(); ++m) i.push_back(true_ood_score(truth, e.classes, e.query_id.row_span(m)));
        total += exact_auc(o, i);
    }
    return total / static_cast<double>(episodes.size());
}

Outcome end_to_end_synthetic() {
    bool pass = true;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto start = std::chrono::steady_clock::now();
        const SynthResult synth = synth_tasks(e2e_spec(), seed);
        const auto test = fixed_eval_episodes(synth.data, Split::test, kEvalSpec, 64, seed + 100);
        const EncoderConfig enc{synth.data.input_dim(), {64}, 8, 0.1};
        const double untrained = evaluate(init_params(enc, seed), test, {}).mean_auc;
        const TrainResult r = train(synth.data, enc, e2e_config(seed));
        const double trained = evaluate(r.best, test, {}).mean_auc;
        const double truth = oracle_auc(synth.truth, test);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        // each run must fit the 5 minute single-core budget on its own
        const bool ok = std::abs(untrained - 0.5) <= 0.07 && trained >= 0.95 && truth >= 0.98 && secs <= 300.0;
        pass = pass && ok;
        detail += fmt("%sseed %llu: untrained %.3f, trained %.3f, oracle %.3f, %.1fs", detail.empty() ? "" : "; ",
                      static_cast<unsigned long long>(seed), untrained, trained, truth, secs);
    }
    return {pass, detail + " (2000 episodes, 64 test episodes each)"};
}

// A single 64-episode run is noisy at 5 shots, so the gap is averaged over ten
// independent generator draws and the worst draw is reported alongside.
Outcome identity_encoder() {
    double total_gap = 0.0, worst_gap = 0.0, total_gmm = 0.0, total_truth = 0.0;
    std::size_t over = 0;
    constexpr int draws = 10;
    for (int seed = 1; seed <= draws; ++seed) {
        SynthSpec spec;
        spec.n_tasks = 20;
        spec.classes_per_task = 3;
        spec.instances_per_class = 30;
        spec.latent_dim = 2;
        const SynthResult synth = synth_tasks(spec, seed);
        EncoderConfig enc{2, {}, 2, 0.0};
        CommonParams p = init_params(enc, 1);
        p.weights[0] = Matrix::identity(2);
        const auto test = fixed_eval_episodes(synth.data, Split::test, kEvalSpec, 64, seed + 10);
        const double gmm = evaluate(p, test, {}).mean_auc;
        const double truth = oracle_auc(synth.truth, test);
        const double gap = std::abs(gmm - truth);
        total_gap += gap;
        total_gmm += gmm;
        total_truth += truth;
        worst_gap = std::max(worst_gap, gap);
        if (gap > 0.05) ++over;
    }
    const double mean_gap = total_gap / draws;
    return {mean_gap <= 0.05,
            fmt("mean gap %.3f (GMM %.3f vs true-density oracle %.3f) over %d draws of 64 episodes; worst draw %.3f, "
                "%zu of %d draws above 0.05",
                mean_gap, total_gmm / draws, total_truth / draws, draws, worst_gap, over, draws)};
}

Outcome determinism() {
    const SynthResult synth = synth_tasks(e2e_spec(), 9);
    const EncoderConfig enc{synth.data.input_dim(), {32}, 4, 0.1};
    TrainConfig c = e2e_config(9);
    c.max_epochs = 4;
    const auto test = fixed_eval_episodes(synth.data, Split::test, kEvalSpec, 64, 9);
    auto run = [&] {
        const TrainResult r = train(synth.data, enc, c);
        std::ostringstream ckpt;
        write_checkpoint(ckpt, r.best);
        return std::pair{ckpt.str() + r.log.to_csv(false), evaluate(r.best, test, {}).to_csv()};
    };
    const auto a = run(), b = run();
    const bool same = a.first == b.first && a.second == b.second;
    return {same, fmt("checkpoint+log %zu bytes, eval CSV %zu bytes: %s", a.first.size(), a.second.size(),
                      same ? "bit-identical across two runs" : "runs differ")};
}

// ---------------------------------------------------------------------------

// Reassigns whole tasks to train/val/test 60/20/20 under `seed`.
TaskDataset resplit(TaskDataset data, std::uint64_t seed) {
    std::vector<std::uint32_t> tasks;
    for (const auto& [task, split] : data.task_split) tasks.push_back(task);
    Rng rng(seed);
    std::shuffle(tasks.begin(), tasks.end(), rng);
    const std::size_t n_train = tasks.size() * 6 / 10, n_val = tasks.size() * 2 / 10;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        data.task_split[tasks[i]] = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::test;
    }
    return data;
}

std::size_t env_size(const char* name, std::size_t fallback) {
    const char* v = std::getenv(name);
    return v ? static_cast<std::size_t>(std::stoull(v)) : fallback;
}

Outcome stretch_omniglot() {
    const char* path = std::getenv("METAOOD_OMNIGLOT_EPDS");
    if (!path) {
        return {false, "not run: no Omniglot EPDS available offline (set METAOOD_OMNIGLOT_EPDS to a 14x14 conversion)"};
    }
    const TaskDataset full = read_epds(path);
    const std::size_t splits = env_size("METAOOD_STRETCH_SPLITS", 5);
    const std::size_t epochs = env_size("METAOOD_STRETCH_EPOCHS", 200);
    const EpisodeSpec eval_spec{5, 5, 5, 5, OodMode::single_category};
    std::vector<double> ours, ours_c, spherical;
    for (std::uint64_t s = 0; s < splits; ++s) {
        const TaskDataset data = resplit(full, 1000 + s);
        const EncoderConfig enc{data.input_dim(), {256, 256}, 32, 0.1};
        TrainConfig c;
        c.episode_spec = {5, 5, 5, 25, OodMode::pooled};
        c.val_episode_spec = eval_spec;
        c.max_epochs = epochs;
        c.patience = 20;
        c.seed = s;
        const auto test = fixed_eval_episodes(data, Split::test, eval_spec, 64, 500 + s);
        auto fit = [&](ObjectiveKind objective, VariantKind kind) {
            TrainConfig cc = c;
            cc.objective = objective;
            cc.variant.kind = kind;
            return evaluate(train(data, enc, cc).best, test, cc.variant).mean_auc;
        };
        ours.push_back(fit(ObjectiveKind::auc, VariantKind::full_gmm));
        ours_c.push_back(fit(ObjectiveKind::cross_entropy, VariantKind::full_gmm));
        spherical.push_back(fit(ObjectiveKind::auc, VariantKind::spherical));
    }
    const auto [m, se] = mean_and_stderr(ours);
    const double mc = mean_and_stderr(ours_c).first, ms = mean_and_stderr(spherical).first;
    return {m >= 0.95 && m > mc && m > ms,
            fmt("AUC %.3f +- %.3f over %zu splits (target >= 0.95); cross-entropy %.3f; spherical %.3f", m, se,
                splits, mc, ms)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;  // <= 0: no limit
        bool gating;
    };
    const std::vector<Criterion> criteria{
        {"gradient_correctness", gradient_correctness, 30.0, true},
        {"closed_form_optimality", closed_form_optimality, 60.0, true},
        {"woodbury_equivalence", woodbury_equivalence, 0.0, true},
        {"auc_oracle", auc_oracle, 0.0, true},
        {"end_to_end_synthetic", end_to_end_synthetic, 0.0, true},
        {"identity_encoder", identity_encoder, 0.0, true},
        {"stretch_omniglot", stretch_omniglot, 7200.0, false},
        {"determinism", determinism, 0.0, true},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0 && secs > c.budget_seconds) {
            o.pass = false;
            o.detail += fmt(" [over %.0fs budget]", c.budget_seconds);
        }
        std::printf("%s %s: %s (%.2fs)%s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    c.gating ? "" : " [stretch, not gating]");
        std::fflush(stdout);
        if (!o.pass && c.gating) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
