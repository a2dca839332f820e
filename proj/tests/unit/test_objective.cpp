#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "metaood/error.hpp"
#include "metaood/objective.hpp"
#include "metaood/synth.hpp"
#include "support/oracles.hpp"
#include "support/pipeline.hpp"

using namespace metaood;
namespace dd = metaood::diff;
namespace oracle = metaood::oracle;
using diff::Tape;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double smooth(const std::vector<double>& ood, const std::vector<double>& id) {
    Tape t;
    return smooth_auc(t.constant(Matrix::row(ood)), t.constant(Matrix::row(id))).item();
}

struct Fixture {
    TaskDataset data;
    EncoderConfig encoder;
    CommonParams params;
    std::vector<Episode> episodes;
};

Fixture fixture(std::uint64_t seed, std::size_t n_way = 3) {
    SynthSpec spec;
    spec.n_tasks = 6;
    spec.classes_per_task = 3;
    spec.instances_per_class = 12;
    spec.latent_dim = 3;
    spec.warp = Warp::sine;
    Fixture f;
    f.data = synth_tasks(spec, seed).data;
    f.encoder = {f.data.input_dim(), {6}, 4, 0.1};
    f.params = init_params(f.encoder, seed);
    const EpisodeSampler sampler(f.data, Split::train, {n_way, 3, 2, 4, OodMode::pooled});
    Rng rng(seed);
    for (int i = 0; i < 4; ++i) f.episodes.push_back(sampler.sample(rng));
    return f;
}

}  // namespace

TEST_SUITE("objective") {

TEST_CASE("exact AUC examples") {
    CHECK(exact_auc(std::vector<double>{3, 4}, std::vector<double>{1, 2}) == 1.0);
    CHECK(exact_auc(std::vector<double>{2, 2}, std::vector<double>{2, 2, 2}) == 0.5);
    CHECK(exact_auc(std::vector<double>{2}, std::vector<double>{1, 3}) == 0.5);
    CHECK(exact_auc(std::vector<double>{2, 2}, std::vector<double>{2, 2, 2}, TieMode::strict) == 0.0);
    CHECK_THROWS_AS(exact_auc(std::vector<double>{}, std::vector<double>{1}), DomainError);
    CHECK_THROWS_AS(exact_auc(std::vector<double>{1}, std::vector<double>{}), DomainError);
}

TEST_CASE("exact AUC equals the pairwise oracle on random instances with ties") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t no = 1 + rng() % 12, ni = 1 + rng() % 12;
        const int levels = 1 + static_cast<int>(rng() % 6);  // few levels force ties
        std::uniform_int_distribution<int> pick(0, levels);
        std::vector<double> ood(no), id(ni);
        for (double& v : ood) v = pick(rng) * 0.5;
        for (double& v : id) v = pick(rng) * 0.5;
        REQUIRE(exact_auc(ood, id) == doctest::Approx(oracle::pairwise_auc(ood, id)).epsilon(1e-14));
        REQUIRE(exact_auc(ood, id, TieMode::strict) ==
                doctest::Approx(oracle::pairwise_auc(ood, id, true)).epsilon(1e-14));
        // swapping the sets complements the AUC
        REQUIRE(exact_auc(ood, id) + exact_auc(id, ood) == doctest::Approx(1.0).epsilon(1e-14));
        // strictly increasing transform keeps the ranking
        std::vector<double> to = ood, ti = id;
        for (double& v : to) v = std::exp(3 * v) - 7;
        for (double& v : ti) v = std::exp(3 * v) - 7;
        REQUIRE(exact_auc(to, ti) == exact_auc(ood, id));
    }
}

TEST_CASE("smooth AUC examples") {
    CHECK(smooth({2}, {1, 3}) == doctest::Approx((sigmoid(1) + sigmoid(-1)) / 2).epsilon(1e-15));
    CHECK(smooth({2}, {1, 3}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(smooth({4, 4}, {4, 4, 4}) == 0.5);
    CHECK(std::abs(smooth({12, 15}, {1, 2}) - 1.0) < 1e-4);
    const double a = smooth({0.3, -1.2, 2.5}, {0.1, 0.0});
    CHECK(smooth({100.3, 98.8, 102.5}, {100.1, 100.0}) == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("smooth AUC converges to exact AUC as the scale grows") {
    // every pair's sigmoid moves toward its indicator, so the mean absolute
    // per-pair deviation shrinks monotonically in the scale
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> ood(6), id(7);
        for (double& v : ood) v = normal(rng) + 0.5;
        for (double& v : id) v = normal(rng);
        double previous = INFINITY;
        for (double alpha : {1.0, 10.0, 100.0}) {
            double dev = 0.0;
            for (double o : ood)
                for (double i : id) dev += std::abs(sigmoid(alpha * (o - i)) - (o > i ? 1.0 : 0.0));
            dev /= 42.0;
            CHECK(dev < previous);
            previous = dev;
            std::vector<double> so = ood, si = id;
            for (double& v : so) v *= alpha;
            for (double& v : si) v *= alpha;
            CHECK(std::abs(smooth(so, si) - exact_auc(ood, id)) <= dev + 1e-12);
        }
    }
}

TEST_CASE("smooth AUC gradient matches finite differences") {
    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        auto f = [](Tape&, const std::vector<Var>& in) { return smooth_auc(in[0], in[1]); };
        CHECK(oracle::gradient_relative_error(f, {oracle::random_matrix(1, 5, rng), oracle::random_matrix(1, 4, rng)}) <
              1e-6);
    }
}

TEST_CASE("AUC loss lies in (-1, 0)") {
    Fixture f = fixture(1);
    for (const Episode& ep : f.episodes) {
        const double loss = oracle::episode_loss(f.params, ep, ObjectiveKind::auc, {});
        CHECK(loss > -1.0);
        CHECK(loss < 0.0);
    }
}

TEST_CASE("cross entropy with one class is exactly zero") {
    Fixture f = fixture(2, 1);
    CHECK(oracle::episode_loss(f.params, f.episodes[0], ObjectiveKind::cross_entropy, {}) == 0.0);
}

TEST_CASE("cross entropy never reads the OoD queries") {
    Fixture f = fixture(3);
    Episode ep = f.episodes[0];
    for (double& v : ep.query_ood.data()) v = std::numeric_limits<double>::quiet_NaN();
    double loss = 0.0;
    CHECK_NOTHROW(loss = oracle::episode_loss(f.params, ep, ObjectiveKind::cross_entropy, {}));
    CHECK(loss == oracle::episode_loss(f.params, f.episodes[0], ObjectiveKind::cross_entropy, {}));
    CHECK_THROWS_AS(oracle::episode_loss(f.params, ep, ObjectiveKind::auc, {}), NonFiniteError);
}

TEST_CASE("log beta receives a gradient") {
    Fixture f = fixture(4);
    for (ObjectiveKind kind : {ObjectiveKind::auc, ObjectiveKind::cross_entropy}) {
        const auto g = oracle::episode_loss_gradient(f.params, f.episodes[1], kind, {});
        CHECK(std::abs(g.back()) > 1e-8);
    }
}

TEST_CASE("full pipeline gradient matches finite differences") {
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
        Fixture f = fixture(seed);
        for (ObjectiveKind kind : {ObjectiveKind::auc, ObjectiveKind::cross_entropy}) {
            CHECK(oracle::pipeline_gradient_error(f.params, f.episodes[0], kind, {}) < 1e-4);
        }
        ForwardOptions woodbury_sized;
        woodbury_sized.adapt.beta_inside = true;
        CHECK(oracle::pipeline_gradient_error(f.params, f.episodes[1], ObjectiveKind::auc, woodbury_sized) < 1e-4);
    }
}

TEST_CASE("dropout changes the loss only when a generator is passed") {
    Fixture f = fixture(5);
    const double plain = oracle::episode_loss(f.params, f.episodes[0], ObjectiveKind::auc, {});
    CHECK(plain == oracle::episode_loss(f.params, f.episodes[0], ObjectiveKind::auc, {}));
    Rng rng(1);
    ForwardOptions opt;
    opt.dropout_rng = &rng;
    CHECK(oracle::episode_loss(f.params, f.episodes[0], ObjectiveKind::auc, opt) != plain);
}

TEST_CASE("objective names") {
    CHECK(parse_objective("cross_entropy") == ObjectiveKind::cross_entropy);
    CHECK(to_string(ObjectiveKind::auc) == "auc");
    CHECK_THROWS_AS(parse_objective("hinge"), Error);
}

}  // TEST_SUITE
