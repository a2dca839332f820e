#include "doctest.h"

#include <cmath>
#include <numbers>

#include "metaood/error.hpp"
#include "metaood/synth.hpp"

using namespace metaood;

TEST_SUITE("synth") {

TEST_CASE("row counts") {
    SynthSpec spec;
    spec.n_tasks = 2;
    spec.classes_per_task = 3;
    spec.instances_per_class = 50;
    spec.latent_dim = 2;
    spec.train_fraction = 0.5;
    spec.val_fraction = 0.0;
    const SynthResult r = synth_tasks(spec, 1);
    CHECK(r.data.size() == 300);
    CHECK(r.data.input_dim() == 2);
    CHECK(r.truth.classes.size() == 6);
}

TEST_CASE("class sample means are within 3σ/√n of the true mean") {
    SynthSpec spec;
    spec.n_tasks = 4;
    spec.classes_per_task = 2;
    spec.instances_per_class = 400;
    spec.latent_dim = 3;
    spec.cov_min = spec.cov_max = 1.0;  // unit covariance
    const SynthResult r = synth_tasks(spec, 8);
    const double bound = 3.0 / std::sqrt(400.0);
    for (const ClassTruth& c : r.truth.classes) {
        std::vector<double> mean(3, 0.0);
        std::size_t n = 0;
        for (std::size_t i = 0; i < r.data.size(); ++i) {
            if (r.data.class_labels[i] != c.class_id) continue;
            for (std::size_t d = 0; d < 3; ++d) mean[d] += r.data.features(i, d);
            ++n;
        }
        for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(mean[d] / n - c.mean[d]) < bound);
    }
}

TEST_CASE("same seed gives an identical dataset") {
    SynthSpec spec;
    spec.warp = Warp::sine;
    spec.noise_dims = 3;
    spec.noise_half_width = 2.0;
    const SynthResult a = synth_tasks(spec, 5);
    const SynthResult b = synth_tasks(spec, 5);
    CHECK(a.data.features == b.data.features);
    CHECK(a.data.task_split == b.data.task_split);
    CHECK(a.data.features != synth_tasks(spec, 6).data.features);
}

TEST_CASE("splits are 60/20/20 over tasks and therefore over categories") {
    SynthSpec spec;
    spec.n_tasks = 10;
    const SynthResult r = synth_tasks(spec, 2);
    CHECK(r.data.tasks_in(Split::train).size() == 6);
    CHECK(r.data.tasks_in(Split::val).size() == 2);
    CHECK(r.data.tasks_in(Split::test).size() == 2);
}

TEST_CASE("degenerate specs are rejected") {
    SynthSpec spec;
    spec.cov_min = 0.0;
    CHECK_THROWS_AS(synth_tasks(spec, 1), Error);
    spec = {};
    spec.cov_min = 2.0;
    spec.cov_max = 1.0;
    CHECK_THROWS_AS(synth_tasks(spec, 1), Error);
    spec = {};
    spec.warp = Warp::sine;
    spec.warp_strength = 1.0;
    CHECK_THROWS_AS(synth_tasks(spec, 1), Error);
    spec = {};
    spec.noise_dims = 2;
    CHECK_THROWS_AS(synth_tasks(spec, 1), Error);
}

TEST_CASE("true density integrates to one through the warp") {
    SynthSpec spec;
    spec.n_tasks = 2;
    spec.latent_dim = 2;
    spec.mean_scale = 0.5;
    spec.warp = Warp::sine;
    spec.warp_strength = 0.7;
    const SynthResult r = synth_tasks(spec, 4);
    // midpoint rule on a box that holds essentially all the mass
    const double lo = -9.0, hi = 9.0;
    const int n = 360;
    const double h = (hi - lo) / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x[2] = {lo + (i + 0.5) * h, lo + (j + 0.5) * h};
            total += std::exp(r.truth.log_density(0, x)) * h * h;
        }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("unwarped density equals the Gaussian closed form") {
    SynthSpec spec;
    spec.latent_dim = 1;
    spec.cov_min = spec.cov_max = 4.0;
    const SynthResult r = synth_tasks(spec, 1);
    const ClassTruth& c = r.truth.classes[0];
    const double x[1] = {c.mean[0] + 2.0};
    CHECK(r.truth.log_density(0, x) ==
          doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 4.0) - 0.5 * 4.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("noise block contributes a constant and bounds the support") {
    SynthSpec spec;
    spec.latent_dim = 1;
    spec.noise_dims = 2;
    spec.noise_half_width = 2.0;
    const SynthResult r = synth_tasks(spec, 1);
    const double inside_a[3] = {0.3, 1.0, -1.5};
    const double inside_b[3] = {0.3, -0.2, 0.1};
    const double outside[3] = {0.3, 2.5, 0.0};
    CHECK(r.truth.log_density(0, inside_a) == r.truth.log_density(0, inside_b));
    CHECK(std::isinf(r.truth.log_density(0, outside)));
}

}  // TEST_SUITE
