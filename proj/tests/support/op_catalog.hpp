#pragma once

// Every differentiable op wrapped as a scalar loss over random inputs, for
// finite-difference checks.

#include <string>
#include <vector>

#include "metaood/diff/ops.hpp"
#include "support/oracles.hpp"

namespace metaood::oracle {

struct OpCase {
    std::string name;
    GraphFn fn;
    std::vector<Matrix> inputs;
};

inline std::vector<OpCase> op_cases(std::mt19937_64& rng) {
    using namespace metaood::diff;
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 2, rng);
    const Matrix c = random_matrix(3, 4, rng);
    Matrix pos = random_matrix(3, 4, rng);
    for (double& v : pos.data()) v = 0.5 + std::abs(v);
    Matrix clamped = random_matrix(3, 4, rng);
    for (double& v : clamped.data()) {
        if (std::abs(v - 0.1) < 1e-3) v += 0.01;  // keep away from the kink
    }
    const Matrix x = random_matrix(4, 4, rng);
    const Matrix rhs = random_matrix(4, 3, rng);
    const Matrix s = random_matrix(1, 1, rng);
    const Matrix w = random_matrix(3, 3, rng);

    // PD input built from a free matrix so both triangles move together.
    const auto spd = [](const Var& m, const Var& shift) {
        return add_diagonal(matmul(m, transpose(m)), add_scalar(square(shift), 0.5));
    };
    const std::vector<std::size_t> rows{2, 0, 2};

    return {
        {"matmul", [](Tape&, auto& v) { return sum(square(matmul(v[0], v[1]))); }, {a, b}},
        {"add", [](Tape&, auto& v) { return sum(square(v[0] + v[1])); }, {a, c}},
        {"sub", [](Tape&, auto& v) { return sum(square(v[0] - v[1])); }, {a, c}},
        {"neg", [](Tape&, auto& v) { return sum(-v[0] * v[1]); }, {a, c}},
        {"mul", [](Tape&, auto& v) { return sum(v[0] * v[1]); }, {a, c}},
        {"mul_broadcast", [](Tape&, auto& v) { return sum(square(v[0] * v[1])); }, {a, s}},
        {"add_broadcast", [](Tape&, auto& v) { return sum(square(v[1] + v[0])); }, {a, s}},
        {"relu", [](Tape&, auto& v) { return sum(square(relu(v[0]))); }, {a}},
        {"sigmoid", [](Tape&, auto& v) { return sum(sigmoid(v[0]) * v[1]); }, {a, c}},
        {"exp", [](Tape&, auto& v) { return sum(exp(v[0]) * v[1]); }, {a, c}},
        {"log", [](Tape&, auto& v) { return sum(log(v[0]) * v[1]); }, {pos, c}},
        {"sqrt", [](Tape&, auto& v) { return sum(sqrt(v[0]) * v[1]); }, {pos, c}},
        {"square", [](Tape&, auto& v) { return sum(square(v[0]) * v[1]); }, {a, c}},
        {"reciprocal", [](Tape&, auto& v) { return sum(reciprocal(v[0]) * v[1]); }, {pos, c}},
        {"scale", [](Tape&, auto& v) { return sum(scale(v[0], -1.7) * v[0]); }, {a}},
        {"add_scalar", [](Tape&, auto& v) { return sum(square(add_scalar(v[0], 0.3))); }, {a}},
        {"clamp_min", [](Tape&, auto& v) { return sum(square(clamp_min(v[0], 0.1))); }, {clamped}},
        {"sum_rows", [](Tape&, auto& v) { return sum(square(sum(v[0], Axis::over_rows))); }, {a}},
        {"sum_cols", [](Tape&, auto& v) { return sum(square(sum(v[0], Axis::over_cols))); }, {a}},
        {"mean_rows", [](Tape&, auto& v) { return sum(square(mean(v[0], Axis::over_rows))); }, {a}},
        {"mean_cols", [](Tape&, auto& v) { return sum(square(mean(v[0], Axis::over_cols))); }, {a}},
        {"logsumexp_rows", [](Tape&, auto& v) { return sum(square(logsumexp(v[0], Axis::over_rows))); }, {a}},
        {"logsumexp_cols", [](Tape&, auto& v) { return sum(square(logsumexp(v[0], Axis::over_cols))); }, {a}},
        {"logsumexp_all", [](Tape&, auto& v) { return logsumexp(v[0]); }, {a}},
        {"max_rows", [](Tape&, auto& v) { return sum(square(max(v[0], Axis::over_rows))); }, {a}},
        {"max_cols", [](Tape&, auto& v) { return sum(square(max(v[0], Axis::over_cols))); }, {a}},
        {"transpose", [](Tape&, auto& v) { return sum(transpose(v[0]) * transpose(v[1])); }, {a, c}},
        {"gather_rows", [rows](Tape&, auto& v) { return sum(square(gather_rows(v[0], rows))); }, {a}},
        {"concat_rows", [](Tape&, auto& v) { return sum(square(concat_rows({v[0], v[1], v[0]}))); }, {a, c}},
        {"broadcast_rows", [](Tape&, auto& v) { return sum(square(broadcast_rows(mean(v[0], Axis::over_rows), 5))); },
         {a}},
        {"diagonal", [](Tape&, auto& v) { return sum(square(diagonal(v[0]))); }, {w}},
        {"add_diagonal", [w](Tape& t, auto& v) { return sum(square(add_diagonal(v[0], v[1])) * t.constant(w)); },
         {w, s}},
        {"cholesky", [spd](Tape&, auto& v) { return sum(square(cholesky(spd(v[0], v[1])))); }, {x, s}},
        {"logdet_from_cholesky", [spd](Tape&, auto& v) { return logdet_from_cholesky(cholesky(spd(v[0], v[1]))); },
         {x, s}},
        {"trisolve", [spd](Tape&, auto& v) { return sum(square(trisolve(cholesky(spd(v[0], v[2])), v[1]))); },
         {x, rhs, s}},
    };
}

}  // namespace metaood::oracle
