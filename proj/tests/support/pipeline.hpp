#pragma once

// Finite-difference check of the full episode loss with respect to every shared
// parameter (encoder weights, biases and log β).

#include <algorithm>
#include <cmath>
#include <vector>

#include "metaood/objective.hpp"

namespace metaood::oracle {

inline double episode_loss(const CommonParams& params, const Episode& ep, ObjectiveKind kind,
                           const ForwardOptions& opt) {
    diff::Tape tape;
    const BoundParams bound = bind(tape, params, false);
    return meta_objective(kind, bound, ep, opt).item();
}

inline std::vector<double> episode_loss_gradient(const CommonParams& params, const Episode& ep, ObjectiveKind kind,
                                                 const ForwardOptions& opt) {
    diff::Tape tape;
    const BoundParams bound = bind(tape, params, true);
    tape.backward(meta_objective(kind, bound, ep, opt));
    return bound.flat_grad();
}

/// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, floor) over the flat parameter vector.
inline double pipeline_gradient_error(const CommonParams& params, const Episode& ep, ObjectiveKind kind,
                                      const ForwardOptions& opt, double step = 1e-5, double floor = 1e-6) {
    const std::vector<double> analytic = episode_loss_gradient(params, ep, kind, opt);
    std::vector<double> flat = params.flatten();
    CommonParams work = params;
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double orig = flat[i];
        flat[i] = orig + step;
        work.assign(flat);
        const double up = episode_loss(work, ep, kind, opt);
        flat[i] = orig - step;
        work.assign(flat);
        const double down = episode_loss(work, ep, kind, opt);
        flat[i] = orig;
        const double numeric = (up - down) / (2.0 * step);
        diff += (analytic[i] - numeric) * (analytic[i] - numeric);
        na += analytic[i] * analytic[i];
        nn += numeric * numeric;
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

}  // namespace metaood::oracle
