#include "metaood/objective.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "metaood/error.hpp"

namespace metaood {

namespace dd = metaood::diff;
using dd::Axis;

double exact_auc(std::span<const double> ood_scores, std::span<const double> id_scores, TieMode ties) {
    if (ood_scores.empty() || id_scores.empty()) throw DomainError("exact_auc: empty score set");
    struct Entry {
        double score;
        bool ood;
    };
    std::vector<Entry> all;
    all.reserve(ood_scores.size() + id_scores.size());
    for (double s : ood_scores) all.push_back({s, true});
    for (double s : id_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // For each tie group: OoD members beat every ID score strictly below the group,
    // and split ties with the ID members inside it.
    double wins = 0.0;
    std::size_t id_below = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::size_t ood_in = 0, id_in = 0;
        while (j < all.size() && all[j].score == all[i].score) {
            (all[j].ood ? ood_in : id_in) += 1;
            ++j;
        }
        wins += static_cast<double>(ood_in) * static_cast<double>(id_below);
        if (ties == TieMode::half) wins += 0.5 * static_cast<double>(ood_in) * static_cast<double>(id_in);
        id_below += id_in;
        i = j;
    }
    return wins / (static_cast<double>(ood_scores.size()) * static_cast<double>(id_scores.size()));
}

Var smooth_auc(const Var& ood_scores, const Var& id_scores) {
    const std::size_t no = ood_scores.shape().size(), ni = id_scores.shape().size();
    if (no == 0 || ni == 0) throw DomainError("smooth_auc: empty score set");
    if (ood_scores.shape().rows != 1 || id_scores.shape().rows != 1) {
        throw DimensionError("smooth_auc: scores must be row vectors");
    }
    // gaps(o, i) = u_O[o] - u_I[i]
    const Var ood_col = dd::transpose(dd::broadcast_rows(ood_scores, ni));  // N_O x N_I
    const Var id_rows = dd::broadcast_rows(id_scores, no);                  // N_O x N_I
    return dd::mean(dd::sigmoid(ood_col - id_rows));
}

std::string_view to_string(ObjectiveKind kind) {
    return kind == ObjectiveKind::auc ? "auc" : "cross_entropy";
}

ObjectiveKind parse_objective(std::string_view name) {
    if (name == "auc") return ObjectiveKind::auc;
    if (name == "cross_entropy") return ObjectiveKind::cross_entropy;
    throw Error("unknown objective '" + std::string(name) + "'");
}

namespace {

std::vector<std::size_t> range(std::size_t from, std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), from);
    return v;
}

}  // namespace

EpisodeEmbedding embed_episode(const BoundParams& params, const Episode& episode, Rng* dropout_rng,
                               bool include_ood) {
    Tape& tape = *params.log_beta.tape();
    const std::size_t dim = episode.support.cols();
    const std::size_t ns = episode.support.rows(), ni = episode.query_id.rows();
    const std::size_t no = include_ood ? episode.query_ood.rows() : 0;
    if (episode.query_id.cols() != dim || (include_ood && episode.query_ood.cols() != dim)) {
        throw DimensionError("episode: support and query feature widths differ");
    }
    Matrix stacked(ns + ni + no, dim);
    auto place = [&](const Matrix& m, std::size_t at) {
        std::copy(m.data().begin(), m.data().end(), stacked.data().begin() + at * dim);
    };
    place(episode.support, 0);
    place(episode.query_id, ns);
    if (include_ood) place(episode.query_ood, ns + ni);

    const Var z = embed(params, tape.constant(std::move(stacked)), dropout_rng);
    const Standardized s = standardize(dd::gather_rows(z, range(0, ns)), dd::gather_rows(z, range(ns, ni + no)));
    EpisodeEmbedding out;
    out.support = s.support;
    out.id = dd::gather_rows(s.query, range(0, ni));
    if (include_ood) out.ood = dd::gather_rows(s.query, range(ni, no));
    return out;
}

EpisodeScores score_episode(const BoundParams& params, const Episode& episode, const ForwardOptions& options) {
    const EpisodeEmbedding e = embed_episode(params, episode, options.dropout_rng);
    const Var queries = dd::concat_rows({e.ood, e.id});
    const Var scores = variant_score(options.variant, e.support, episode.support_labels, episode.n_way,
                                     params.beta(), queries, options.adapt);
    const std::size_t no = episode.query_ood.rows(), ni = episode.query_id.rows();
    const Var col = dd::transpose(scores);
    EpisodeScores out;
    out.ood = dd::transpose(dd::gather_rows(col, range(0, no)));
    out.id = dd::transpose(dd::gather_rows(col, range(no, ni)));
    return out;
}

Var meta_objective(ObjectiveKind kind, const BoundParams& params, const Episode& episode,
                   const ForwardOptions& options) {
    if (kind == ObjectiveKind::auc) {
        const EpisodeScores s = score_episode(params, episode, options);
        return -smooth_auc(s.ood, s.id);
    }
    const EpisodeEmbedding e = embed_episode(params, episode, options.dropout_rng, /*include_ood=*/false);
    const GmmParams gmm = adapt(e.support, episode.support_labels, episode.n_way, params.beta(), options.adapt);
    const Classification cls = classify(gmm, e.id);
    const std::size_t m = episode.query_id.rows();
    Matrix one_hot(episode.n_way, m);
    for (std::size_t i = 0; i < m; ++i) one_hot(episode.query_id_labels[i], i) = 1.0;
    const Var picked = cls.log_posterior * params.log_beta.tape()->constant(std::move(one_hot));
    return dd::scale(dd::sum(picked), -1.0 / static_cast<double>(m));
}

}  // namespace metaood
