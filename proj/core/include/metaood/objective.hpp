#pragma once

#include <span>

#include "metaood/encoder.hpp"
#include "metaood/episodes.hpp"
#include "metaood/gmm.hpp"

namespace metaood {

enum class TieMode {
    half,    // tied pairs count 0.5 (reported metrics)
    strict,  // tied pairs count 0, the literal indicator
};

/// Fraction of (OoD, ID) pairs ranked correctly, via sorting in O(n log n).
/// Throws DomainError on an empty set.
double exact_auc(std::span<const double> ood_scores, std::span<const double> id_scores,
                 TieMode ties = TieMode::half);

/// Mean of σ(u_O - u_I) over all pairs; inputs are 1 x N_O and 1 x N_I rows.
Var smooth_auc(const Var& ood_scores, const Var& id_scores);

enum class ObjectiveKind { auc, cross_entropy };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind parse_objective(std::string_view name);

struct ForwardOptions {
    VariantSpec variant;
    AdaptOptions adapt;
    Rng* dropout_rng = nullptr;  // non-null enables dropout
};

/// Standardized embeddings of one episode. Support statistics set the scale.
struct EpisodeEmbedding {
    Var support;  // N_S x D
    Var ood;      // N_O x D, invalid when the OoD queries were skipped
    Var id;       // N_I x D
};

/// Embeds support, ID queries and (unless `include_ood` is false) OoD queries in one
/// batch on the tape of `params`.
EpisodeEmbedding embed_episode(const BoundParams& params, const Episode& episode, Rng* dropout_rng,
                               bool include_ood = true);

/// Scores of one episode after embedding, standardizing with support statistics
/// and adapting to the support.
struct EpisodeScores {
    Var ood;  // 1 x N_O
    Var id;   // 1 x N_I
};

EpisodeScores score_episode(const BoundParams& params, const Episode& episode, const ForwardOptions& options);

/// Loss to minimize for one episode.
///   auc:           -smooth_auc of the episode's OoD scores
///   cross_entropy: mean -log p(y | x) over ID queries under the full mixture;
///                  the OoD queries are never read.
Var meta_objective(ObjectiveKind kind, const BoundParams& params, const Episode& episode,
                   const ForwardOptions& options);

}  // namespace metaood
