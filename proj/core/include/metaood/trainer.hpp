#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metaood/error.hpp"
#include "metaood/objective.hpp"

namespace metaood {

struct TrainConfig {
    EpisodeSpec episode_spec;
    EpisodeSpec val_episode_spec{5, 5, 5, 5, OodMode::single_category};
    ObjectiveKind objective = ObjectiveKind::auc;
    VariantSpec variant;
    AdaptOptions adapt;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 10.0;  // <= 0 disables clipping
    std::size_t max_epochs = 5000;
    std::size_t episodes_per_epoch = 100;
    std::size_t val_episodes = 64;
    std::size_t patience = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Adam over a flat parameter vector.
class Adam {
public:
    Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(std::span<double> params, std::span<const double> grad);

    std::size_t steps() const noexcept { return t_; }
    const std::vector<double>& first_moment() const noexcept { return m_; }
    const std::vector<double>& second_moment() const noexcept { return v_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

/// Scales `grad` in place so its Euclidean norm is at most `max_norm`; returns the
/// norm before scaling.
double clip_global_norm(std::span<double> grad, double max_norm);

struct EpochRecord {
    std::size_t epoch = 0;               // 1-based
    double train_smooth_auc = 0.0;       // mean over the epoch's episodes (auc objective)
    double train_loss = 0.0;
    double val_auc = 0.0;                // mean exact AUC on the fixed validation list
    double beta = 0.0;
    double wall_seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;

    /// Header: epoch,train_loss,train_smooth_auc,val_auc,beta,wall_seconds
    std::string to_csv(bool include_wall_time = true) const;
};

struct TrainResult {
    CommonParams best;
    CommonParams last;
    TrainLog log;
    std::size_t best_epoch = 0;  // 0 when no epoch improved on the initial parameters
    double best_val_auc = 0.0;
    double initial_val_auc = 0.0;
    std::string stop_reason;
};

/// Training stopped on a non-finite loss or gradient. Carries the last parameters
/// that produced a finite step.
class TrainingAborted : public Error {
public:
    TrainingAborted(const std::string& what, CommonParams last_good)
        : Error(what), last_good_(std::move(last_good)) {}
    const CommonParams& last_good() const noexcept { return last_good_; }

private:
    CommonParams last_good_;
};

/// The fixed validation list used for early stopping under `config`.
std::vector<Episode> validation_episodes(const TaskDataset& data, const TrainConfig& config);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Episodic meta-training with Adam and validation-AUC early stopping. Deterministic
/// given config.seed: initialization uses `seed`, episode sampling and dropout use
/// derived streams.
TrainResult train(const TaskDataset& data, const EncoderConfig& encoder, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Same, continuing from given initial parameters.
TrainResult train_from(const TaskDataset& data, CommonParams initial, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

struct EpisodeResult {
    double auc = 0.0;
    double accuracy = 0.0;
    std::vector<double> ood_scores;
    std::vector<double> id_scores;
};

struct EvalReport {
    std::vector<EpisodeResult> episodes;
    double mean_auc = 0.0;
    double stderr_auc = 0.0;
    double mean_accuracy = 0.0;
    double stderr_accuracy = 0.0;

    /// Header: episode,auc,accuracy,n_id,n_ood
    std::string to_csv() const;
};

/// Mean and standard error (sample standard deviation / √n).
std::pair<double, double> mean_and_stderr(std::span<const double> values);

/// Exact AUC and ID-query accuracy per episode, scored in eval mode (no dropout).
EvalReport evaluate(const CommonParams& params, std::span<const Episode> episodes, const VariantSpec& variant,
                    const AdaptOptions& adapt = {});

}  // namespace metaood
