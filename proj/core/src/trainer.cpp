#include "metaood/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "metaood/error.hpp"

namespace metaood {

namespace {

// Independent engine per purpose, derived from the run seed.
Rng derived_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

enum Stream : std::uint64_t { kEpisodes = 1, kDropout = 2, kValidation = 3 };

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw Error("train: learning_rate must be non-negative");
    if (patience < 1) throw Error("train: patience must be at least 1");
    if (episodes_per_epoch < 1) throw Error("train: episodes_per_epoch must be at least 1");
    if (val_episodes < 1) throw Error("train: val_episodes must be at least 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw Error("train: Adam decay rates must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw Error("train: adam_eps must be positive");
    variant.validate();
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw DimensionError("adam: parameter/gradient size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double m_hat = m_[i] / c1;
        const double v_hat = v_[i] / c2;
        params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
}

double clip_global_norm(std::span<double> grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grad) g *= s;
    }
    return norm;
}

std::string TrainLog::to_csv(bool include_wall_time) const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,train_smooth_auc,val_auc,beta";
    if (include_wall_time) out << ",wall_seconds";
    out << '\n';
    for (const EpochRecord& r : epochs) {
        out << r.epoch << ',' << r.train_loss << ',' << r.train_smooth_auc << ',' << r.val_auc << ',' << r.beta;
        if (include_wall_time) out << ',' << r.wall_seconds;
        out << '\n';
    }
    return out.str();
}

TrainResult train(const TaskDataset& data, const EncoderConfig& encoder, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    return train_from(data, init_params(encoder, config.seed), config, on_epoch);
}

std::vector<Episode> validation_episodes(const TaskDataset& data, const TrainConfig& config) {
    Rng seed_rng = derived_rng(config.seed, kValidation);
    return fixed_eval_episodes(data, Split::val, config.val_episode_spec, config.val_episodes, seed_rng());
}

TrainResult train_from(const TaskDataset& data, CommonParams initial, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
    config.validate();
    if (initial.config.input_dim != data.input_dim()) {
        throw DimensionError("train: encoder expects " + std::to_string(initial.config.input_dim) +
                             " features, dataset has " + std::to_string(data.input_dim()));
    }
    const EpisodeSampler sampler(data, Split::train, config.episode_spec);
    const std::vector<Episode> val_episodes = validation_episodes(data, config);
    Rng episode_rng = derived_rng(config.seed, kEpisodes);
    Rng dropout_rng = derived_rng(config.seed, kDropout);

    CommonParams params = std::move(initial);
    Adam adam(params.parameter_count(), config.learning_rate, config.adam_beta1, config.adam_beta2,
              config.adam_eps);

    TrainResult result;
    result.initial_val_auc = evaluate(params, val_episodes, config.variant, config.adapt).mean_auc;
    result.best = params;
    result.best_val_auc = result.initial_val_auc;
    result.stop_reason = "max_epochs";

    const auto start = std::chrono::steady_clock::now();
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t e = 0; e < config.episodes_per_epoch; ++e) {
            const Episode episode = sampler.sample(episode_rng);
            std::vector<double> grad;
            double loss_value = 0.0;
            try {
                Tape tape;
                const BoundParams bound = bind(tape, params, true);
                ForwardOptions fwd{config.variant, config.adapt, &dropout_rng};
                const Var loss = meta_objective(config.objective, bound, episode, fwd);
                tape.backward(loss);
                loss_value = loss.item();
                grad = bound.flat_grad();
            } catch (const NonFiniteError& err) {
                throw TrainingAborted("epoch " + std::to_string(epoch) + ", episode " + std::to_string(e) +
                                          ": " + err.what(),
                                      params);
            } catch (const NotPositiveDefiniteError& err) {
                throw TrainingAborted("epoch " + std::to_string(epoch) + ", episode " + std::to_string(e) +
                                          ": " + err.what(),
                                      params);
            }
            if (!std::isfinite(loss_value) || !all_finite(grad)) {
                throw TrainingAborted("non-finite loss or gradient at epoch " + std::to_string(epoch), params);
            }
            clip_global_norm(grad, config.clip_norm);
            std::vector<double> flat = params.flatten();
            adam.step(flat, grad);
            if (!all_finite(flat)) {
                throw TrainingAborted("non-finite parameters after step at epoch " + std::to_string(epoch), params);
            }
            params.assign(flat);
            loss_sum += loss_value;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(config.episodes_per_epoch);
        rec.train_smooth_auc = config.objective == ObjectiveKind::auc ? -rec.train_loss : 0.0;
        rec.val_auc = evaluate(params, val_episodes, config.variant, config.adapt).mean_auc;
        rec.beta = params.beta();
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_auc > result.best_val_auc) {
            result.best_val_auc = rec.val_auc;
            result.best = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.stop_reason = "patience";
            break;
        }
    }
    result.last = std::move(params);
    return result;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "episode,auc,accuracy,n_id,n_ood\n";
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const EpisodeResult& e = episodes[i];
        out << i << ',' << e.auc << ',' << e.accuracy << ',' << e.id_scores.size() << ','
            << e.ood_scores.size() << '\n';
    }
    return out.str();
}

std::pair<double, double> mean_and_stderr(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

EvalReport evaluate(const CommonParams& params, std::span<const Episode> episodes, const VariantSpec& variant,
                    const AdaptOptions& adapt) {
    if (episodes.empty()) throw DomainError("evaluate: no episodes");
    EvalReport report;
    std::vector<double> aucs, accs;
    for (const Episode& episode : episodes) {
        Tape tape;
        const BoundParams bound = bind(tape, params, false);
        const EpisodeEmbedding e = embed_episode(bound, episode, nullptr);
        const Var queries = diff::concat_rows({e.ood, e.id});
        const Matrix scores = variant_score(variant, e.support, episode.support_labels, episode.n_way,
                                            bound.beta(), queries, adapt)
                                  .value();
        EpisodeResult r;
        const std::size_t no = episode.query_ood.rows();
        r.ood_scores.assign(scores.data().begin(), scores.data().begin() + static_cast<std::ptrdiff_t>(no));
        r.id_scores.assign(scores.data().begin() + static_cast<std::ptrdiff_t>(no), scores.data().end());
        r.auc = exact_auc(r.ood_scores, r.id_scores);
        const auto predicted =
            variant_classify(variant, e.support, episode.support_labels, episode.n_way, bound.beta(), e.id, adapt);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == episode.query_id_labels[i];
        r.accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
        aucs.push_back(r.auc);
        accs.push_back(r.accuracy);
        report.episodes.push_back(std::move(r));
    }
    std::tie(report.mean_auc, report.stderr_auc) = mean_and_stderr(aucs);
    std::tie(report.mean_accuracy, report.stderr_accuracy) = mean_and_stderr(accs);
    return report;
}

}  // namespace metaood
