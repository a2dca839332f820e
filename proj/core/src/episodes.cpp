#include "metaood/episodes.hpp"

#include <string>

#include "metaood/error.hpp"

namespace metaood {

namespace {

diff::Matrix gather(const diff::Matrix& features, const std::vector<std::size_t>& rows) {
    diff::Matrix out(rows.size(), features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = features.row_span(rows[r]);
        std::copy(src.begin(), src.end(), &out(r, 0));
    }
    return out;
}

}  // namespace

EpisodeSampler::EpisodeSampler(const TaskDataset& data, Split split, EpisodeSpec spec)
    : data_(&data), spec_(spec) {
    if (spec.n_way == 0 || spec.support_per_class == 0) {
        throw SamplingError("episode spec: n_way and support_per_class must be positive");
    }
    if (spec.id_query_per_class == 0 || spec.ood_query_total == 0) {
        throw SamplingError("episode spec: query counts must be positive");
    }
    const std::vector<std::uint32_t> split_tasks = data.tasks_in(split);
    if (split_tasks.size() < 2) {
        throw SamplingError("split '" + std::string(to_string(split)) +
                            "' has fewer than 2 tasks, so there is no OoD source");
    }
    std::map<std::uint32_t, std::size_t> slot;
    for (std::uint32_t t : split_tasks) {
        slot[t] = tasks_.size();
        tasks_.push_back({t, {}, {}});
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto it = slot.find(data.task_ids[i]);
        if (it == slot.end()) continue;
        tasks_[it->second].rows.push_back(i);
        class_rows_[data.class_labels[i]].push_back(i);
    }
    const std::size_t per_class = spec.support_per_class + spec.id_query_per_class;
    for (const auto& [cls, rows] : class_rows_) {
        if (rows.size() >= per_class) {
            tasks_[slot.at(data.task_ids[rows.front()])].eligible_classes.push_back(cls);
        }
    }
    for (std::size_t k = 0; k < tasks_.size(); ++k) {
        if (tasks_[k].eligible_classes.size() < spec.n_way) continue;
        std::size_t other_rows = 0;
        bool other_class_ok = false;
        for (std::size_t j = 0; j < tasks_.size(); ++j) {
            if (j == k) continue;
            other_rows += tasks_[j].rows.size();
            for (const auto& [cls, rows] : class_rows_) {
                if (data.task_ids[rows.front()] == tasks_[j].task && rows.size() >= spec.ood_query_total) {
                    other_class_ok = true;
                }
            }
        }
        const bool ood_ok = spec.ood_mode == OodMode::pooled ? other_rows >= spec.ood_query_total
                                                              : other_class_ok;
        if (ood_ok) eligible_tasks_.push_back(k);
    }
    if (eligible_tasks_.empty()) {
        throw SamplingError("no task in split '" + std::string(to_string(split)) + "' has " +
                            std::to_string(spec.n_way) + " classes with at least " +
                            std::to_string(per_class) +
                            " instances each plus enough OoD instances in the other tasks");
    }
}

Episode EpisodeSampler::sample(Rng& rng) const {
    const TaskIndex& task = tasks_[eligible_tasks_[uniform_index(rng, eligible_tasks_.size())]];
    Episode ep;
    ep.n_way = spec_.n_way;
    ep.task = task.task;
    ep.classes = sample_without_replacement(task.eligible_classes, spec_.n_way, rng);

    const std::size_t per_class = spec_.support_per_class + spec_.id_query_per_class;
    for (std::size_t k = 0; k < ep.classes.size(); ++k) {
        const auto picked = sample_without_replacement(class_rows_.at(ep.classes[k]), per_class, rng);
        for (std::size_t i = 0; i < per_class; ++i) {
            if (i < spec_.support_per_class) {
                ep.support_rows.push_back(picked[i]);
                ep.support_labels.push_back(k);
            } else {
                ep.query_id_rows.push_back(picked[i]);
                ep.query_id_labels.push_back(k);
            }
        }
    }

    if (spec_.ood_mode == OodMode::pooled) {
        std::vector<std::size_t> pool;
        for (const TaskIndex& other : tasks_) {
            if (other.task != task.task) pool.insert(pool.end(), other.rows.begin(), other.rows.end());
        }
        ep.query_ood_rows = sample_without_replacement(std::move(pool), spec_.ood_query_total, rng);
    } else {
        std::vector<std::uint32_t> candidates;
        for (const auto& [cls, rows] : class_rows_) {
            if (data_->task_ids[rows.front()] != task.task && rows.size() >= spec_.ood_query_total) {
                candidates.push_back(cls);
            }
        }
        const std::uint32_t cls = candidates[uniform_index(rng, candidates.size())];
        ep.query_ood_rows = sample_without_replacement(class_rows_.at(cls), spec_.ood_query_total, rng);
    }

    ep.support = gather(data_->features, ep.support_rows);
    ep.query_id = gather(data_->features, ep.query_id_rows);
    ep.query_ood = gather(data_->features, ep.query_ood_rows);
    return ep;
}

std::vector<Episode> fixed_eval_episodes(const TaskDataset& data, Split split, const EpisodeSpec& spec,
                                         std::size_t n_episodes, std::uint64_t seed) {
    const EpisodeSampler sampler(data, split, spec);
    Rng rng(seed);
    std::vector<Episode> out;
    out.reserve(n_episodes);
    for (std::size_t i = 0; i < n_episodes; ++i) out.push_back(sampler.sample(rng));
    return out;
}

}  // namespace metaood
