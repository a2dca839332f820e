#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "metaood/dataset.hpp"
#include "metaood/random.hpp"

namespace metaood {

enum class OodMode {
    pooled,           // OoD queries drawn uniformly from every instance of the other tasks
    single_category,  // all OoD queries come from one class of one other task
};

struct EpisodeSpec {
    std::size_t n_way = 5;
    std::size_t support_per_class = 5;
    std::size_t id_query_per_class = 5;
    std::size_t ood_query_total = 25;
    OodMode ood_mode = OodMode::pooled;
};

/// One few-shot task: labeled support, ID queries from the same classes and OoD
/// queries from other tasks. Labels are episode-local (0..n_way-1).
struct Episode {
    std::size_t n_way = 0;
    std::uint32_t task = 0;
    std::vector<std::uint32_t> classes;  // global class id of each local label

    diff::Matrix support;
    std::vector<std::size_t> support_labels;
    diff::Matrix query_id;
    std::vector<std::size_t> query_id_labels;
    diff::Matrix query_ood;

    // Dataset row of every instance above, for provenance checks.
    std::vector<std::size_t> support_rows;
    std::vector<std::size_t> query_id_rows;
    std::vector<std::size_t> query_ood_rows;
};

/// Samples episodes from one split. The split's tasks and classes are indexed once
/// at construction; the sampler itself is immutable.
class EpisodeSampler {
public:
    /// Throws SamplingError if the split has fewer than two tasks or no task can
    /// satisfy `spec`.
    EpisodeSampler(const TaskDataset& data, Split split, EpisodeSpec spec);

    Episode sample(Rng& rng) const;

    const EpisodeSpec& spec() const noexcept { return spec_; }
    std::size_t eligible_task_count() const noexcept { return eligible_tasks_.size(); }

private:
    struct TaskIndex {
        std::uint32_t task;
        std::vector<std::uint32_t> eligible_classes;  // enough rows for support + ID queries
        std::vector<std::size_t> rows;                // every row of the task
    };

    const TaskDataset* data_;
    EpisodeSpec spec_;
    std::vector<TaskIndex> tasks_;
    std::vector<std::size_t> eligible_tasks_;  // indices into tasks_
    std::map<std::uint32_t, std::vector<std::size_t>> class_rows_;
};

/// A reproducible episode list (validation/test protocol).
std::vector<Episode> fixed_eval_episodes(const TaskDataset& data, Split split, const EpisodeSpec& spec,
                                         std::size_t n_episodes, std::uint64_t seed);

}  // namespace metaood
