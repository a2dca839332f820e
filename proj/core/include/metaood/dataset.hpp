#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "metaood/diff/matrix.hpp"

namespace metaood {

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Feature rows labeled with a class id and a task id. Class ids are global and
/// never shared between tasks.
struct TaskDataset {
    diff::Matrix features;  // N x input_dim, every value exactly representable as f32
    std::vector<std::uint32_t> class_labels;
    std::vector<std::uint32_t> task_ids;
    std::map<std::uint32_t, Split> task_split;

    std::size_t size() const noexcept { return class_labels.size(); }
    std::size_t input_dim() const noexcept { return features.cols(); }

    std::vector<std::uint32_t> tasks_in(Split split) const;

    /// Checks row-count consistency, class/task disjointness, at least two classes
    /// per task and a split for every task. Throws FormatError naming the violation.
    void validate() const;
};

// EPDS v1 binary layout (little-endian):
//   char[4] "EPDS", u32 version = 1, u32 N, u32 input_dim,
//   f32[N*input_dim] row-major features, u32[N] class labels, u32[N] task ids.
// The task → split mapping lives in a JSON sidecar next to the binary.
inline constexpr std::uint32_t kEpdsVersion = 1;

std::filesystem::path manifest_path_for(const std::filesystem::path& epds_path);

/// Writes the binary and its manifest. `extra_manifest` (a JSON object as text, may be
/// empty) is merged into the manifest, e.g. for generator provenance.
void write_epds(const std::filesystem::path& path, const TaskDataset& data,
                std::string_view extra_manifest = {});
TaskDataset read_epds(const std::filesystem::path& path);

}  // namespace metaood
