#include "metaood/dataset.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "metaood/binary_io.hpp"
#include "metaood/error.hpp"

namespace metaood {

using namespace binary_io;
using json = nlohmann::json;

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw FormatError("unknown split '" + std::string(s) + "'");
}

std::vector<std::uint32_t> TaskDataset::tasks_in(Split split) const {
    std::vector<std::uint32_t> out;
    for (const auto& [task, s] : task_split) {
        if (s == split) out.push_back(task);
    }
    return out;
}

void TaskDataset::validate() const {
    if (features.rows() != class_labels.size() || task_ids.size() != class_labels.size()) {
        throw FormatError("dataset: features, class labels and task ids disagree on N");
    }
    std::map<std::uint32_t, std::uint32_t> class_task;
    std::map<std::uint32_t, std::set<std::uint32_t>> task_classes;
    for (std::size_t i = 0; i < size(); ++i) {
        const auto [it, inserted] = class_task.emplace(class_labels[i], task_ids[i]);
        if (!inserted && it->second != task_ids[i]) {
            throw FormatError("dataset: class " + std::to_string(class_labels[i]) +
                              " appears in tasks " + std::to_string(it->second) + " and " +
                              std::to_string(task_ids[i]));
        }
        task_classes[task_ids[i]].insert(class_labels[i]);
    }
    for (const auto& [task, classes] : task_classes) {
        if (classes.size() < 2) {
            throw FormatError("dataset: task " + std::to_string(task) + " has fewer than 2 classes");
        }
        if (!task_split.contains(task)) {
            throw FormatError("dataset: task " + std::to_string(task) + " has no split assignment");
        }
    }
    if (!features.all_finite()) throw FormatError("dataset: non-finite feature value");
}

std::filesystem::path manifest_path_for(const std::filesystem::path& epds_path) {
    std::filesystem::path p = epds_path;
    p += ".json";
    return p;
}

void write_epds(const std::filesystem::path& path, const TaskDataset& data,
                std::string_view extra_manifest) {
    data.validate();
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("epds: cannot open " + path.string() + " for writing");
        out.write("EPDS", 4);
        write_u32(out, kEpdsVersion);
        write_u32(out, static_cast<std::uint32_t>(data.size()));
        write_u32(out, static_cast<std::uint32_t>(data.input_dim()));
        for (double v : data.features.data()) write_f32(out, static_cast<float>(v));
        for (std::uint32_t c : data.class_labels) write_u32(out, c);
        for (std::uint32_t t : data.task_ids) write_u32(out, t);
        if (!out) throw Error("epds: write failed for " + path.string());
    }
    json manifest = extra_manifest.empty() ? json::object() : json::parse(extra_manifest);
    manifest["format"] = "EPDS";
    manifest["version"] = kEpdsVersion;
    json tasks = json::array();
    for (const auto& [task, split] : data.task_split) {
        tasks.push_back({{"id", task}, {"split", to_string(split)}});
    }
    manifest["tasks"] = tasks;
    std::ofstream out(manifest_path_for(path), std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("epds: cannot write manifest for " + path.string());
}

TaskDataset read_epds(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("epds: cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::string_view(magic, 4) != "EPDS") {
        throw FormatError("epds: bad magic in " + path.string());
    }
    const std::uint32_t version = read_u32(in, "version");
    if (version != kEpdsVersion) throw FormatError("epds: unsupported version " + std::to_string(version));
    const std::uint32_t n = read_u32(in, "N");
    const std::uint32_t dim = read_u32(in, "input_dim");

    const auto file_size = std::filesystem::file_size(path);
    const std::uintmax_t expected = 16 + std::uintmax_t{n} * dim * 4 + std::uintmax_t{n} * 8;
    if (file_size != expected) {
        throw FormatError("epds: file length " + std::to_string(file_size) + " does not match header (" +
                          std::to_string(expected) + " bytes expected)");
    }

    TaskDataset data;
    data.features = diff::Matrix(n, dim);
    for (double& v : data.features.data()) v = read_f32(in, "features");
    data.class_labels.resize(n);
    for (auto& c : data.class_labels) c = read_u32(in, "class labels");
    data.task_ids.resize(n);
    for (auto& t : data.task_ids) t = read_u32(in, "task ids");

    std::ifstream mf(manifest_path_for(path));
    if (!mf) throw FormatError("epds: missing manifest " + manifest_path_for(path).string());
    json manifest;
    try {
        mf >> manifest;
        for (const auto& t : manifest.at("tasks")) {
            data.task_split[t.at("id").get<std::uint32_t>()] = parse_split(t.at("split").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("epds: malformed manifest: ") + e.what());
    }
    data.validate();
    return data;
}

}  // namespace metaood
