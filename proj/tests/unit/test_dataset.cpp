#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "metaood/dataset.hpp"
#include "metaood/error.hpp"
#include "metaood/synth.hpp"

using namespace metaood;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

TaskDataset tiny() {
    TaskDataset d;
    d.features = diff::Matrix{{0.5, 1.0}, {1.5, -2.0}, {3.25, 0.0}, {-1.0, 8.0}};
    d.class_labels = {0, 1, 2, 3};
    d.task_ids = {0, 0, 1, 1};
    d.task_split = {{0, Split::train}, {1, Split::test}};
    return d;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("validate catches invariant violations") {
    CHECK_NOTHROW(tiny().validate());

    TaskDataset shared = tiny();
    shared.class_labels = {0, 1, 1, 3};  // class 1 in tasks 0 and 1
    CHECK_THROWS_AS(shared.validate(), FormatError);

    TaskDataset one_class = tiny();
    one_class.class_labels = {0, 0, 2, 3};
    CHECK_THROWS_AS(one_class.validate(), FormatError);

    TaskDataset no_split = tiny();
    no_split.task_split.erase(1);
    CHECK_THROWS_AS(no_split.validate(), FormatError);

    TaskDataset ragged = tiny();
    ragged.task_ids.pop_back();
    CHECK_THROWS_AS(ragged.validate(), FormatError);
}

TEST_CASE("EPDS layout") {
    const auto path = temp_file("metaood_tiny.epds");
    write_epds(path, tiny());
    CHECK(fs::file_size(path) == 16 + 4 * 2 * 4 + 4 * 8);
    std::ifstream in(path, std::ios::binary);
    char head[16];
    in.read(head, 16);
    CHECK(std::string(head, 4) == "EPDS");
    CHECK(head[4] == 1);
    CHECK(head[8] == 4);
    CHECK(head[12] == 2);
    float first = 0;
    in.read(reinterpret_cast<char*>(&first), 4);
    CHECK(first == 0.5f);
    CHECK(fs::exists(manifest_path_for(path)));
    fs::remove(path);
    fs::remove(manifest_path_for(path));
}

TEST_CASE("synthetic dataset round trips bit-exactly") {
    SynthSpec spec;
    spec.n_tasks = 5;
    spec.latent_dim = 3;
    spec.noise_dims = 2;
    spec.noise_half_width = 4.0;
    spec.warp = Warp::sine;
    const SynthResult r = synth_tasks(spec, 12);
    const auto path = temp_file("metaood_synth.epds");
    write_epds(path, r.data, R"({"generator": "test"})");
    const TaskDataset back = read_epds(path);
    CHECK(back.features == r.data.features);
    CHECK(back.class_labels == r.data.class_labels);
    CHECK(back.task_ids == r.data.task_ids);
    CHECK(back.task_split == r.data.task_split);
    fs::remove(path);
    fs::remove(manifest_path_for(path));
}

TEST_CASE("malformed files are rejected") {
    const auto path = temp_file("metaood_bad.epds");
    write_epds(path, tiny());
    {
        // truncate the payload
        fs::resize_file(path, fs::file_size(path) - 4);
        CHECK_THROWS_AS(read_epds(path), FormatError);
    }
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOPE0000000000000000";
    }
    CHECK_THROWS_AS(read_epds(path), FormatError);
    write_epds(path, tiny());
    fs::remove(manifest_path_for(path));
    CHECK_THROWS_AS(read_epds(path), FormatError);
    fs::remove(path);
}

TEST_CASE("split parsing") {
    CHECK(parse_split("val") == Split::val);
    CHECK(to_string(Split::test) == "test");
    CHECK_THROWS_AS(parse_split("holdout"), FormatError);
}

}  // TEST_SUITE
