#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metaood/diff/matrix.hpp"
#include "metaood/error.hpp"

namespace metaood::cli {

/// Missing or unreadable input, malformed CSV.
class DataError : public Error {
public:
    using Error::Error;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

struct LabeledRows {
    diff::Matrix features;
    std::vector<std::string> labels;
};

/// CSV with a header row. `label_column` names a column holding class labels that
/// is split off from the features; empty means every column is a feature.
/// A file with only a header, or no lines at all, yields zero rows.
LabeledRows read_feature_csv(const std::filesystem::path& path, std::string_view label_column = {});

/// Two overlaid histograms on a shared axis.
std::string histogram_svg(std::span<const double> first, std::span<const double> second,
                          std::string_view first_name, std::string_view second_name, std::string_view title,
                          std::size_t bins = 30);

struct Series {
    std::string name;
    std::vector<double> values;
};

/// Line chart over x = 1..n for each series.
std::string line_chart_svg(std::span<const Series> series, std::string_view title, std::string_view x_label);

}  // namespace metaood::cli
