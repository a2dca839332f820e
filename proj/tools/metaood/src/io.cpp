#include "metaood_cli/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace metaood::cli {

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        std::string_view cell = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
        while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
        cells.push_back(cell);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return cells;
}

}  // namespace

LabeledRows read_feature_csv(const std::filesystem::path& path, std::string_view label_column) {
    const std::string text = read_text(path);
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = std::min(text.find('\n', pos), text.size());
        const std::string_view line(text.data() + pos, nl - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines.push_back(line);
        pos = nl + 1;
    }
    LabeledRows out;
    if (lines.empty()) return out;
    const auto header = split_csv_line(lines[0]);
    std::size_t label_at = header.size();
    if (!label_column.empty()) {
        const auto it = std::find(header.begin(), header.end(), label_column);
        if (it == header.end()) {
            throw DataError(path.string() + ": header has no '" + std::string(label_column) + "' column");
        }
        label_at = static_cast<std::size_t>(it - header.begin());
    }
    const std::size_t dim = header.size() - (label_at < header.size() ? 1 : 0);
    out.features = diff::Matrix(lines.size() - 1, dim);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_csv_line(lines[r]);
        if (cells.size() != header.size()) {
            throw DataError(path.string() + ":" + std::to_string(r + 1) + ": expected " +
                            std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
        }
        std::size_t c_out = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_at) {
                out.labels.emplace_back(cells[c]);
                continue;
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
            if (cells[c].empty() || ec != std::errc{} || ptr != cells[c].data() + cells[c].size() || !std::isfinite(v)) {
                throw DataError(path.string() + ":" + std::to_string(r + 1) + ": bad number '" +
                                std::string(cells[c]) + "'");
            }
            out.features(r - 1, c_out++) = v;
        }
    }
    return out;
}

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string frame(std::string_view title, double x0, double x1, double y0, double y1, std::string_view x_label) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                    num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + std::string(title) +
         "</text>\n";
    const double bottom = kHeight - kBottom;
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(bottom) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" +
         num(bottom) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(bottom) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(kLeft) + "\" y=\"" + num(bottom + 16) + "\" text-anchor=\"middle\">" + num(x0) + "</text>\n";
    s += "<text x=\"" + num(kWidth - kRight) + "\" y=\"" + num(bottom + 16) + "\" text-anchor=\"middle\">" + num(x1) +
         "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(bottom) + "\" text-anchor=\"end\">" + num(y0) + "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kTop + 4) + "\" text-anchor=\"end\">" + num(y1) + "</text>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         std::string(x_label) + "</text>\n";
    return s;
}

std::string legend(std::size_t i, std::string_view name) {
    const double y = kTop + 4 + 16.0 * static_cast<double>(i);
    return "<rect x=\"" + num(kWidth - kRight - 150) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           kColors[i % 4] + "\"/>\n<text x=\"" + num(kWidth - kRight - 135) + "\" y=\"" + num(y) + "\">" +
           std::string(name) + "</text>\n";
}

}  // namespace

std::string histogram_svg(std::span<const double> first, std::span<const double> second,
                          std::string_view first_name, std::string_view second_name, std::string_view title,
                          std::size_t bins) {
    double lo = INFINITY, hi = -INFINITY;
    for (auto set : {first, second}) {
        for (double v : set) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi == lo) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    auto density = [&](std::span<const double> set) {
        std::vector<double> h(bins, 0.0);
        for (double v : set) {
            const auto b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
            h[b] += 1.0 / (static_cast<double>(set.size()) * width);
        }
        return h;
    };
    const auto h1 = density(first), h2 = density(second);
    double top = 0.0;
    for (double v : h1) top = std::max(top, v);
    for (double v : h2) top = std::max(top, v);
    if (top == 0.0) top = 1.0;
    std::string s = frame(title, lo, hi, 0.0, top, "score");
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double bar = plot_w / static_cast<double>(bins);
    std::size_t series = 0;
    for (const auto* h : {&h1, &h2}) {
        for (std::size_t b = 0; b < bins; ++b) {
            const double height = (*h)[b] / top * plot_h;
            if (height <= 0.0) continue;
            s += "<rect x=\"" + num(kLeft + bar * static_cast<double>(b)) + "\" y=\"" +
                 num(kHeight - kBottom - height) + "\" width=\"" + num(bar) + "\" height=\"" + num(height) +
                 "\" fill=\"" + kColors[series] + "\" fill-opacity=\"0.5\"/>\n";
        }
        ++series;
    }
    s += legend(0, first_name) + legend(1, second_name) + "</svg>\n";
    return s;
}

std::string line_chart_svg(std::span<const Series> series, std::string_view title, std::string_view x_label) {
    std::size_t n = 1;
    double lo = INFINITY, hi = -INFINITY;
    for (const Series& s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi == lo) hi = lo + 1.0;
    std::string out = frame(title, 1.0, static_cast<double>(n), lo, hi, x_label);
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::string points;
        for (std::size_t k = 0; k < series[i].values.size(); ++k) {
            const double x = kLeft + (n == 1 ? 0.0 : plot_w * static_cast<double>(k) / static_cast<double>(n - 1));
            const double y = kHeight - kBottom - (series[i].values[k] - lo) / (hi - lo) * plot_h;
            points += num(x) + "," + num(y) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(kColors[i % 4]) + "\" stroke-width=\"1.5\" points=\"" +
               points + "\"/>\n";
        out += legend(i, series[i].name);
    }
    return out + "</svg>\n";
}

}  // namespace metaood::cli
