#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "metaood/error.hpp"

namespace metaood::cli {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Allowed keys per section.
using Schema = std::map<std::string, std::set<std::string>>;

/// Flat `key = value` file with `[section]` headers. `#` and `;` start comments.
///
/// Every typed read is recorded, default or not, so `resolved_text()` lists the
/// exact settings a run used.
class Config {
public:
    explicit Config(Schema schema) : schema_(std::move(schema)) {}

    static Config parse(std::string_view text, Schema schema, const std::string& origin = "<config>");
    static Config load(const std::filesystem::path& path, Schema schema);

    /// `section.key=value`
    void apply_override(std::string_view assignment);
    void set(const std::string& section, const std::string& key, const std::string& value);

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback);
    std::string require_string(const std::string& section, const std::string& key);
    std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback);
    std::size_t get_count(const std::string& section, const std::string& key, std::size_t fallback);
    double get_double(const std::string& section, const std::string& key, double fallback);
    bool get_bool(const std::string& section, const std::string& key, bool fallback);
    std::vector<std::size_t> get_count_list(const std::string& section, const std::string& key,
                                            const std::vector<std::size_t>& fallback);

    /// Canonical INI text of every value read so far, sorted by section and key.
    std::string resolved_text() const;

private:
    void check_key(const std::string& section, const std::string& key) const;
    std::string raw(const std::string& section, const std::string& key) const;
    void record(const std::string& section, const std::string& key, const std::string& value);

    Schema schema_;
    std::map<std::string, std::map<std::string, std::string>> values_;
    std::map<std::string, std::map<std::string, std::string>> resolved_;
};

}  // namespace metaood::cli
