#include "metaood_cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace metaood::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

}  // namespace

Config Config::parse(std::string_view text, Schema schema, const std::string& origin) {
    Config cfg(std::move(schema));
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
        line = trim(line);
        if (line.empty()) continue;
        const std::string at = origin + ":" + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(at + "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!cfg.schema_.contains(section)) throw ConfigError(at + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(at + "expected key = value");
        if (section.empty()) throw ConfigError(at + "key outside of any section");
        const std::string key(trim(line.substr(0, eq)));
        try {
            cfg.set(section, key, std::string(trim(line.substr(eq + 1))));
        } catch (const ConfigError& e) {
            throw ConfigError(at + e.what());
        }
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path, Schema schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), std::move(schema), path.string());
}

void Config::check_key(const std::string& section, const std::string& key) const {
    const auto it = schema_.find(section);
    if (it == schema_.end()) throw ConfigError("unknown section [" + section + "]");
    if (!it->second.contains(key)) throw ConfigError("unknown key " + where(section, key));
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    check_key(section, key);
    values_[section][key] = value;
}

void Config::apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
        throw ConfigError("override must look like section.key=value, got '" + std::string(assignment) + "'");
    }
    set(std::string(trim(assignment.substr(0, dot))), std::string(trim(assignment.substr(dot + 1, eq - dot - 1))),
        std::string(trim(assignment.substr(eq + 1))));
}

bool Config::has(const std::string& section, const std::string& key) const {
    const auto it = values_.find(section);
    return it != values_.end() && it->second.contains(key);
}

std::string Config::raw(const std::string& section, const std::string& key) const {
    return values_.at(section).at(key);
}

void Config::record(const std::string& section, const std::string& key, const std::string& value) {
    check_key(section, key);
    resolved_[section][key] = value;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) {
    const std::string v = has(section, key) ? raw(section, key) : fallback;
    record(section, key, v);
    return v;
}

std::string Config::require_string(const std::string& section, const std::string& key) {
    if (!has(section, key) || raw(section, key).empty()) throw ConfigError("missing required " + where(section, key));
    return get_string(section, key, "");
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) {
    if (!has(section, key)) {
        record(section, key, std::to_string(fallback));
        return fallback;
    }
    const std::string v = raw(section, key);
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(where(section, key) + ": expected an integer, got '" + v + "'");
    }
    record(section, key, v);
    return out;
}

std::size_t Config::get_count(const std::string& section, const std::string& key, std::size_t fallback) {
    const std::int64_t v = get_int(section, key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(where(section, key) + ": must be non-negative");
    return static_cast<std::size_t>(v);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) {
    if (!has(section, key)) {
        char buf[32];
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, fallback);
        record(section, key, std::string(buf, end));
        return fallback;
    }
    const std::string v = raw(section, key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(where(section, key) + ": expected a number, got '" + v + "'");
    }
    record(section, key, v);
    return out;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) {
    if (!has(section, key)) {
        record(section, key, fallback ? "true" : "false");
        return fallback;
    }
    const std::string v = raw(section, key);
    bool out;
    if (v == "true" || v == "1" || v == "yes") out = true;
    else if (v == "false" || v == "0" || v == "no") out = false;
    else throw ConfigError(where(section, key) + ": expected true or false, got '" + v + "'");
    record(section, key, out ? "true" : "false");
    return out;
}

std::vector<std::size_t> Config::get_count_list(const std::string& section, const std::string& key,
                                                const std::vector<std::size_t>& fallback) {
    std::vector<std::size_t> out;
    std::string text;
    if (!has(section, key)) {
        out = fallback;
        for (std::size_t i = 0; i < out.size(); ++i) text += (i ? "," : "") + std::to_string(out[i]);
    } else {
        text = raw(section, key);
        std::string_view rest = text;
        while (!trim(rest).empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = trim(rest.substr(0, comma));
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size() || v == 0) {
                throw ConfigError(where(section, key) + ": expected a comma-separated list of positive integers");
            }
            out.push_back(v);
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }
    record(section, key, text);
    return out;
}

std::string Config::resolved_text() const {
    std::string out;
    for (const auto& [section, keys] : resolved_) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
        out += "\n";
    }
    return out;
}

}  // namespace metaood::cli
