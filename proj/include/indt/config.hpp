#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "indt/core.hpp"
#include "indt/store.hpp"

namespace indt {

/// Flat key=value configuration. Keys match long command-line flag names;
/// '#' starts a comment line.
struct RunConfig {
    std::vector<std::pair<std::string, std::string>> entries;  // file order

    [[nodiscard]] const std::string* find(std::string_view key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses config text; every key must be in `known`.
inline RunConfig parse_run_config(std::string_view text, const std::string& name, const std::set<std::string>& known) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::size_t ln = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        std::string_view raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++ln;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const auto line = detail::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const std::string ctx = name + ":" + std::to_string(ln) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ValidationError(ctx + "expected key=value");
        std::string key(detail::trim(line.substr(0, eq)));
        std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty()) throw ValidationError(ctx + "empty key");
        if (!known.count(key)) throw ValidationError(ctx + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ValidationError(ctx + "duplicate key '" + key + "'");
        cfg.entries.emplace_back(std::move(key), std::move(value));
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::set<std::string>& known) {
    return parse_run_config(csv::slurp(path), path.string(), known);
}

}  // namespace indt
