#pragma once

// Flat key/value documents: one `key = value` per line, `#` starts a comment.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "ccnet/errors.hpp"

namespace ccnet {

// Shortest round-trippable decimal form of a double.
inline std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw NumericError("FormatError", "cannot format double");
    return std::string(buf, end);
}

inline double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    auto first = text.data();
    auto last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("ParseError", "bad number for '" + std::string(what) + "': '" +
                                            std::string(text) + "'");
    return v;
}

class KvDocument {
public:
    static KvDocument parse(std::istream& in) {
        KvDocument doc;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            auto text = trim(line);
            if (text.empty()) continue;
            auto eq = text.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("ParseError", "line " + std::to_string(lineno) + ": missing '='");
            auto key = trim(text.substr(0, eq));
            auto value = trim(text.substr(eq + 1));
            if (key.empty())
                throw ConfigError("ParseError", "line " + std::to_string(lineno) + ": empty key");
            doc.entries_[std::string(key)] = std::string(value);
        }
        return doc;
    }

    static KvDocument parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static KvDocument load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("FileError", "cannot open '" + path + "'");
        return parse(in);
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    const std::string& get(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError("MissingKey", "missing key '" + key + "'");
        return it->second;
    }

    double number(const std::string& key) const { return parse_double(get(key), key); }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    std::string string_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? get(key) : fallback;
    }

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set(const std::string& key, double value) { entries_[key] = format_double(value); }

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    static std::string_view trim(std::string_view s) {
        constexpr std::string_view ws = " \t\r\n";
        auto b = s.find_first_not_of(ws);
        if (b == std::string_view::npos) return {};
        auto e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> entries_;
};

}  // namespace ccnet
