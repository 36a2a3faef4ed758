#pragma once

// Minimal flat TOML reader: `key = value` lines with strings, numbers,
// booleans and one-level arrays. Covers the experiment config surface; tables
// and datetimes are not needed there.

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace minitoml {

struct Value {
    std::variant<std::string, double, bool, std::vector<Value>> v;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_array() const { return std::holds_alternative<std::vector<Value>>(v); }

    const std::string& as_string() const { return std::get<std::string>(v); }
    double as_number() const { return std::get<double>(v); }
    bool as_bool() const { return std::get<bool>(v); }
    const std::vector<Value>& as_array() const { return std::get<std::vector<Value>>(v); }
};

using Table = std::map<std::string, Value>;

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline Value parse_value(const std::string& s, std::size_t& i);

inline Value parse_scalar(const std::string& s, std::size_t& i) {
    skip_ws(s, i);
    if (i >= s.size()) throw std::runtime_error("toml: missing value");
    if (s[i] == '"') {
        std::string out;
        ++i;
        while (i < s.size() && s[i] != '"') {
            if (s[i] == '\\' && i + 1 < s.size()) ++i;
            out += s[i++];
        }
        if (i >= s.size()) throw std::runtime_error("toml: unterminated string");
        ++i;
        return Value{out};
    }
    if (s.compare(i, 4, "true") == 0) { i += 4; return Value{true}; }
    if (s.compare(i, 5, "false") == 0) { i += 5; return Value{false}; }
    std::size_t j = i;
    while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '.' ||
                            s[j] == '+' || s[j] == '-' || s[j] == '_' || s[j] == 'e' ||
                            s[j] == 'E'))
        ++j;
    std::string tok = s.substr(i, j - i);
    std::erase(tok, '_');
    try {
        std::size_t used = 0;
        const double d = std::stod(tok, &used);
        if (used != tok.size()) throw std::runtime_error("");
        i = j;
        return Value{d};
    } catch (...) {
        throw std::runtime_error("toml: cannot parse value '" + tok + "'");
    }
}

inline Value parse_value(const std::string& s, std::size_t& i) {
    skip_ws(s, i);
    if (i < s.size() && s[i] == '[') {
        ++i;
        std::vector<Value> items;
        while (true) {
            skip_ws(s, i);
            if (i < s.size() && s[i] == ']') { ++i; break; }
            items.push_back(parse_value(s, i));
            skip_ws(s, i);
            if (i < s.size() && s[i] == ',') { ++i; continue; }
            if (i < s.size() && s[i] == ']') { ++i; break; }
            throw std::runtime_error("toml: malformed array");
        }
        return Value{items};
    }
    return parse_scalar(s, i);
}

}  // namespace detail

inline Table parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    Table table;
    std::string line;
    while (std::getline(f, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) {
            // keep # inside quoted strings
            bool in_str = false;
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (line[i] == '"') in_str = !in_str;
                if (line[i] == '#' && !in_str) { line.resize(i); break; }
            }
        }
        std::size_t i = 0;
        detail::skip_ws(line, i);
        if (i >= line.size() || line[i] == '\r') continue;
        if (line[i] == '[')
            throw std::runtime_error("toml: tables are not supported in this config");
        const auto eq = line.find('=', i);
        if (eq == std::string::npos) throw std::runtime_error("toml: expected key = value");
        std::string key = line.substr(i, eq - i);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        std::size_t vi = eq + 1;
        table[key] = detail::parse_value(line, vi);
    }
    return table;
}

}  // namespace minitoml
