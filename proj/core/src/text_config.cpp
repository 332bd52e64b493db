#include "ewmiv/text_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ewmiv/errors.hpp"

namespace ewmiv {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_quotes(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

// Split on commas that are not nested inside parentheses, so list entries
// like "uniform(0,4)" survive intact.
std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& raw, const std::string& where) {
    const std::string s = trim(strip_quotes(raw));
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw ConfigError("expected a number for " + where + ", got '" + raw + "'");
    }
    return v;
}

}  // namespace

std::string format_num(double v) {
    // Shortest representation that parses back to the same double.
    char buf[64];
    for (int prec = 12; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

TextConfig TextConfig::parse_string(const std::string& text) {
    TextConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string current;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("unterminated section header at line " + std::to_string(lineno));
            }
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty()) {
                throw ConfigError("empty section name at line " + std::to_string(lineno));
            }
            cfg.section_ref(current);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value' at line " + std::to_string(lineno) +
                              ": '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("empty key at line " + std::to_string(lineno));
        }
        if (current.empty()) {
            throw ConfigError("key '" + key + "' appears before any [section]");
        }
        cfg.section_ref(current).entries.emplace_back(key, value);
    }
    return cfg;
}

TextConfig TextConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

TextConfig::Section& TextConfig::section_ref(const std::string& name) {
    for (auto& s : sections_) {
        if (s.name == name) return s;
    }
    sections_.push_back({name, {}});
    return sections_.back();
}

const std::string* TextConfig::find(const std::string& section, const std::string& key) const {
    for (const auto& s : sections_) {
        if (s.name != section) continue;
        for (const auto& [k, v] : s.entries) {
            if (k == key) return &v;
        }
    }
    return nullptr;
}

bool TextConfig::has_section(const std::string& section) const {
    for (const auto& s : sections_) {
        if (s.name == section) return true;
    }
    return false;
}

bool TextConfig::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::vector<std::string> TextConfig::sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : sections_) {
        if (s.name == prefix ||
            (s.name.size() > prefix.size() && s.name.compare(0, prefix.size(), prefix) == 0 &&
             s.name[prefix.size()] == '.')) {
            out.push_back(s.name);
        }
    }
    return out;
}

std::vector<std::string> TextConfig::section_names() const {
    std::vector<std::string> out;
    out.reserve(sections_.size());
    for (const auto& s : sections_) out.push_back(s.name);
    return out;
}

std::vector<std::string> TextConfig::keys(const std::string& section) const {
    std::vector<std::string> out;
    for (const auto& s : sections_) {
        if (s.name != section) continue;
        for (const auto& [k, v] : s.entries) out.push_back(k);
    }
    return out;
}

std::string TextConfig::str(const std::string& section, const std::string& key) const {
    const std::string* v = find(section, key);
    if (!v) throw ConfigError("missing config entry [" + section + "] " + key);
    return strip_quotes(trim(*v));
}

std::string TextConfig::str_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? strip_quotes(trim(*v)) : fallback;
}

double TextConfig::num(const std::string& section, const std::string& key) const {
    return parse_double(str(section, key), "[" + section + "] " + key);
}

double TextConfig::num_or(const std::string& section, const std::string& key,
                          double fallback) const {
    const std::string* v = find(section, key);
    return v ? parse_double(*v, "[" + section + "] " + key) : fallback;
}

long TextConfig::integer(const std::string& section, const std::string& key) const {
    return static_cast<long>(num(section, key));
}

long TextConfig::integer_or(const std::string& section, const std::string& key,
                            long fallback) const {
    const std::string* v = find(section, key);
    return v ? static_cast<long>(parse_double(*v, "[" + section + "] " + key)) : fallback;
}

bool TextConfig::flag_or(const std::string& section, const std::string& key,
                         bool fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    const std::string s = strip_quotes(trim(*v));
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError("expected a boolean for [" + section + "] " + key + ", got '" + s + "'");
}

std::vector<double> TextConfig::num_list(const std::string& section,
                                         const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(str(section, key))) {
        out.push_back(parse_double(item, "[" + section + "] " + key));
    }
    return out;
}

std::vector<std::string> TextConfig::str_list(const std::string& section,
                                              const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& item : split_list(str(section, key))) {
        out.push_back(strip_quotes(item));
    }
    return out;
}

void TextConfig::set(const std::string& section, const std::string& key,
                     const std::string& value) {
    Section& s = section_ref(section);
    for (auto& [k, v] : s.entries) {
        if (k == key) {
            v = value;
            return;
        }
    }
    s.entries.emplace_back(key, value);
}

void TextConfig::set_num(const std::string& section, const std::string& key, double value) {
    set(section, key, format_num(value));
}

void TextConfig::set_num_list(const std::string& section, const std::string& key,
                              const std::vector<double>& values) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) joined += ", ";
        joined += format_num(values[i]);
    }
    set(section, key, joined);
}

std::string TextConfig::to_string() const {
    std::string out;
    for (const auto& s : sections_) {
        out += "[" + s.name + "]\n";
        for (const auto& [k, v] : s.entries) {
            out += k + " = " + v + "\n";
        }
        out += "\n";
    }
    return out;
}

void TextConfig::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file: " + path);
    out << to_string();
}

}  // namespace ewmiv
