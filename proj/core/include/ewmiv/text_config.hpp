#ifndef EWMIV_TEXT_CONFIG_HPP
#define EWMIV_TEXT_CONFIG_HPP

#include <string>
#include <utility>
#include <vector>

namespace ewmiv {

/**
 * Structured text configuration: `[section]` / `[section.subsection]`
 * headers followed by `key = value` lines. `#` starts a comment. Values are
 * scalars or comma-separated lists; strings may be double-quoted. Section
 * and key order is preserved so a round-trip is byte-stable.
 */
class TextConfig {
public:
    static TextConfig parse_file(const std::string& path);
    static TextConfig parse_string(const std::string& text);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    /// Sections whose name equals `prefix` or starts with `prefix.`.
    std::vector<std::string> sections_with_prefix(const std::string& prefix) const;
    std::vector<std::string> section_names() const;
    std::vector<std::string> keys(const std::string& section) const;

    std::string str(const std::string& section, const std::string& key) const;
    std::string str_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double num(const std::string& section, const std::string& key) const;
    double num_or(const std::string& section, const std::string& key, double fallback) const;
    long integer(const std::string& section, const std::string& key) const;
    long integer_or(const std::string& section, const std::string& key, long fallback) const;
    bool flag_or(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> num_list(const std::string& section, const std::string& key) const;
    std::vector<std::string> str_list(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_num(const std::string& section, const std::string& key, double value);
    void set_num_list(const std::string& section, const std::string& key,
                      const std::vector<double>& values);

    std::string to_string() const;
    void write_file(const std::string& path) const;

private:
    struct Section {
        std::string name;
        std::vector<std::pair<std::string, std::string>> entries;
    };
    const std::string* find(const std::string& section, const std::string& key) const;
    Section& section_ref(const std::string& name);

    std::vector<Section> sections_;
};

/// Fixed-format float printing shared by all writers ("%.12g").
std::string format_num(double v);

}  // namespace ewmiv

#endif
