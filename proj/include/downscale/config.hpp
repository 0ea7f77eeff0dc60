#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace downscale {

// Flat key = value configuration. Keys are lowercase words with dots,
// dashes or underscores; values are free text up to the end of line.
// '#' starts a comment; blank lines are skipped; duplicate keys are errors.
class Config {
public:
    Config() = default;

    bool has(const std::string& key) const;

    // Required accessors throw ConfigError when the key is missing or the
    // value does not parse; the defaulted forms fall back instead of
    // throwing on a missing key (but still reject malformed values).
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    std::vector<long> get_int_list(const std::string& key) const;
    std::vector<long> get_int_list(const std::string& key, const std::vector<long>& fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value);

    // Raw value without marking the key consumed (for serialization).
    const std::map<std::string, std::string>& entries() const { return entries_; }

    // Keys in sorted order.
    std::vector<std::string> keys() const;

    // Keys that were read through any accessor so far; lets callers reject
    // entries nothing consumed.
    std::vector<std::string> unused_keys() const;

private:
    const std::string* find(const std::string& key) const;

    std::map<std::string, std::string> entries_;
    mutable std::map<std::string, bool> touched_;
};

// Throws ConfigError naming the path when the file cannot be read, and the
// line number for malformed lines.
Config parse_config_file(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& origin = "<string>");

// Canonical form: keys sorted, exactly "key = value" per line, one trailing
// newline. Parsing the canonical form and re-serializing is the identity.
std::string serialize_config(const Config& cfg);

}  // namespace downscale
