#include "downscale/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "downscale/errors.hpp"

namespace downscale {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) parts.push_back(trim(item));
    if (!parts.empty() && parts.back().empty()) parts.pop_back();
    return parts;
}

long parse_long(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
    }
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + text + "' is not a number");
    }
}

}  // namespace

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

const std::string* Config::find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    touched_[key] = true;
    return &it->second;
}

std::string Config::get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw ConfigError("missing required key '" + key + "'");
    return *v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

long Config::get_int(const std::string& key) const { return parse_long(key, get_string(key)); }

long Config::get_int(const std::string& key, long fallback) const {
    const std::string* v = find(key);
    return v ? parse_long(key, *v) : fallback;
}

double Config::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    return v ? parse_double(key, *v) : fallback;
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    return find(key) ? get_bool(key) : fallback;
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
    const std::string* v = find(key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long s = std::stoull(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument(*v);
        return static_cast<std::uint64_t>(s);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + *v + "' is not a seed");
    }
}

std::vector<long> Config::get_int_list(const std::string& key) const {
    std::vector<long> out;
    for (const std::string& item : split_list(get_string(key))) {
        out.push_back(parse_long(key, item));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::vector<long> Config::get_int_list(const std::string& key,
                                       const std::vector<long>& fallback) const {
    return find(key) ? get_int_list(key) : fallback;
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& fallback) const {
    if (!find(key)) return fallback;
    std::vector<double> out;
    for (const std::string& item : split_list(get_string(key))) {
        out.push_back(parse_double(key, item));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'");
    entries_[key] = value;
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::vector<std::string> Config::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
        if (!touched_.count(k)) out.push_back(k);
    }
    return out;
}

Config parse_config_text(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_key(key)) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": invalid key '" +
                              key + "'");
        }
        if (value.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                              "' has no value");
        }
        if (cfg.has(key)) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        }
        cfg.set(key, value);
    }
    return cfg;
}

Config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::string serialize_config(const Config& cfg) {
    std::ostringstream out;
    for (const auto& [key, value] : cfg.entries()) {
        out << key << " = " << value << "\n";
    }
    return out.str();
}

}  // namespace downscale
