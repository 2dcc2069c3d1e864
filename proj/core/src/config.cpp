#include "qpk/config.hpp"

#include <fstream>
#include <sstream>

#include "csv_util.hpp"
#include "qpk/waveform.hpp"

namespace qpk {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw FormatError("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const std::string full = section.empty() ? key : section + "." + key;
        if (!cfg.values_.emplace(full, value).second) {
            throw FormatError("config line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
        }
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config '" + path + "'");
    return parse(in);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    used_.insert(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? detail::parse_double(*v, key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    return v ? detail::parse_int(*v, key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw FormatError("config: '" + key + "' must be true or false");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::vector<dsp::BandpassSpec> KeyValueConfig::get_bands(const std::string& key,
                                                        const std::vector<dsp::BandpassSpec>& fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::vector<dsp::BandpassSpec> bands;
    for (auto item : detail::split_csv(*v)) {
        item = trim(item);
        if (item.empty()) continue;
        int order = 4;
        if (const auto slash = item.find('/'); slash != std::string::npos) {
            order = static_cast<int>(detail::parse_int(item.substr(slash + 1), key));
            item = item.substr(0, slash);
        }
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) throw FormatError("config: band '" + item + "' in '" + key + "' must be lo-hi");
        bands.push_back({detail::parse_double(item.substr(0, dash), key), detail::parse_double(item.substr(dash + 1), key), order});
    }
    return bands;
}

void KeyValueConfig::reject_unknown() const {
    std::string unknown;
    for (const auto& [k, v] : values_) {
        if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) throw FormatError("config: unknown keys: " + unknown);
}

}  // namespace qpk
