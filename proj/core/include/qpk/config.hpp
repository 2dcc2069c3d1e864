#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qpk/dsp.hpp"

namespace qpk {

/**
 * TOML-like key/value text: `[section]` headers, `key = value` lines and `#`
 * comments. Keys are addressed as "section.key". Strings may be quoted.
 */
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in);
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::optional<std::string> get(const std::string& key) const;

    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    // "lo-hi, lo-hi, ..." in Hz; every band gets order 4 unless written lo-hi/order.
    std::vector<dsp::BandpassSpec> get_bands(const std::string& key, const std::vector<dsp::BandpassSpec>& fallback) const;

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    // Throws listing any key that no getter has read.
    void reject_unknown() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

}  // namespace qpk
