#pragma once

// Minimal CSV helpers shared by the file readers. No quoting support: none of
// the formats carry commas inside fields.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qpk/waveform.hpp"

namespace qpk::detail {

inline void trim_cr(std::string& line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
}

inline std::vector<std::string> split_csv(std::string_view line, char delim = ',') {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(delim, pos);
        out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::string_view what) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError("malformed row: bad " + std::string(what) + " '" + std::string(s) + "'");
    }
    return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError("malformed row: bad " + std::string(what) + " '" + std::string(s) + "'");
    }
    return v;
}

// Shortest representation that round-trips.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

class CsvReader {
public:
    // The header must begin with `required`, in that order.
    CsvReader(std::istream& in, std::vector<std::string> required) : in_(in) {
        std::string line;
        if (!read_line(line)) throw FormatError("malformed header: empty file");
        header_ = split_csv(line);
        if (header_.size() < required.size()) throw FormatError("malformed header: '" + line + "'");
        for (std::size_t i = 0; i < required.size(); ++i) {
            if (header_[i] != required[i]) {
                throw FormatError("malformed header: expected column '" + required[i] + "'");
            }
        }
    }

    std::optional<std::size_t> optional_column(std::string_view name) const {
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (header_[i] == name) return i;
        }
        return std::nullopt;
    }

    const std::vector<std::string>& header() const { return header_; }

    bool next() {
        std::string line;
        if (!read_line(line)) return false;
        ++row_;
        fields_ = split_csv(line);
        if (fields_.size() != header_.size()) {
            throw FormatError("malformed row " + std::to_string(row_) + ": expected " +
                              std::to_string(header_.size()) + " fields");
        }
        return true;
    }

    const std::string& field(std::size_t i) const { return fields_.at(i); }
    const std::vector<std::string>& fields() const { return fields_; }

private:
    bool read_line(std::string& line) {
        while (std::getline(in_, line)) {
            trim_cr(line);
            if (!line.empty()) return true;
        }
        return false;
    }

    std::istream& in_;
    std::vector<std::string> header_;
    std::vector<std::string> fields_;
    std::size_t row_ = 0;
};

}  // namespace qpk::detail
