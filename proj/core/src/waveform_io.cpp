#include "qpk/waveform.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "csv_util.hpp"

namespace qpk {

namespace {

constexpr char kTraceMagic[4] = {'Q', 'P', 'K', '1'};
constexpr std::string_view kTraceHeaderNames = "station,rate_hz,start_us";
constexpr std::string_view kTraceColumnNames = "e,n,z";

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    char buf[sizeof(T)];
    if (!in.read(buf, sizeof(T))) throw FormatError("truncated binary trace");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

TriTrace parse_trace_bin(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kTraceMagic, 4) != 0) {
        throw FormatError("malformed header: bad magic");
    }
    const auto id_len = get_le<std::uint32_t>(in);
    if (id_len > 4096) throw FormatError("malformed header: station id too long");
    std::string station(id_len, '\0');
    if (id_len > 0 && !in.read(station.data(), id_len)) throw FormatError("malformed header: truncated station id");
    const auto rate = get_le<double>(in);
    const auto start = get_le<std::int64_t>(in);
    const auto n = get_le<std::int64_t>(in);
    if (n < 0) throw FormatError("malformed header: negative sample count");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw FormatError("unsupported sample rate");

    std::vector<double> ch[3];
    for (auto& c : ch) {
        c.resize(static_cast<std::size_t>(n));
        for (auto& v : c) v = static_cast<double>(get_le<float>(in));
    }
    return TriTrace(station, rate, start, std::move(ch[0]), std::move(ch[1]), std::move(ch[2]));
}

TriTrace parse_trace_csv(std::istream& in) {
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            detail::trim_cr(line);
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw FormatError("malformed header: empty trace file");
    if (line == kTraceHeaderNames && !next_line()) throw FormatError("malformed header: missing values");
    const auto head = detail::split_csv(line);
    if (head.size() != 3) throw FormatError("malformed header: expected station,rate_hz,start_us");
    const std::string station = head[0];
    const double rate = detail::parse_double(head[1], "rate_hz");
    const TimeUs start = detail::parse_int(head[2], "start_us");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw FormatError("unsupported sample rate");

    std::vector<double> ch[3];
    bool ended[3] = {false, false, false};
    std::size_t row = 0;
    while (next_line()) {
        if (row == 0 && line == kTraceColumnNames) continue;
        ++row;
        const auto fields = detail::split_csv(line);
        if (fields.size() > 3 || fields.empty()) {
            throw FormatError("malformed row " + std::to_string(row) + ": expected e,n,z");
        }
        for (std::size_t c = 0; c < 3; ++c) {
            const bool present = c < fields.size() && !fields[c].empty();
            if (!present) {
                ended[c] = true;
                continue;
            }
            if (ended[c]) throw FormatError("channel length mismatch");
            ch[c].push_back(detail::parse_double(fields[c], "sample"));
        }
    }
    if (ch[0].size() != ch[1].size() || ch[1].size() != ch[2].size()) {
        throw FormatError("channel length mismatch");
    }
    return TriTrace(station, rate, start, std::move(ch[0]), std::move(ch[1]), std::move(ch[2]));
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw Error("cannot open '" + path + "'");
    return in;
}

void check_sink(std::ostream& out) {
    if (!out) throw Error("write failure");
}

}  // namespace

TraceFormat trace_format_from_path(std::string_view path) {
    if (path.ends_with(".bin")) return TraceFormat::Bin;
    return TraceFormat::Csv;
}

TriTrace parse_trace(std::istream& in, TraceFormat format) {
    return format == TraceFormat::Bin ? parse_trace_bin(in) : parse_trace_csv(in);
}

void write_trace(std::ostream& out, const TriTrace& trace, TraceFormat format) {
    if (format == TraceFormat::Bin) {
        out.write(kTraceMagic, 4);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(trace.station_id().size()));
        out.write(trace.station_id().data(), static_cast<std::streamsize>(trace.station_id().size()));
        put_le<double>(out, trace.sample_rate_hz());
        put_le<std::int64_t>(out, trace.start_us());
        put_le<std::int64_t>(out, static_cast<std::int64_t>(trace.size()));
        for (Channel c : {Channel::E, Channel::N, Channel::Z}) {
            for (double v : trace.channel(c).samples) put_le<float>(out, static_cast<float>(v));
        }
    } else {
        out << kTraceHeaderNames << '\n'
            << trace.station_id() << ',' << detail::format_double(trace.sample_rate_hz()) << ','
            << trace.start_us() << '\n'
            << kTraceColumnNames << '\n';
        const auto& e = trace.e().samples;
        const auto& n = trace.n().samples;
        const auto& z = trace.z().samples;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            out << detail::format_double(e[i]) << ',' << detail::format_double(n[i]) << ','
                << detail::format_double(z[i]) << '\n';
        }
    }
    check_sink(out);
}

TriTrace read_trace_file(const std::string& path) {
    const auto format = trace_format_from_path(path);
    auto in = open_in(path, format == TraceFormat::Bin ? std::ios::binary : std::ios::in);
    return parse_trace(in, format);
}

void write_trace_file(const std::string& path, const TriTrace& trace) {
    const auto format = trace_format_from_path(path);
    auto out = open_out(path, format == TraceFormat::Bin ? std::ios::binary | std::ios::out : std::ios::out);
    write_trace(out, trace, format);
}

void write_picks(std::ostream& out, std::vector<Pick> picks) {
    sort_picks(picks);
    out << "station,time_us,confidence,stage\n";
    for (const auto& p : picks) {
        out << p.station_id << ',' << p.time_us << ',' << detail::format_double(p.confidence) << ','
            << to_string(p.stage) << '\n';
    }
    check_sink(out);
}

void write_associated_picks(std::ostream& out, std::vector<AssociatedPick> picks) {
    std::stable_sort(picks.begin(), picks.end(), [](const AssociatedPick& a, const AssociatedPick& b) {
        if (a.pick.station_id != b.pick.station_id) return a.pick.station_id < b.pick.station_id;
        return a.pick.time_us < b.pick.time_us;
    });
    out << "station,time_us,confidence,stage,event_id,n_stations,low_contrast\n";
    for (const auto& a : picks) {
        const auto& p = a.pick;
        out << p.station_id << ',' << p.time_us << ',' << detail::format_double(p.confidence) << ','
            << to_string(p.stage) << ',' << a.event_id << ',' << a.n_stations << ','
            << (p.low_contrast ? 1 : 0) << '\n';
    }
    check_sink(out);
}

std::vector<Pick> read_picks(std::istream& in) {
    detail::CsvReader reader(in, {"station", "time_us", "confidence", "stage"});
    const auto low_contrast_col = reader.optional_column("low_contrast");
    std::vector<Pick> picks;
    while (reader.next()) {
        Pick p;
        p.station_id = reader.field(0);
        p.time_us = detail::parse_int(reader.field(1), "time_us");
        p.confidence = detail::parse_double(reader.field(2), "confidence");
        if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
            throw FormatError("malformed row: confidence outside [0,1]");
        }
        p.stage = stage_from_string(reader.field(3));
        if (low_contrast_col) p.low_contrast = reader.field(*low_contrast_col) == "1";
        picks.push_back(std::move(p));
    }
    return picks;
}

std::vector<LabeledArrival> load_labels(std::istream& in) {
    detail::CsvReader reader(in, {"station", "time_us"});
    std::vector<LabeledArrival> labels;
    while (reader.next()) {
        labels.push_back({reader.field(0), detail::parse_int(reader.field(1), "time_us")});
    }
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
        throw FormatError("duplicate label row");
    }
    return labels;
}

void write_labels(std::ostream& out, std::vector<LabeledArrival> labels) {
    std::sort(labels.begin(), labels.end());
    out << "station,time_us\n";
    for (const auto& l : labels) out << l.station_id << ',' << l.time_us << '\n';
    check_sink(out);
}

std::vector<Station> load_stations(std::istream& in) {
    detail::CsvReader reader(in, {"station", "lat", "lon"});
    std::vector<Station> stations;
    std::set<std::string> seen;
    while (reader.next()) {
        Station s{reader.field(0), detail::parse_double(reader.field(1), "lat"),
                  detail::parse_double(reader.field(2), "lon")};
        if (std::abs(s.latitude_deg) > 90.0 || std::abs(s.longitude_deg) > 180.0) {
            throw FormatError("station '" + s.station_id + "' has out-of-range coordinates");
        }
        if (!seen.insert(s.station_id).second) {
            throw FormatError("duplicate station id '" + s.station_id + "'");
        }
        stations.push_back(std::move(s));
    }
    return stations;
}

void write_stations(std::ostream& out, const std::vector<Station>& stations) {
    out << "station,lat,lon\n";
    for (const auto& s : stations) {
        out << s.station_id << ',' << detail::format_double(s.latitude_deg) << ','
            << detail::format_double(s.longitude_deg) << '\n';
    }
    check_sink(out);
}

std::vector<Pick> read_picks_file(const std::string& path) {
    auto in = open_in(path);
    return read_picks(in);
}

std::vector<LabeledArrival> load_labels_file(const std::string& path) {
    auto in = open_in(path);
    return load_labels(in);
}

std::vector<Station> load_stations_file(const std::string& path) {
    auto in = open_in(path);
    return load_stations(in);
}

}  // namespace qpk
