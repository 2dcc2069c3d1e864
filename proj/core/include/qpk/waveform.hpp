#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qpk {

/// Absolute time as integer microseconds since the Unix epoch.
using TimeUs = std::int64_t;

constexpr TimeUs kMicrosPerSecond = 1'000'000;

inline TimeUs seconds_to_us(double s) {
    return static_cast<TimeUs>(s >= 0 ? s * 1e6 + 0.5 : s * 1e6 - 0.5);
}
inline double us_to_seconds(TimeUs us) { return static_cast<double>(us) * 1e-6; }

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

enum class Channel : std::uint8_t { E = 0, N = 1, Z = 2 };

std::string_view to_string(Channel c);

// One channel of a gapless, fixed-rate record.
struct Trace {
    std::string station_id;
    Channel channel = Channel::Z;
    double sample_rate_hz = 100.0;
    TimeUs start_us = 0;
    std::vector<double> samples;

    std::size_t size() const { return samples.size(); }

    // start + i / rate, rounded to the microsecond.
    TimeUs time_of(std::size_t i) const;

    // Index of the sample nearest to t (may be out of range).
    std::int64_t index_of(TimeUs t) const;

    TimeUs end_us() const { return time_of(samples.size()); }

    bool operator==(const Trace&) const = default;
};

/**
 * Three aligned channels (E, N, Z) of one station.
 *
 * Construction validates that the channels share station, rate, start time
 * and length; the object is immutable afterwards.
 */
class TriTrace {
public:
    TriTrace() = default;
    TriTrace(Trace e, Trace n, Trace z);
    TriTrace(std::string station, double rate_hz, TimeUs start_us,
             std::vector<double> e, std::vector<double> n, std::vector<double> z);

    const Trace& e() const { return e_; }
    const Trace& n() const { return n_; }
    const Trace& z() const { return z_; }
    const Trace& channel(Channel c) const;

    const std::string& station_id() const { return z_.station_id; }
    double sample_rate_hz() const { return z_.sample_rate_hz; }
    TimeUs start_us() const { return z_.start_us; }
    TimeUs end_us() const { return z_.end_us(); }
    std::size_t size() const { return z_.size(); }
    double duration_s() const { return static_cast<double>(size()) / sample_rate_hz(); }
    TimeUs time_of(std::size_t i) const { return z_.time_of(i); }
    std::int64_t index_of(TimeUs t) const { return z_.index_of(t); }

    // Samples [first, first + count) of all three channels.
    TriTrace slice(std::size_t first, std::size_t count) const;

    bool operator==(const TriTrace&) const = default;

private:
    Trace e_, n_, z_;
};

enum class Stage : std::uint8_t { Triggered = 0, Classified = 1, Refined = 2 };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct Pick {
    std::string station_id;
    TimeUs time_us = 0;
    double confidence = 0.0;
    Stage stage = Stage::Triggered;
    bool low_contrast = false;

    // Returns a copy at a later stage; throws on a backwards transition.
    Pick advanced(Stage next) const;

    bool operator==(const Pick&) const = default;
};

// A pick after multi-station association.
struct AssociatedPick {
    Pick pick;
    std::int64_t event_id = -1;
    int n_stations = 0;

    bool operator==(const AssociatedPick&) const = default;
};

struct Station {
    std::string station_id;
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;

    bool operator==(const Station&) const = default;
};

struct LabeledArrival {
    std::string station_id;
    TimeUs time_us = 0;

    auto operator<=>(const LabeledArrival&) const = default;
};

/// Great-circle distance in km (haversine, R = 6371 km).
double haversine_km(const Station& a, const Station& b);

/// Sort by (station, time) which is the canonical order of pick files.
void sort_picks(std::vector<Pick>& picks);

// ---- file formats ---------------------------------------------------------

enum class TraceFormat { Csv, Bin };

TraceFormat trace_format_from_path(std::string_view path);

TriTrace parse_trace(std::istream& in, TraceFormat format);
void write_trace(std::ostream& out, const TriTrace& trace, TraceFormat format);
TriTrace read_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const TriTrace& trace);

void write_picks(std::ostream& out, std::vector<Pick> picks);
void write_associated_picks(std::ostream& out, std::vector<AssociatedPick> picks);
// Reads either plain or associated pick CSV; association columns are dropped.
std::vector<Pick> read_picks(std::istream& in);

std::vector<LabeledArrival> load_labels(std::istream& in);
void write_labels(std::ostream& out, std::vector<LabeledArrival> labels);

std::vector<Station> load_stations(std::istream& in);
void write_stations(std::ostream& out, const std::vector<Station>& stations);

// File-path conveniences; throw Error when a file cannot be opened.
std::vector<Pick> read_picks_file(const std::string& path);
std::vector<LabeledArrival> load_labels_file(const std::string& path);
std::vector<Station> load_stations_file(const std::string& path);

}  // namespace qpk
