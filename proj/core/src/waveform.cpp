#include "qpk/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qpk {

std::string_view to_string(Channel c) {
    switch (c) {
        case Channel::E: return "E";
        case Channel::N: return "N";
        case Channel::Z: return "Z";
    }
    return "?";
}

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Triggered: return "Triggered";
        case Stage::Classified: return "Classified";
        case Stage::Refined: return "Refined";
    }
    return "?";
}

Stage stage_from_string(std::string_view s) {
    if (s == "Triggered") return Stage::Triggered;
    if (s == "Classified") return Stage::Classified;
    if (s == "Refined") return Stage::Refined;
    throw FormatError("unknown pick stage '" + std::string(s) + "'");
}

TimeUs Trace::time_of(std::size_t i) const {
    const double offset = static_cast<double>(i) * (1e6 / sample_rate_hz);
    return start_us + static_cast<TimeUs>(std::llround(offset));
}

std::int64_t Trace::index_of(TimeUs t) const {
    const double idx = static_cast<double>(t - start_us) * sample_rate_hz * 1e-6;
    return static_cast<std::int64_t>(std::llround(idx));
}

namespace {

void validate_rate(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw FormatError("unsupported sample rate");
    }
}

}  // namespace

TriTrace::TriTrace(Trace e, Trace n, Trace z) : e_(std::move(e)), n_(std::move(n)), z_(std::move(z)) {
    validate_rate(z_.sample_rate_hz);
    if (e_.channel != Channel::E || n_.channel != Channel::N || z_.channel != Channel::Z) {
        throw FormatError("channels must be ordered E, N, Z");
    }
    for (const Trace* t : {&e_, &n_}) {
        if (t->station_id != z_.station_id) throw FormatError("station mismatch between channels");
        if (t->sample_rate_hz != z_.sample_rate_hz) throw FormatError("sample rate mismatch between channels");
        if (t->start_us != z_.start_us) throw FormatError("start time mismatch between channels");
        if (t->samples.size() != z_.samples.size()) throw FormatError("channel length mismatch");
    }
}

TriTrace::TriTrace(std::string station, double rate_hz, TimeUs start_us, std::vector<double> e,
                   std::vector<double> n, std::vector<double> z)
    : TriTrace(Trace{station, Channel::E, rate_hz, start_us, std::move(e)},
               Trace{station, Channel::N, rate_hz, start_us, std::move(n)},
               Trace{station, Channel::Z, rate_hz, start_us, std::move(z)}) {}

const Trace& TriTrace::channel(Channel c) const {
    switch (c) {
        case Channel::E: return e_;
        case Channel::N: return n_;
        case Channel::Z: return z_;
    }
    return z_;
}

TriTrace TriTrace::slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw Error("slice out of range");
    auto cut = [&](const Trace& t) {
        Trace out{t.station_id, t.channel, t.sample_rate_hz, t.time_of(first), {}};
        out.samples.assign(t.samples.begin() + static_cast<std::ptrdiff_t>(first),
                           t.samples.begin() + static_cast<std::ptrdiff_t>(first + count));
        return out;
    };
    return TriTrace(cut(e_), cut(n_), cut(z_));
}

Pick Pick::advanced(Stage next) const {
    if (static_cast<int>(next) < static_cast<int>(stage)) {
        throw Error("pick stage cannot move backwards");
    }
    Pick p = *this;
    p.stage = next;
    return p;
}

double haversine_km(const Station& a, const Station& b) {
    constexpr double kEarthRadiusKm = 6371.0;
    constexpr double kDeg = std::numbers::pi / 180.0;
    const double lat1 = a.latitude_deg * kDeg;
    const double lat2 = b.latitude_deg * kDeg;
    const double dlat = lat2 - lat1;
    const double dlon = (b.longitude_deg - a.longitude_deg) * kDeg;
    const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

void sort_picks(std::vector<Pick>& picks) {
    std::stable_sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
        if (a.station_id != b.station_id) return a.station_id < b.station_id;
        return a.time_us < b.time_us;
    });
}

}  // namespace qpk
