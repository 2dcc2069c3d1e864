#include "qpk/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "qpk/parallel.hpp"
#include "qpk/random.hpp"

namespace qpk {

namespace fs = std::filesystem;

namespace {

constexpr double kKmPerDeg = 111.195;
// Ricker amplitude is 1% of its peak this many periods before the peak.
constexpr double kRickerLead = 0.85;

double ricker(double t, double f) {
    const double u = std::numbers::pi * std::numbers::pi * f * f * t * t;
    return (1.0 - 2.0 * u) * std::exp(-u);
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    if (lo == hi) return lo;
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
}

// Pulse plus decaying multi-tone coda, zero before tau = 0.
struct Phase {
    double amp, freq, coda_ratio, coda_decay;
    std::array<double, 3> coda_freq, coda_phase;

    double operator()(double tau) const {
        if (tau < 0.0) return 0.0;
        const double shift = kRickerLead / freq;
        double v = ricker(tau - shift, freq);
        if (tau > shift) {
            const double s = tau - shift;
            double c = 0.0;
            for (int m = 0; m < 3; ++m) c += std::sin(2.0 * std::numbers::pi * coda_freq[m] * s + coda_phase[m]);
            v += coda_ratio * std::exp(-s / coda_decay) * (1.0 - std::exp(-s / 0.1)) * c / std::sqrt(3.0);
        }
        return amp * v;
    }
};

Phase make_phase(std::mt19937_64& rng, double amp, double freq, const SynthConfig& cfg) {
    Phase p{amp, freq, cfg.coda_ratio, cfg.coda_decay_s, {}, {}};
    std::uniform_real_distribution<double> spread(0.7, 1.3), phase(0.0, 2.0 * std::numbers::pi);
    for (int m = 0; m < 3; ++m) {
        p.coda_freq[m] = freq * spread(rng);
        p.coda_phase[m] = phase(rng);
    }
    return p;
}

// East/north offset in km of b relative to a (local flat approximation).
std::pair<double, double> offset_km(double lat_a, double lon_a, double lat_b, double lon_b) {
    const double mid = (lat_a + lat_b) / 2.0 * std::numbers::pi / 180.0;
    return {(lon_b - lon_a) * kKmPerDeg * std::cos(mid), (lat_b - lat_a) * kKmPerDeg};
}

std::size_t block_samples(const SynthConfig& cfg) {
    return static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
}

double max_travel_s(const SynthConfig& cfg) { return (cfg.event_radius_km + cfg.station_radius_km) / cfg.vp_km_s; }

}  // namespace

void SynthConfig::validate() const {
    if (n_stations < 1 && stations.empty()) throw Error("synth: need at least one station");
    if (n_blocks < 1) throw Error("synth: need at least one block");
    if (!(sample_rate_hz > 0.0 && duration_s > 0.0)) throw Error("synth: rate and duration must be positive");
    if (event_rate_per_hour < 0.0 || burst_rate_per_hour < 0.0) throw Error("synth: rates must not be negative");
    if (!(vp_km_s > vs_km_s && vs_km_s > 0.0)) throw Error("synth: need vp > vs > 0");
    if (!(snr_min > 0.0 && snr_max >= snr_min)) throw Error("synth: bad SNR range");
    if (!(burst_snr_min > 0.0 && burst_snr_max >= burst_snr_min)) throw Error("synth: bad burst SNR range");
    if (!(p_freq_min_hz > 0.0 && p_freq_max_hz >= p_freq_min_hz && p_freq_max_hz < sample_rate_hz / 2.0)) {
        throw Error("synth: bad wavelet frequency range");
    }
    if (!(burst_freq_min_hz > 0.0 && burst_freq_max_hz >= burst_freq_min_hz && burst_freq_max_hz < sample_rate_hz / 2.0)) {
        throw Error("synth: bad burst frequency range");
    }
    if (!(ar_coef >= 0.0 && ar_coef < 1.0)) throw Error("synth: ar_coef must lie in [0, 1)");
    if (!(noise_sigma >= 0.0 && ref_distance_km > 0.0 && coda_decay_s > 0.0 && burst_decay_s > 0.0)) {
        throw Error("synth: noise, distances and decays must be positive");
    }
    if (duration_s <= lead_s + tail_s + max_travel_s(*this)) {
        throw Error("synth: block too short for lead, tail and travel times");
    }
}

SynthConfig SynthConfig::regime_b() {
    SynthConfig c;
    c.ar_coef = 0.8;
    c.p_freq_min_hz = 2.0;
    c.p_freq_max_hz = 8.0;
    c.burst_freq_min_hz = 3.0;
    c.burst_freq_max_hz = 15.0;
    return c;
}

SynthConfig synth_config_from(const KeyValueConfig& kv) {
    const auto regime = kv.get_string("synth.regime", "A");
    if (regime != "A" && regime != "B") throw FormatError("synth: regime must be A or B");
    SynthConfig c = regime == "B" ? SynthConfig::regime_b() : SynthConfig{};
    c.n_stations = static_cast<int>(kv.get_int("synth.n_stations", c.n_stations));
    c.centre_lat_deg = kv.get_double("synth.centre_lat_deg", c.centre_lat_deg);
    c.centre_lon_deg = kv.get_double("synth.centre_lon_deg", c.centre_lon_deg);
    c.station_radius_km = kv.get_double("synth.station_radius_km", c.station_radius_km);
    c.n_blocks = static_cast<int>(kv.get_int("synth.n_blocks", c.n_blocks));
    c.duration_s = kv.get_double("synth.duration_s", c.duration_s);
    c.sample_rate_hz = kv.get_double("synth.sample_rate_hz", c.sample_rate_hz);
    c.start_us = kv.get_int("synth.start_us", c.start_us);
    c.lead_s = kv.get_double("synth.lead_s", c.lead_s);
    c.tail_s = kv.get_double("synth.tail_s", c.tail_s);
    c.event_rate_per_hour = kv.get_double("synth.event_rate_per_hour", c.event_rate_per_hour);
    c.event_radius_km = kv.get_double("synth.event_radius_km", c.event_radius_km);
    c.snr_min = kv.get_double("synth.snr_min", c.snr_min);
    c.snr_max = kv.get_double("synth.snr_max", c.snr_max);
    c.ref_distance_km = kv.get_double("synth.ref_distance_km", c.ref_distance_km);
    c.p_freq_min_hz = kv.get_double("synth.p_freq_min_hz", c.p_freq_min_hz);
    c.p_freq_max_hz = kv.get_double("synth.p_freq_max_hz", c.p_freq_max_hz);
    c.vp_km_s = kv.get_double("synth.vp_km_s", c.vp_km_s);
    c.vs_km_s = kv.get_double("synth.vs_km_s", c.vs_km_s);
    c.s_to_p_ratio = kv.get_double("synth.s_to_p_ratio", c.s_to_p_ratio);
    c.coda_ratio = kv.get_double("synth.coda_ratio", c.coda_ratio);
    c.coda_decay_s = kv.get_double("synth.coda_decay_s", c.coda_decay_s);
    c.noise_sigma = kv.get_double("synth.noise_sigma", c.noise_sigma);
    c.ar_coef = kv.get_double("synth.ar_coef", c.ar_coef);
    c.burst_rate_per_hour = kv.get_double("synth.burst_rate_per_hour", c.burst_rate_per_hour);
    c.burst_snr_min = kv.get_double("synth.burst_snr_min", c.burst_snr_min);
    c.burst_snr_max = kv.get_double("synth.burst_snr_max", c.burst_snr_max);
    c.burst_freq_min_hz = kv.get_double("synth.burst_freq_min_hz", c.burst_freq_min_hz);
    c.burst_freq_max_hz = kv.get_double("synth.burst_freq_max_hz", c.burst_freq_max_hz);
    c.burst_decay_s = kv.get_double("synth.burst_decay_s", c.burst_decay_s);
    c.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", static_cast<long long>(c.seed)));
    kv.reject_unknown();
    c.validate();
    return c;
}

SynthConfig load_synth_config(const std::string& path) { return synth_config_from(KeyValueConfig::parse_file(path)); }

std::vector<Station> synth_stations(const SynthConfig& cfg) {
    if (!cfg.stations.empty()) return cfg.stations;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x57a7));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Station> out;
    for (int i = 0; i < cfg.n_stations; ++i) {
        const double r = cfg.station_radius_km * std::sqrt(u(rng));
        const double th = 2.0 * std::numbers::pi * u(rng);
        const double lat = cfg.centre_lat_deg + r * std::sin(th) / kKmPerDeg;
        const double lon = cfg.centre_lon_deg + r * std::cos(th) / (kKmPerDeg * std::cos(lat * std::numbers::pi / 180.0));
        char id[16];
        std::snprintf(id, sizeof(id), "ST%02d", i + 1);
        out.push_back({id, lat, lon});
    }
    return out;
}

double p_travel_time_s(const SynthConfig& cfg, const SynthEvent& ev, const Station& st) {
    const double d = std::max(1.0, haversine_km({"", ev.lat_deg, ev.lon_deg}, st));
    return d / cfg.vp_km_s;
}

EventRecord gen_event(const SynthConfig& cfg, const SynthEvent& ev, const std::vector<Station>& stations,
                      TimeUs block_start_us) {
    EventRecord rec;
    const double rate = cfg.sample_rate_hz;
    const Trace clock{"", Channel::Z, rate, block_start_us, {}};
    for (std::size_t k = 0; k < stations.size(); ++k) {
        const auto& st = stations[k];
        std::mt19937_64 rng(derive_seed(ev.seed, k));
        const double d = std::max(1.0, haversine_km({"", ev.lat_deg, ev.lon_deg}, st));
        const TimeUs onset = ev.origin_us + seconds_to_us(d / cfg.vp_km_s);
        const double s_lag = d * (1.0 / cfg.vs_km_s - 1.0 / cfg.vp_km_s);
        const double amp = cfg.noise_sigma * ev.snr * cfg.ref_distance_km / d;
        const auto [dx, dy] = offset_km(st.latitude_deg, st.longitude_deg, ev.lat_deg, ev.lon_deg);
        const double baz = std::atan2(dx, dy);

        const Phase p = make_phase(rng, amp, ev.p_freq_hz, cfg);
        const Phase s = make_phase(rng, amp * cfg.s_to_p_ratio, 0.6 * ev.p_freq_hz, cfg);
        const double h = 0.35;

        EventSignal sig;
        sig.station_id = st.station_id;
        sig.snr = ev.snr * cfg.ref_distance_km / d;
        sig.first_index = clock.index_of(onset);
        if (clock.time_of(static_cast<std::size_t>(std::max<std::int64_t>(sig.first_index, 0))) < onset) ++sig.first_index;
        const double span_s = s_lag + kRickerLead / (0.6 * ev.p_freq_hz) + 8.0 * cfg.coda_decay_s + 1.0;
        const auto len = static_cast<std::size_t>(std::ceil(span_s * rate));
        sig.e.resize(len);
        sig.n.resize(len);
        sig.z.resize(len);
        for (std::size_t i = 0; i < len; ++i) {
            const auto idx = sig.first_index + static_cast<std::int64_t>(i);
            const double tau = us_to_seconds(block_start_us - onset) + static_cast<double>(idx) / rate;
            const double vp = p(tau), vs = s(tau - s_lag);
            sig.z[i] = vp + 0.2 * vs;
            sig.e[i] = h * std::sin(baz) * vp + std::cos(baz) * vs;
            sig.n[i] = h * std::cos(baz) * vp - std::sin(baz) * vs;
        }
        rec.signals.push_back(std::move(sig));
        rec.labels.push_back({st.station_id, onset});
    }
    return rec;
}

std::vector<LabeledArrival> Corpus::all_labels() const {
    std::vector<LabeledArrival> out;
    for (const auto& b : blocks) out.insert(out.end(), b.labels.begin(), b.labels.end());
    std::sort(out.begin(), out.end());
    return out;
}

Corpus gen_corpus(const SynthConfig& cfg, std::size_t workers) {
    cfg.validate();
    Corpus corpus;
    corpus.stations = synth_stations(cfg);
    const auto n = block_samples(cfg);
    const auto hours = cfg.duration_s / 3600.0;

    for (int b = 0; b < cfg.n_blocks; ++b) {
        const TimeUs block_start = cfg.start_us + seconds_to_us(cfg.duration_s * b);
        std::mt19937_64 rng(derive_seed(cfg.seed, 0xb10c0000ULL + static_cast<std::uint64_t>(b)));
        std::uniform_real_distribution<double> u(0.0, 1.0);

        const double lambda = cfg.event_rate_per_hour * hours;
        const long count = lambda > 0.0 ? std::poisson_distribution<long>(lambda)(rng) : 0;
        std::vector<EventRecord> events;
        for (long i = 0; i < count; ++i) {
            SynthEvent ev;
            const double r = cfg.event_radius_km * std::sqrt(u(rng));
            const double th = 2.0 * std::numbers::pi * u(rng);
            ev.lat_deg = cfg.centre_lat_deg + r * std::sin(th) / kKmPerDeg;
            ev.lon_deg = cfg.centre_lon_deg + r * std::cos(th) / (kKmPerDeg * std::cos(ev.lat_deg * std::numbers::pi / 180.0));
            ev.snr = log_uniform(rng, cfg.snr_min, cfg.snr_max);
            ev.p_freq_hz = std::uniform_real_distribution<double>(cfg.p_freq_min_hz, cfg.p_freq_max_hz)(rng);
            double tmin = 1e300, tmax = 0.0;
            for (const auto& st : corpus.stations) {
                const double tt = p_travel_time_s(cfg, ev, st);
                tmin = std::min(tmin, tt);
                tmax = std::max(tmax, tt);
            }
            const double lo = cfg.lead_s - tmin, hi = cfg.duration_s - cfg.tail_s - tmax;
            ev.origin_us = block_start + seconds_to_us(std::uniform_real_distribution<double>(lo, hi)(rng));
            ev.seed = rng();
            events.push_back(gen_event(cfg, ev, corpus.stations, block_start));
        }

        Block block;
        block.tag = b;
        for (const auto& e : events) block.labels.insert(block.labels.end(), e.labels.begin(), e.labels.end());
        std::sort(block.labels.begin(), block.labels.end());

        block.streams.resize(corpus.stations.size());
        parallel_for(corpus.stations.size(), workers, [&](std::size_t k) {
            std::mt19937_64 srng(derive_seed(cfg.seed, (static_cast<std::uint64_t>(b) << 20) + 0x1000 + k));
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::array<std::vector<double>, 3> ch;
            const double innov = std::sqrt(1.0 - cfg.ar_coef * cfg.ar_coef);
            for (auto& c : ch) {
                c.resize(n);
                double prev = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double w = cfg.noise_sigma * gauss(srng);
                    prev = i == 0 ? w : cfg.ar_coef * prev + innov * w;
                    c[i] = prev;
                }
            }

            // Single-station impulsive bursts.
            const double blambda = cfg.burst_rate_per_hour * hours;
            const long bursts = blambda > 0.0 ? std::poisson_distribution<long>(blambda)(srng) : 0;
            std::uniform_real_distribution<double> bu(0.0, 1.0);
            for (long j = 0; j < bursts; ++j) {
                const double t0 = bu(srng) * cfg.duration_s;
                const double amp = cfg.noise_sigma * log_uniform(srng, cfg.burst_snr_min, cfg.burst_snr_max);
                const double f = cfg.burst_freq_min_hz + bu(srng) * (cfg.burst_freq_max_hz - cfg.burst_freq_min_hz);
                const std::array<double, 3> w{bu(srng) - 0.5, bu(srng) - 0.5, 1.0};
                const auto first = static_cast<std::size_t>(std::ceil(t0 * cfg.sample_rate_hz));
                const auto len = static_cast<std::size_t>(std::ceil(8.0 * cfg.burst_decay_s * cfg.sample_rate_hz));
                for (std::size_t i = first; i < std::min(n, first + len); ++i) {
                    const double tau = static_cast<double>(i) / cfg.sample_rate_hz - t0;
                    const double v = amp * std::sin(2.0 * std::numbers::pi * f * tau) * std::exp(-tau / cfg.burst_decay_s);
                    for (int c = 0; c < 3; ++c) ch[c][i] += w[c] * v;
                }
            }

            for (const auto& e : events) {
                const auto& sig = e.signals[k];
                for (std::size_t i = 0; i < sig.z.size(); ++i) {
                    const auto idx = sig.first_index + static_cast<std::int64_t>(i);
                    if (idx < 0 || idx >= static_cast<std::int64_t>(n)) continue;
                    const auto at = static_cast<std::size_t>(idx);
                    ch[0][at] += sig.e[i];
                    ch[1][at] += sig.n[i];
                    ch[2][at] += sig.z[i];
                }
            }
            block.streams[k] = TriTrace(corpus.stations[k].station_id, cfg.sample_rate_hz, block_start, std::move(ch[0]),
                                        std::move(ch[1]), std::move(ch[2]));
        });
        corpus.blocks.push_back(std::move(block));
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& out_dir, TraceFormat format) {
    fs::create_directories(out_dir);
    const auto open = [](const fs::path& p) {
        std::ofstream out(p);
        if (!out) throw Error("cannot open '" + p.string() + "' for writing");
        return out;
    };
    {
        auto out = open(fs::path(out_dir) / "stations.csv");
        write_stations(out, corpus.stations);
    }
    {
        auto out = open(fs::path(out_dir) / "labels.csv");
        write_labels(out, corpus.all_labels());
    }
    const char* ext = format == TraceFormat::Bin ? ".bin" : ".csv";
    for (const auto& b : corpus.blocks) {
        const auto dir = fs::path(out_dir) / ("block" + std::to_string(b.tag));
        fs::create_directories(dir);
        for (const auto& s : b.streams) write_trace_file((dir / (s.station_id() + ext)).string(), s);
        auto out = open(dir / "labels.csv");
        write_labels(out, b.labels);
    }
}

Corpus read_corpus(const std::string& dir) {
    Corpus c;
    c.stations = load_stations_file((fs::path(dir) / "stations.csv").string());
    std::vector<std::pair<int, fs::path>> blocks;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && name.rfind("block", 0) == 0) blocks.emplace_back(std::stoi(name.substr(5)), entry.path());
    }
    std::sort(blocks.begin(), blocks.end());
    for (const auto& [tag, path] : blocks) {
        Block b;
        b.tag = tag;
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            const auto ext = entry.path().extension().string();
            if (entry.path().filename() != "labels.csv" && (ext == ".bin" || ext == ".csv")) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) b.streams.push_back(read_trace_file(f.string()));
        b.labels = load_labels_file((path / "labels.csv").string());
        c.blocks.push_back(std::move(b));
    }
    return c;
}

}  // namespace qpk
