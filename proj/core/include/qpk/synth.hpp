#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpk/config.hpp"
#include "qpk/evaluation.hpp"
#include "qpk/waveform.hpp"

namespace qpk {

struct SynthConfig {
    // Stations are scattered uniformly in a disc around the centre unless given.
    int n_stations = 3;
    std::vector<Station> stations;
    double centre_lat_deg = 31.0;
    double centre_lon_deg = 103.4;
    double station_radius_km = 30.0;

    int n_blocks = 1;
    double duration_s = 600.0;  // per block
    double sample_rate_hz = 100.0;
    TimeUs start_us = 1'212'278'400'000'000;  // blocks follow each other without gaps
    // Onsets keep this much data before and after them on every station.
    double lead_s = 15.0;
    double tail_s = 25.0;

    double event_rate_per_hour = 12.0;
    double event_radius_km = 40.0;
    double snr_min = 1.0;  // peak P amplitude / noise sigma at ref_distance_km, log-uniform
    double snr_max = 30.0;
    double ref_distance_km = 30.0;
    double p_freq_min_hz = 3.0;
    double p_freq_max_hz = 15.0;
    double vp_km_s = 5.5;
    double vs_km_s = 3.2;
    double s_to_p_ratio = 2.0;
    double coda_ratio = 0.3;
    double coda_decay_s = 1.5;

    double noise_sigma = 1.0;
    double ar_coef = 0.0;  // AR(1) colouring, variance preserved
    double burst_rate_per_hour = 0.0;  // per station
    double burst_snr_min = 5.0;
    double burst_snr_max = 40.0;
    double burst_freq_min_hz = 5.0;
    double burst_freq_max_hz = 25.0;
    double burst_decay_s = 0.15;

    std::uint64_t seed = 1;

    void validate() const;
    // Different noise colour and a lower wavelet band, for transfer tests.
    static SynthConfig regime_b();
};

/**
 * Keys (all optional) under [synth]: n_stations, n_blocks, duration_s,
 * sample_rate_hz, event_rate_per_hour, snr_min, snr_max, ..., seed, and
 * regime = "A" | "B" which picks the base profile before overrides.
 */
SynthConfig synth_config_from(const KeyValueConfig& kv);
SynthConfig load_synth_config(const std::string& path);

struct SynthEvent {
    TimeUs origin_us = 0;
    double lat_deg = 0.0;
    double lon_deg = 0.0;
    double snr = 10.0;       // at ref_distance_km
    double p_freq_hz = 8.0;
    std::uint64_t seed = 0;  // wavelet details
};

// Signal contribution of one event on one station, starting at first_index.
struct EventSignal {
    std::string station_id;
    std::int64_t first_index = 0;
    double snr = 0.0;  // peak P amplitude over noise sigma at this station
    std::vector<double> e, n, z;
};

struct EventRecord {
    std::vector<EventSignal> signals;
    std::vector<LabeledArrival> labels;  // one P onset per station
};

// P onset = origin + D / vp on every station; S follows at D (1/vs - 1/vp).
EventRecord gen_event(const SynthConfig& cfg, const SynthEvent& ev, const std::vector<Station>& stations,
                      TimeUs block_start_us);

double p_travel_time_s(const SynthConfig& cfg, const SynthEvent& ev, const Station& st);

struct Corpus {
    std::vector<Station> stations;
    std::vector<Block> blocks;

    std::vector<LabeledArrival> all_labels() const;
};

std::vector<Station> synth_stations(const SynthConfig& cfg);
Corpus gen_corpus(const SynthConfig& cfg, std::size_t workers = 1);

/**
 * Writes stations.csv, labels.csv and per block block<tag>/<station>.<ext>
 * plus block<tag>/labels.csv.
 */
void write_corpus(const Corpus& corpus, const std::string& out_dir, TraceFormat format = TraceFormat::Bin);
Corpus read_corpus(const std::string& dir);

}  // namespace qpk
