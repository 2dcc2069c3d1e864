#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "qpk/dsp.hpp"
#include "qpk/waveform.hpp"

namespace qpk {

struct TriggerConfig {
    std::vector<dsp::BandpassSpec> bands = {{2.5, 5.0, 4}, {5.0, 10.0, 4}, {10.0, 20.0, 4}};
    double s1 = 6.0;             // CF threshold at the trigger sample
    double s2 = 2.0;             // mean CF threshold over (t, t + t_up]
    double t_up_s = 0.3;
    double lta_decay_s = 10.0;   // time constant of the background statistics
    double refractory_s = 1.0;

    void validate() const;
};

/**
 * Streaming multi-band characteristic function.
 *
 * For every band the squared filtered signal e is standardised against
 * exponentially decaying estimates of its mean and standard deviation taken
 * *before* the current sample; the CF is the maximum over bands. The first
 * lta_decay_s seconds are a warm-up during which the CF is held at 0 while
 * the statistics settle.
 */
class CharacteristicFunction {
public:
    CharacteristicFunction(const TriggerConfig& cfg, double rate_hz);

    double next(double z);

private:
    struct Band {
        dsp::BandpassFilter filter;
        double mean = 0.0;
        double var = 0.0;
    };
    std::vector<Band> bands_;
    double alpha_;
    std::uint64_t seen_ = 0;
    std::uint64_t warmup_;
};

std::vector<double> characteristic_function(const Trace& z, const TriggerConfig& cfg);

/**
 * Streaming trigger on the vertical channel.
 *
 * Sample t fires when CF(t) > s1, mean(CF(t+1 .. t+n_up)) > s2 and no
 * trigger was emitted in the preceding refractory period. The decision for
 * t is taken as soon as sample t + n_up arrives, so any chunking of the
 * input yields the same triggers.
 */
class TriggerDetector {
public:
    TriggerDetector(const TriggerConfig& cfg, std::string station, double rate_hz, TimeUs start_us);

    // Appends samples and returns the triggers whose decision became final.
    std::vector<Pick> feed(std::span<const double> z);

    std::uint64_t samples_seen() const { return next_index_; }

private:
    CharacteristicFunction cf_;
    Trace clock_;  // carries station, rate and start; samples unused
    double s1_, s2_;
    std::size_t n_up_;
    std::int64_t refractory_;
    std::deque<double> window_;  // CF for indices [next_index_ - window_.size(), next_index_)
    std::uint64_t next_index_ = 0;
    std::int64_t last_trigger_ = -1;
};

std::vector<Pick> detect_triggers(const Trace& z, const TriggerConfig& cfg);

}  // namespace qpk
