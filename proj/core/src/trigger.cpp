#include "qpk/trigger.hpp"

#include <algorithm>
#include <cmath>

namespace qpk {

void TriggerConfig::validate() const {
    if (bands.empty()) throw Error("trigger: at least one band required");
    if (!(s1 > s2 && s2 > 0.0)) throw Error("trigger: need s1 > s2 > 0");
    if (!(t_up_s > 0.0)) throw Error("trigger: t_up_s must be positive");
    if (!(lta_decay_s > 0.0)) throw Error("trigger: lta_decay_s must be positive");
    if (!(refractory_s >= 0.0)) throw Error("trigger: refractory_s must be non-negative");
}

CharacteristicFunction::CharacteristicFunction(const TriggerConfig& cfg, double rate_hz)
    : alpha_(1.0 / (cfg.lta_decay_s * rate_hz)),
      warmup_(static_cast<std::uint64_t>(std::llround(cfg.lta_decay_s * rate_hz))) {
    cfg.validate();
    for (const auto& spec : cfg.bands) bands_.push_back({dsp::BandpassFilter(spec, rate_hz)});
}

double CharacteristicFunction::next(double z) {
    constexpr double kEps = 1e-12;
    ++seen_;
    // Plain running moments until 1/n drops below the decay rate.
    const double a = std::max(alpha_, 1.0 / static_cast<double>(seen_));
    double cf = 0.0;
    for (auto& b : bands_) {
        const double y = b.filter.process(z);
        const double e = y * y;
        const double d = e - b.mean;
        const double score = d / (std::sqrt(b.var) + kEps);
        cf = std::max(cf, score);
        b.mean += a * d;
        b.var = (1.0 - a) * (b.var + a * d * d);
    }
    return seen_ <= warmup_ ? 0.0 : cf;
}

std::vector<double> characteristic_function(const Trace& z, const TriggerConfig& cfg) {
    if (z.size() < 2) throw Error("characteristic_function: trace shorter than 2 samples");
    CharacteristicFunction cf(cfg, z.sample_rate_hz);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = cf.next(z.samples[i]);
    return out;
}

TriggerDetector::TriggerDetector(const TriggerConfig& cfg, std::string station, double rate_hz, TimeUs start_us)
    : cf_(cfg, rate_hz),
      clock_{std::move(station), Channel::Z, rate_hz, start_us, {}},
      s1_(cfg.s1),
      s2_(cfg.s2),
      n_up_(static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.t_up_s * rate_hz)))),
      refractory_(std::llround(cfg.refractory_s * rate_hz)) {}

std::vector<Pick> TriggerDetector::feed(std::span<const double> z) {
    std::vector<Pick> out;
    for (double v : z) {
        window_.push_back(cf_.next(v));
        ++next_index_;
        if (window_.size() < n_up_ + 1) continue;
        if (window_.size() > n_up_ + 1) window_.pop_front();

        const auto t = static_cast<std::int64_t>(next_index_ - n_up_ - 1);
        if (!(window_.front() > s1_)) continue;
        if (last_trigger_ >= 0 && t - last_trigger_ < refractory_) continue;
        double sum = 0.0;
        for (std::size_t k = 1; k <= n_up_; ++k) sum += window_[k];
        if (!(sum / static_cast<double>(n_up_) > s2_)) continue;

        last_trigger_ = t;
        out.push_back(Pick{clock_.station_id, clock_.time_of(static_cast<std::size_t>(t)), 0.0, Stage::Triggered});
    }
    return out;
}

std::vector<Pick> detect_triggers(const Trace& z, const TriggerConfig& cfg) {
    if (z.size() < 2) throw Error("characteristic_function: trace shorter than 2 samples");
    TriggerDetector det(cfg, z.station_id, z.sample_rate_hz, z.start_us);
    return det.feed(z.samples);
}

}  // namespace qpk
