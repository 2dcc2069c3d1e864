#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qpk/waveform.hpp"

namespace qpk {

struct RefinerConfig {
    double aic_half_window_s = 1.0;
    double vp_km_s = 5.5;
    int min_stations = 2;
    double guard_s = 0.05;
    // AIC spread below which the original time is kept.
    double low_contrast_range = 1.0;

    void validate() const;
};

/**
 * Two-segment variance AIC:
 *
 *     AIC(k) = k ln(var(x[0, k)) + eps) + (N - k) ln(var(x[k, N)) + eps)
 *
 * for guard <= k <= N - guard; other positions hold +infinity.
 */
std::vector<double> aic_curve(std::span<const double> x, std::size_t guard = 5);

// Earliest index of the minimum.
std::size_t aic_argmin(std::span<const double> curve);

enum class RefineStatus : std::uint8_t { Refined, LowContrast, NoCoverage };

struct Refinement {
    Pick pick;
    RefineStatus status = RefineStatus::Refined;
    double aic_range = 0.0;
};

/// Moves a pick to the AIC minimum of the vertical channel within +-aic_half_window_s.
Refinement refine_pick(const TriTrace& stream, const Pick& pick, const RefinerConfig& cfg);

/**
 * Station geometry for the D / vp association rule. Picks on stations A != B
 * are linked when |t_a - t_b| <= haversine(A, B) / vp.
 */
class StationGraph {
public:
    StationGraph(const std::vector<Station>& stations, double vp_km_s);

    bool contains(const std::string& id) const { return index_.count(id) > 0; }
    std::size_t index(const std::string& id) const;
    // Longest admissible time difference in microseconds (A == B gives -1).
    double max_lag_us(std::size_t a, std::size_t b) const { return lag_us_[a * n_ + b]; }
    // Longest lag from station a to any other station.
    double horizon_us(std::size_t a) const { return horizon_us_[a]; }
    double max_horizon_us() const { return max_horizon_us_; }
    bool linked(const Pick& a, const Pick& b) const;

private:
    std::size_t n_ = 0;
    std::map<std::string, std::size_t> index_;
    std::vector<double> lag_us_;
    std::vector<double> horizon_us_;
    double max_horizon_us_ = 0.0;
};

/**
 * Links picks into event groups (connected components). The result is in
 * canonical (time, station) order and group ids count up in order of each
 * group's earliest pick, so the output does not depend on input order.
 */
std::vector<AssociatedPick> associate(std::vector<Pick> picks, const std::vector<Station>& stations,
                                      const RefinerConfig& cfg);

/// Keeps picks whose group covers at least min_stations distinct stations.
std::vector<AssociatedPick> prune_singletons(const std::vector<AssociatedPick>& groups, const RefinerConfig& cfg);

/**
 * Incremental form of associate + prune_singletons for min_stations == 2.
 *
 * A pick with any link is kept for good (its group already spans two
 * stations); a pick still unlinked once the watermark passes its time plus
 * the station's horizon is dropped.
 */
class StreamingAssociator {
public:
    StreamingAssociator(const std::vector<Station>& stations, const RefinerConfig& cfg);

    void add(const Pick& pick);
    // No pick earlier than `watermark` will be added later. Returns newly kept picks.
    std::vector<Pick> advance(TimeUs watermark);
    std::vector<Pick> finish();

    std::size_t dropped() const { return dropped_; }

private:
    struct Entry {
        Pick pick;
        std::size_t station;
        bool linked = false;
        bool emitted = false;
    };
    std::vector<Pick> collect(TimeUs watermark, bool final);

    StationGraph graph_;
    std::vector<Entry> pending_;  // in time order
    std::size_t dropped_ = 0;
};

}  // namespace qpk
