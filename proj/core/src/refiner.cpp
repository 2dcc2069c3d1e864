#include "qpk/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace qpk {

void RefinerConfig::validate() const {
    if (!(aic_half_window_s > 0.0 && vp_km_s > 0.0 && guard_s > 0.0)) {
        throw Error("refiner: window, velocity and guard must be positive");
    }
    if (min_stations < 2) throw Error("refiner: min_stations must be at least 2");
}

std::vector<double> aic_curve(std::span<const double> x, std::size_t guard) {
    constexpr double kEps = 1e-12;
    const std::size_t n = x.size();
    if (n < 20) throw Error("aic_curve: need at least 20 samples");
    if (2 * guard >= n) throw Error("aic_curve: guard band covers the whole window");

    // Population variance of every prefix and suffix (Welford in both directions).
    std::vector<double> head(n + 1, 0.0), tail(n + 1, 0.0);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double d = x[k - 1] - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (x[k - 1] - mean);
        head[k] = m2 / static_cast<double>(k);
    }
    mean = 0.0;
    m2 = 0.0;
    for (std::size_t c = 1; c <= n; ++c) {
        const double v = x[n - c];
        const double d = v - mean;
        mean += d / static_cast<double>(c);
        m2 += d * (v - mean);
        tail[n - c] = m2 / static_cast<double>(c);
    }

    std::vector<double> aic(n, std::numeric_limits<double>::infinity());
    for (std::size_t k = std::max<std::size_t>(guard, 1); k <= n - std::max<std::size_t>(guard, 1) && k < n; ++k) {
        // k lh + (n - k) lt, arranged so equal segment variances give equal values
        const double lh = std::log(std::max(head[k], 0.0) + kEps), lt = std::log(std::max(tail[k], 0.0) + kEps);
        aic[k] = static_cast<double>(n) * lt + static_cast<double>(k) * (lh - lt);
    }
    return aic;
}

std::size_t aic_argmin(std::span<const double> curve) {
    if (curve.empty()) throw Error("aic_argmin: empty curve");
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i] < curve[best]) best = i;
    }
    return best;
}

Refinement refine_pick(const TriTrace& stream, const Pick& pick, const RefinerConfig& cfg) {
    const double rate = stream.sample_rate_hz();
    const auto half = std::llround(cfg.aic_half_window_s * rate);
    const auto centre = stream.index_of(pick.time_us);
    const auto lo = centre - half, hi = centre + half;  // inclusive
    Refinement out{pick.advanced(Stage::Refined), RefineStatus::Refined, 0.0};
    if (lo < 0 || hi >= static_cast<std::int64_t>(stream.size())) {
        out.status = RefineStatus::NoCoverage;
        out.pick.low_contrast = true;
        return out;
    }
    const auto& z = stream.z().samples;
    const std::span<const double> win(z.data() + lo, static_cast<std::size_t>(hi - lo + 1));
    const auto guard = static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.guard_s * rate)));
    const auto curve = aic_curve(win, guard);

    double lo_v = std::numeric_limits<double>::infinity(), hi_v = -lo_v;
    for (double v : curve) {
        if (!std::isfinite(v)) continue;
        lo_v = std::min(lo_v, v);
        hi_v = std::max(hi_v, v);
    }
    out.aic_range = hi_v - lo_v;
    if (!(out.aic_range >= cfg.low_contrast_range)) {
        out.status = RefineStatus::LowContrast;
        out.pick.low_contrast = true;
        return out;
    }
    out.pick.time_us = stream.time_of(static_cast<std::size_t>(lo) + aic_argmin(curve));
    return out;
}

// ---- association -------------------------------------------------------------

StationGraph::StationGraph(const std::vector<Station>& stations, double vp_km_s) : n_(stations.size()) {
    if (!(vp_km_s > 0.0)) throw Error("association: vp must be positive");
    for (std::size_t i = 0; i < n_; ++i) {
        if (!index_.emplace(stations[i].station_id, i).second) {
            throw Error("association: duplicate station id '" + stations[i].station_id + "'");
        }
    }
    lag_us_.assign(n_ * n_, -1.0);
    horizon_us_.assign(n_, 0.0);
    for (std::size_t a = 0; a < n_; ++a) {
        for (std::size_t b = 0; b < n_; ++b) {
            if (a == b) continue;
            const double lag = haversine_km(stations[a], stations[b]) / vp_km_s * 1e6;
            lag_us_[a * n_ + b] = lag;
            horizon_us_[a] = std::max(horizon_us_[a], lag);
        }
        max_horizon_us_ = std::max(max_horizon_us_, horizon_us_[a]);
    }
}

std::size_t StationGraph::index(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw Error("association: unknown station id '" + id + "'");
    return it->second;
}

bool StationGraph::linked(const Pick& a, const Pick& b) const {
    const auto sa = index(a.station_id), sb = index(b.station_id);
    if (sa == sb) return false;
    return std::abs(static_cast<double>(a.time_us - b.time_us)) <= max_lag_us(sa, sb);
}

namespace {

bool canonical_less(const Pick& a, const Pick& b) {
    if (a.time_us != b.time_us) return a.time_us < b.time_us;
    if (a.station_id != b.station_id) return a.station_id < b.station_id;
    if (a.confidence != b.confidence) return a.confidence < b.confidence;
    return a.low_contrast < b.low_contrast;
}

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<AssociatedPick> associate(std::vector<Pick> picks, const std::vector<Station>& stations,
                                      const RefinerConfig& cfg) {
    const StationGraph graph(stations, cfg.vp_km_s);
    std::sort(picks.begin(), picks.end(), canonical_less);
    const std::size_t n = picks.size();
    std::vector<std::size_t> st(n);
    for (std::size_t i = 0; i < n; ++i) st[i] = graph.index(picks[i].station_id);

    DisjointSet sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dt = static_cast<double>(picks[j].time_us - picks[i].time_us);
            if (dt > graph.max_horizon_us()) break;
            if (st[i] != st[j] && dt <= graph.max_lag_us(st[i], st[j])) sets.unite(i, j);
        }
    }

    // Roots are the earliest member of each component, so numbering roots in
    // index order numbers groups by their earliest pick.
    std::vector<std::int64_t> group_id(n, -1);
    std::vector<std::set<std::size_t>> members;
    std::vector<AssociatedPick> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto root = sets.find(i);
        if (group_id[root] < 0) {
            group_id[root] = static_cast<std::int64_t>(members.size());
            members.emplace_back();
        }
        members[static_cast<std::size_t>(group_id[root])].insert(st[i]);
        out[i].pick = std::move(picks[i]);
        out[i].event_id = group_id[root];
    }
    for (auto& a : out) a.n_stations = static_cast<int>(members[static_cast<std::size_t>(a.event_id)].size());
    return out;
}

std::vector<AssociatedPick> prune_singletons(const std::vector<AssociatedPick>& groups, const RefinerConfig& cfg) {
    std::vector<AssociatedPick> out;
    for (const auto& a : groups) {
        if (a.n_stations >= cfg.min_stations) out.push_back(a);
    }
    return out;
}

StreamingAssociator::StreamingAssociator(const std::vector<Station>& stations, const RefinerConfig& cfg)
    : graph_(stations, cfg.vp_km_s) {
    if (cfg.min_stations != 2) throw Error("streaming association supports min_stations == 2 only");
}

void StreamingAssociator::add(const Pick& pick) {
    Entry e{pick, graph_.index(pick.station_id)};
    for (auto& other : pending_) {
        if (other.station == e.station) continue;
        const double dt = std::abs(static_cast<double>(other.pick.time_us - pick.time_us));
        if (dt <= graph_.max_lag_us(other.station, e.station)) {
            other.linked = true;
            e.linked = true;
        }
    }
    const auto pos = std::upper_bound(pending_.begin(), pending_.end(), e,
                                      [](const Entry& a, const Entry& b) { return canonical_less(a.pick, b.pick); });
    pending_.insert(pos, std::move(e));
}

std::vector<Pick> StreamingAssociator::collect(TimeUs watermark, bool final) {
    std::vector<Pick> kept;
    std::vector<Entry> keep;
    for (auto& e : pending_) {
        if (e.linked && !e.emitted) {
            kept.push_back(e.pick);
            e.emitted = true;
        }
        const double t = static_cast<double>(e.pick.time_us);
        const bool settled = final || static_cast<double>(watermark) > t + graph_.horizon_us(e.station);
        if (settled && !e.linked) {
            ++dropped_;
            continue;
        }
        const bool expired = final || static_cast<double>(watermark) > t + graph_.max_horizon_us();
        if (!expired) keep.push_back(std::move(e));
    }
    pending_ = std::move(keep);
    return kept;
}

std::vector<Pick> StreamingAssociator::advance(TimeUs watermark) { return collect(watermark, false); }

std::vector<Pick> StreamingAssociator::finish() { return collect(0, true); }

}  // namespace qpk
