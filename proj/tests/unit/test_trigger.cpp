#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qpk/trigger.hpp"

using namespace qpk;

namespace {

constexpr double kRate = 100.0;

Trace z_trace(std::vector<double> x) { return Trace{"ST01", Channel::Z, kRate, 0, std::move(x)}; }

// Ricker wavelet whose 1% lead point sits at onset_s, then a decaying tail.
void add_event(std::vector<double>& x, double onset_s, double amp, double f = 8.0) {
    const double peak = onset_s + 0.85 / f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = static_cast<double>(i) / kRate;
        if (t < onset_s - 0.5) continue;
        const double a = std::numbers::pi * f * (t - peak);
        x[i] += amp * (1.0 - 2.0 * a * a) * std::exp(-a * a);
        if (t > peak) x[i] += 0.3 * amp * std::exp(-(t - peak) / 1.5) * std::sin(2.0 * std::numbers::pi * f * 0.9 * (t - peak));
    }
}

// Direct reading of the trigger rule over a precomputed CF.
std::vector<std::size_t> rule_oracle(const std::vector<double>& cf, const TriggerConfig& cfg) {
    const auto n_up = static_cast<std::size_t>(std::llround(cfg.t_up_s * kRate));
    const auto refr = static_cast<std::int64_t>(std::llround(cfg.refractory_s * kRate));
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t + n_up < cf.size(); ++t) {
        if (!(cf[t] > cfg.s1)) continue;
        if (!out.empty() && static_cast<std::int64_t>(t - out.back()) < refr) continue;
        double m = 0.0;
        for (std::size_t k = 1; k <= n_up; ++k) m += cf[t + k];
        if (m / static_cast<double>(n_up) > cfg.s2) out.push_back(t);
    }
    return out;
}

std::vector<std::size_t> indices(const std::vector<Pick>& p) {
    std::vector<std::size_t> out;
    for (const auto& q : p) out.push_back(static_cast<std::size_t>(q.time_us / 10'000));
    return out;
}

}  // namespace

TEST_SUITE("trigger") {

TEST_CASE("config invariants") {
    TriggerConfig c;
    CHECK_NOTHROW(c.validate());
    c.s2 = 7.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.bands.clear();
    CHECK_THROWS(c.validate());
    c = {};
    c.t_up_s = 0.0;
    CHECK_THROWS(c.validate());
}

TEST_CASE("all-zero signal: zero CF and no triggers") {
    const auto z = z_trace(std::vector<double>(3000, 0.0));
    const auto cf = characteristic_function(z, {});
    CHECK(std::all_of(cf.begin(), cf.end(), [](double v) { return v == 0.0; }));
    CHECK(detect_triggers(z, {}).empty());
    CHECK_THROWS(characteristic_function(z_trace({1.0}), {}));
}

TEST_CASE("stationary noise keeps the CF mean below one") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto cf = characteristic_function(z_trace(oracle::gaussian(60000, seed)), {});
        double m = 0.0;
        for (std::size_t i = 1000; i < cf.size(); ++i) m += cf[i];
        CHECK(m / static_cast<double>(cf.size() - 1000) <= 1.0);
    }
}

TEST_CASE("tenfold amplitude step fires the CF within 0.2 s") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto x = oracle::gaussian(4000, 40 + seed);
        const std::size_t t0 = 3000;
        for (std::size_t i = t0; i < x.size(); ++i) x[i] *= 10.0;
        const auto cf = characteristic_function(z_trace(x), {});
        const double peak = *std::max_element(cf.begin() + t0, cf.begin() + t0 + 21);
        CHECK(peak >= 6.0);
    }
}

TEST_CASE("detector matches the rule applied to the CF") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto x = oracle::gaussian(12000, 70 + seed);
        for (double t : {20.0, 35.3, 35.9, 61.0, 90.0}) add_event(x, t, 12.0 + 5.0 * static_cast<double>(seed));
        const auto z = z_trace(x);
        for (double refractory : {0.0, 1.0}) {
            TriggerConfig cfg;
            cfg.refractory_s = refractory;
            CHECK(indices(detect_triggers(z, cfg)) == rule_oracle(characteristic_function(z, cfg), cfg));
        }
    }
}

TEST_CASE("event with SNR 10 gives exactly one trigger near the onset") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto x = oracle::gaussian(4000, 100 + seed);
        add_event(x, 25.0, 10.0);
        const auto tr = detect_triggers(z_trace(x), {});
        int near = 0;
        for (const auto& p : tr) {
            const double t = us_to_seconds(p.time_us);
            if (t >= 24.8 && t <= 25.3) ++near;
        }
        hits += near == 1;
    }
    CHECK(hits >= 9);
}

TEST_CASE("two onsets 0.5 s apart produce one trigger") {
    auto x = oracle::gaussian(4000, 3, 0.01);
    add_event(x, 20.0, 50.0);
    add_event(x, 20.5, 50.0);
    std::size_t n = 0;
    for (const auto& p : detect_triggers(z_trace(x), {})) n += us_to_seconds(p.time_us) > 19.5 && us_to_seconds(p.time_us) < 21.0;
    CHECK(n == 1);
}

TEST_CASE("chunked streaming equals one-shot detection") {
    auto x = oracle::gaussian(20000, 11);
    for (double t : {15.0, 40.0, 40.7, 41.6, 120.0, 190.0}) add_event(x, t, 15.0);
    const auto z = z_trace(x);
    const auto ref = detect_triggers(z, {});
    REQUIRE(ref.size() >= 4);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        TriggerDetector det({}, "ST01", kRate, 0);
        std::vector<Pick> got;
        std::size_t pos = 0;
        while (pos < x.size()) {
            const std::size_t n = std::min<std::size_t>(x.size() - pos, 1 + rng() % (trial < 5 ? 40 : 3000));
            auto out = det.feed(std::span<const double>(x).subspan(pos, n));
            got.insert(got.end(), out.begin(), out.end());
            pos += n;
        }
        CHECK(got == ref);
    }
}

TEST_CASE("truncating after t + t_up does not change the decision at t") {
    auto x = oracle::gaussian(8000, 21);
    for (double t : {15.0, 33.3, 50.0}) add_event(x, t, 12.0);
    const auto full = detect_triggers(z_trace(x), {});
    REQUIRE(!full.empty());
    for (const auto& p : full) {
        const auto idx = static_cast<std::size_t>(p.time_us / 10'000);
        std::vector<double> cut(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(idx + 31));
        const auto part = detect_triggers(z_trace(cut), {});
        REQUIRE(!part.empty());
        CHECK(part.back() == p);
    }
}

TEST_CASE("raising s1 never adds coverage") {
    auto x = oracle::gaussian(30000, 31);
    for (double t : {20.0, 60.0, 60.6, 100.0, 140.0, 200.0, 250.0}) add_event(x, t, 4.0 + t / 25.0);
    const auto z = z_trace(x);
    std::vector<Pick> prev;
    bool first = true;
    for (double s1 : {3.0, 4.0, 6.0, 9.0, 14.0, 25.0}) {
        TriggerConfig cfg;
        cfg.s1 = s1;
        const auto cur = detect_triggers(z, cfg);
        if (!first) {
            // each new trigger lies within one refractory period after an old one
            for (const auto& p : cur) {
                const bool covered = std::any_of(prev.begin(), prev.end(), [&](const Pick& q) {
                    return q.time_us <= p.time_us && p.time_us - q.time_us < seconds_to_us(cfg.refractory_s);
                });
                CHECK(covered);
            }
            CHECK(cur.size() <= prev.size());
        }
        prev = cur;
        first = false;
    }
    // without refractory suppression the sets are nested exactly
    std::vector<Pick> lo_set, hi_set;
    TriggerConfig lo, hi;
    lo.refractory_s = hi.refractory_s = 0.0;
    lo.s1 = 5.0;
    hi.s1 = 10.0;
    lo_set = detect_triggers(z, lo);
    hi_set = detect_triggers(z, hi);
    for (const auto& p : hi_set) CHECK(std::find(lo_set.begin(), lo_set.end(), p) != lo_set.end());
}

}
