#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "qpk/features.hpp"

using namespace qpk;

namespace {

FeatureConfig with_post(double an) {
    FeatureConfig c;
    c.post_s = an;
    return c;
}

TriTrace noise_window(const FeatureConfig& cfg, std::uint64_t seed, double sigma = 1.0) {
    const auto n = window_samples(cfg, 100.0);
    return TriTrace("ST01", 100.0, 0, oracle::gaussian(n, seed, sigma), oracle::gaussian(n, seed + 1, sigma),
                    oracle::gaussian(n, seed + 2, sigma));
}

TriTrace zero_window(const FeatureConfig& cfg) {
    const std::vector<double> z(window_samples(cfg, 100.0), 0.0);
    return TriTrace("ST01", 100.0, 0, z, z, z);
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double value_of(const NamedValues& v, const std::string& name) {
    const auto it = std::find(v.names.begin(), v.names.end(), name);
    REQUIRE(it != v.names.end());
    return v.values[static_cast<std::size_t>(it - v.names.begin())];
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("family and total counts for every post window") {
    for (double an : {5.0, 10.0, 15.0, 20.0}) {
        const auto cfg = with_post(an);
        const auto w = noise_window(cfg, 1);
        const int blocks = static_cast<int>(an / 5.0);
        CHECK(amplitude_fluctuation(w, cfg).values.size() == static_cast<std::size_t>(48 + 12 * blocks));
        CHECK(maximal_amplitude(w, cfg).values.size() == 14);
        CHECK(spectral_waterfall(w, cfg).values.size() == 540);
        CHECK(other_features(w, cfg).values.size() == 65);
        CHECK(assemble(w, cfg).values.size() == static_cast<std::size_t>(679 + 12 * (blocks - 1)));
        CHECK(cfg.feature_count() == static_cast<std::size_t>(679 + 12 * (blocks - 1)));
        CHECK(FeatureConfig::post_s_for_count(cfg.feature_count()) == an);
    }
    CHECK_THROWS(FeatureConfig::post_s_for_count(680));
}

TEST_CASE("names are unique and stable") {
    const auto cfg = with_post(20);
    const auto names = feature_names(cfg);
    CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
    CHECK(feature_names(cfg) == names);
    CHECK(*assemble(noise_window(cfg, 3), cfg).names == names);
    CHECK(names.front() == "fluct_2-10Hz_E_-5:0_mean");
}

TEST_CASE("cut_window geometry") {
    const auto cfg = with_post(20);
    const auto n = 10000;
    std::vector<double> ramp(n);
    for (int i = 0; i < n; ++i) ramp[i] = i;
    const TriTrace s("ST01", 100.0, 1'000'000, ramp, ramp, ramp);
    const auto w = cut_window(s, s.time_of(500), cfg);
    CHECK(w.size() == 2500);
    CHECK(w.z().samples[500] == 500.0);  // offset pre_s * rate is the candidate
    CHECK(cut_window(s, s.time_of(500), cfg) == w);
    CHECK_THROWS(cut_window(s, s.time_of(n - 1000), cfg));
    CHECK_THROWS(cut_window(s, s.time_of(100), cfg));
}

TEST_CASE("zero signal gives all-zero features") {
    for (double an : {5.0, 20.0}) {
        const auto cfg = with_post(an);
        const auto fv = assemble(zero_window(cfg), cfg);
        CHECK(std::all_of(fv.values.begin(), fv.values.end(), [](double v) { return v == 0.0; }));
        CHECK(fv.nonfinite_replaced == 0);
    }
}

TEST_CASE("determinism and parallel families") {
    const auto cfg = with_post(15);
    const auto w = noise_window(cfg, 7);
    const FeatureExtractor fx(cfg);
    const auto a = fx.assemble(w), b = fx.assemble(w), c = fx.assemble(w, true);
    CHECK(a.values == b.values);
    CHECK(a.values == c.values);
}

TEST_CASE("maximal amplitude: impulse on N only") {
    const auto cfg = with_post(20);
    const auto n = window_samples(cfg, 100.0);
    std::vector<double> zero(n, 0.0), north(n, 0.0);
    north[500 + 800] = 50.0;  // 8 s after the arrival
    const TriTrace w("ST01", 100.0, 0, zero, north, zero);
    const auto v = maximal_amplitude(w, cfg);
    const auto filtered = dsp::bandpass(north, 100.0, cfg.fluct_bands[0]);
    double expect = 0.0;
    for (std::size_t i = 700; i < n; ++i) expect = std::max(expect, std::fabs(filtered[i]));
    CHECK(value_of(v, "maxamp_2-10Hz_N_max") == expect);
    CHECK(value_of(v, "maxamp_2-10Hz_Z_max") == 0.0);
    CHECK(value_of(v, "maxamp_2-10Hz_E_max") == 0.0);
    CHECK(value_of(v, "maxamp_2-10Hz_N_nbhd_mean") > 0.0);
}

TEST_CASE("white-noise waterfall is symmetric around the arrival") {
    // var over (-1,0) and (0,1) compared on many windows; the difference of
    // the means must stay within 3 standard errors of zero.
    const auto cfg = with_post(5);
    std::vector<double> diff;
    for (std::uint64_t s = 0; s < 60; ++s) {
        const auto v = spectral_waterfall(noise_window(cfg, 1000 + 3 * s), cfg);
        diff.push_back(value_of(v, "wfall_3.858-6.43Hz_Z_-1:0_var") - value_of(v, "wfall_3.858-6.43Hz_Z_0:1_var"));
    }
    double m = 0.0, sd = 0.0;
    for (double d : diff) m += d;
    m /= static_cast<double>(diff.size());
    for (double d : diff) sd += (d - m) * (d - m);
    sd = std::sqrt(sd / static_cast<double>(diff.size() - 1));
    CHECK(std::fabs(m) <= 3.0 * sd / std::sqrt(static_cast<double>(diff.size())));
}

TEST_CASE("P onset raises the post-arrival energy ratio") {
    const auto cfg = with_post(20);
    auto w = noise_window(cfg, 42, 0.05);
    std::vector<double> z = w.z().samples;
    for (std::size_t i = 500; i < z.size(); ++i) {
        const double t = static_cast<double>(i - 500) / 100.0;
        // chirp spanning all "other" bands
        z[i] += 20.0 * std::exp(-t / 3.0) * std::sin(2.0 * std::numbers::pi * (1.5 * t + 1.8 * t * t));
    }
    const TriTrace p("ST01", 100.0, 0, w.e().samples, w.n().samples, z);
    const auto v = other_features(p, cfg);
    int checked = 0;
    for (std::size_t i = 0; i < v.names.size(); ++i) {
        if (v.names[i].find("_Z_rms_ratio") == std::string::npos) continue;
        CHECK(v.values[i] > 0.5);
        ++checked;
    }
    CHECK(checked == 5);
}

TEST_CASE("scale covariance") {
    const auto cfg = with_post(10);
    const auto w = noise_window(cfg, 11, 2.0);
    const double alpha = 3.7;
    auto scaled = [&](const Trace& t) {
        auto x = t.samples;
        for (auto& v : x) v *= alpha;
        return x;
    };
    const TriTrace ws("ST01", 100.0, 0, scaled(w.e()), scaled(w.n()), scaled(w.z()));
    const auto a = assemble(w, cfg), b = assemble(ws, cfg);
    const auto& names = *a.names;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& nm = names[i];
        double power = 1.0;
        if (ends_with(nm, "_var")) power = 2.0;
        if (ends_with(nm, "rms_ratio") || ends_with(nm, "polarization")) power = 0.0;
        const double expect = a.values[i] * std::pow(alpha, power);
        INFO(nm);
        CHECK(std::fabs(b.values[i] - expect) <= 1e-9 * std::max(std::fabs(expect), 1e-12));
    }
}

TEST_CASE("feature table csv round trip") {
    const auto cfg = with_post(5);
    FeatureTable t;
    t.names = feature_names(cfg);
    t.x = Matrix(0, t.names.size());
    for (std::uint64_t s = 0; s < 4; ++s) {
        t.append("ST0" + std::to_string(s), static_cast<TimeUs>(1000 * s), static_cast<int>(s % 2),
                 assemble(noise_window(cfg, 20 + s), cfg).values);
    }
    std::stringstream io;
    write_feature_table(io, t);
    const auto back = read_feature_table(io);
    CHECK(back.names == t.names);
    CHECK(back.station == t.station);
    CHECK(back.time_us == t.time_us);
    CHECK(back.label == t.label);
    CHECK(back.x == t.x);
}

}
