#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "qpk/synth.hpp"

using namespace qpk;

namespace {

SynthConfig quick(std::uint64_t seed) {
    SynthConfig c;
    c.n_stations = 3;
    c.duration_s = 300.0;
    c.event_rate_per_hour = 120.0;
    c.burst_rate_per_hour = 200.0;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("config invariants") {
    SynthConfig c;
    CHECK_NOTHROW(c.validate());
    c.vs_km_s = 6.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.event_rate_per_hour = -1.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.duration_s = 30.0;  // too short to fit lead, tail and travel times
    CHECK_THROWS(c.validate());
    const auto b = SynthConfig::regime_b();
    CHECK(b.ar_coef != c.ar_coef);
    CHECK(b.p_freq_max_hz < c.p_freq_max_hz);
}

TEST_CASE("config file keys") {
    const auto kv = KeyValueConfig::parse_string("[synth]\nregime = \"B\"\nn_stations = 5\nseed = 9\nburst_rate_per_hour = 10\n");
    const auto c = synth_config_from(kv);
    CHECK(c.n_stations == 5);
    CHECK(c.seed == 9);
    CHECK(c.ar_coef == SynthConfig::regime_b().ar_coef);
    CHECK(c.burst_rate_per_hour == 10.0);
    CHECK_THROWS(synth_config_from(KeyValueConfig::parse_string("[synth]\nbogus = 1\n")));
}

TEST_CASE("travel time is D / vp") {
    SynthConfig c;
    const Station st{"A", 30.0, 100.0};
    SynthEvent ev;
    ev.lat_deg = 30.0 + 55.0 / 6371.0 * 180.0 / std::numbers::pi;
    ev.lon_deg = 100.0;
    CHECK(p_travel_time_s(c, ev, st) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("equidistant stations see the same onset") {
    SynthConfig c;
    const std::vector<Station> st{{"A", 30.0, 100.2}, {"B", 30.0, 99.8}};
    SynthEvent ev;
    ev.lat_deg = 30.0;
    ev.lon_deg = 100.0;
    ev.origin_us = 60'000'000;
    const auto rec = gen_event(c, ev, st, 0);
    REQUIRE(rec.labels.size() == 2);
    CHECK(rec.labels[0].time_us == rec.labels[1].time_us);
}

TEST_CASE("labels reproduce the closed-form onset and sit where the signal starts") {
    const auto c = quick(4);
    const auto corpus = gen_corpus(c);
    const auto stations = corpus.stations;
    for (int i = 0; i < 10; ++i) {
        SynthEvent ev;
        ev.lat_deg = c.centre_lat_deg + 0.05 * (i - 5);
        ev.lon_deg = c.centre_lon_deg + 0.03 * i;
        ev.origin_us = c.start_us + seconds_to_us(100.0 + i);
        ev.seed = static_cast<std::uint64_t>(i);
        const auto rec = gen_event(c, ev, stations, c.start_us);
        for (std::size_t k = 0; k < stations.size(); ++k) {
            const double d = haversine_km({"", ev.lat_deg, ev.lon_deg}, stations[k]);
            const double expect_s = 100.0 + i + d / c.vp_km_s;
            CHECK(std::fabs(us_to_seconds(rec.labels[k].time_us - c.start_us) - expect_s) <= 1.0 / c.sample_rate_hz);
            // the first stored sample is the first one at or after the onset
            const TimeUs first_t = c.start_us + rec.signals[k].first_index * 10'000;
            CHECK(first_t >= rec.labels[k].time_us);
            CHECK(first_t - rec.labels[k].time_us < 10'000);
        }
    }
}

TEST_CASE("S energy dominates the horizontals") {
    SynthConfig c;
    const std::vector<Station> st{{"A", 31.0, 103.4}};
    SynthEvent ev;
    ev.lat_deg = 31.3;
    ev.lon_deg = 103.4;
    ev.origin_us = 0;
    ev.snr = 20.0;
    const auto rec = gen_event(c, ev, st, 0);
    const auto& s = rec.signals[0];
    double h = 0.0, v = 0.0;
    for (std::size_t i = 0; i < s.z.size(); ++i) {
        h = std::max({h, std::fabs(s.e[i]), std::fabs(s.n[i])});
        v = std::max(v, std::fabs(s.z[i]));
    }
    CHECK(h > v);
}

TEST_CASE("corpus determinism and label coverage") {
    auto c = quick(7);
    c.n_blocks = 2;
    const auto a = gen_corpus(c), b = gen_corpus(c, 3);
    REQUIRE(a.blocks.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.blocks[i].tag == static_cast<int>(i));
        CHECK(a.blocks[i].streams == b.blocks[i].streams);
        CHECK(a.blocks[i].labels == b.blocks[i].labels);
    }
    CHECK(a.blocks[1].streams[0].start_us() == a.blocks[0].streams[0].end_us());
    for (const auto& blk : a.blocks) {
        for (const auto& l : blk.labels) {
            const auto& s = blk.streams[0];
            CHECK(l.time_us - s.start_us() >= seconds_to_us(c.lead_s));
            CHECK(s.end_us() - l.time_us >= seconds_to_us(c.tail_s));
        }
    }
    auto other = c;
    other.seed = 8;
    CHECK_FALSE(gen_corpus(other).blocks[0].streams == a.blocks[0].streams);
}

TEST_CASE("event counts follow the Poisson rate") {
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthConfig c;
        c.n_stations = 1;
        c.duration_s = 600.0;
        c.event_rate_per_hour = 600.0;  // lambda T = 100
        c.seed = seed;
        const auto n = gen_corpus(c).blocks[0].labels.size();
        inside += n >= 60 && n <= 140;
    }
    CHECK(inside >= 99);
}

TEST_CASE("zero event rate gives no labels") {
    auto c = quick(1);
    c.event_rate_per_hour = 0.0;
    const auto corpus = gen_corpus(c);
    CHECK(corpus.blocks[0].labels.empty());
    CHECK(corpus.all_labels().empty());
}

TEST_CASE("corpus files round trip") {
    auto c = quick(12);
    c.n_blocks = 2;
    const auto corpus = gen_corpus(c);
    const auto dir = std::filesystem::temp_directory_path() / "qpk_synth_roundtrip";
    std::filesystem::remove_all(dir);
    write_corpus(corpus, dir.string(), TraceFormat::Csv);
    const auto back = read_corpus(dir.string());
    CHECK(back.stations.size() == corpus.stations.size());
    REQUIRE(back.blocks.size() == 2);
    CHECK(back.blocks[1].labels == corpus.blocks[1].labels);
    CHECK(back.blocks[1].streams == corpus.blocks[1].streams);
    CHECK(back.all_labels() == corpus.all_labels());
    std::filesystem::remove_all(dir);
}

}
