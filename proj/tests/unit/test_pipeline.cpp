#include <doctest.h>

#include <random>

#include "qpk/evaluation.hpp"
#include "qpk/pipeline.hpp"
#include "qpk/synth.hpp"

using namespace qpk;

namespace {

SynthConfig small_corpus_config(std::uint64_t seed, int blocks, double duration_s, double rate_per_hour) {
    SynthConfig c;
    c.n_stations = 3;
    c.n_blocks = blocks;
    c.duration_s = duration_s;
    c.event_rate_per_hour = rate_per_hour;
    c.snr_min = 15.0;
    c.snr_max = 60.0;
    c.seed = seed;
    return c;
}

const Corpus& mechanics_corpus() {
    static const Corpus c = [] {
        auto cfg = small_corpus_config(21, 1, 900.0, 40.0);
        cfg.burst_rate_per_hour = 300.0;
        cfg.burst_snr_min = 4.0;
        cfg.burst_snr_max = 12.0;
        return gen_corpus(cfg);
    }();
    return c;
}

// Cheap deterministic scorer: high post/pre energy ratio on the vertical
// channel means "arrival". Exercises the full classifier path.
std::shared_ptr<const ModelBundle> ratio_bundle(const FeatureConfig& fc) {
    auto b = std::make_shared<ModelBundle>();
    b->feature_names = feature_names(fc);
    b->post_s = fc.post_s;
    b->standardizer = {std::vector<double>(b->feature_names.size(), 0.0), std::vector<double>(b->feature_names.size(), 1.0)};
    const auto it = std::find(b->feature_names.begin(), b->feature_names.end(), "other_3.858-6.43Hz_Z_rms_ratio");
    REQUIRE(it != b->feature_names.end());
    const auto col = static_cast<std::size_t>(it - b->feature_names.begin());
    b->base_names = {"ratio"};
    b->base_models = {TrainedModel::custom("ratio", b->feature_names.size(), [col](std::span<const double> x) { return x[col]; })};
    b->meta_weights = {12.0};
    b->meta_intercept = -8.0;
    return b;
}

// Feeds every stream in chunks whose lengths come from `next_len`.
template <typename F>
PipelineResult run_chunked(const std::vector<TriTrace>& streams, std::shared_ptr<const ModelBundle> bundle,
                           const std::vector<Station>& stations, const PipelineConfig& cfg, const PipelineOptions& opt,
                           F next_len) {
    Pipeline p(cfg, std::move(bundle), stations, opt);
    for (const auto& s : streams) p.add_stream(s.station_id(), s.sample_rate_hz(), s.start_us());
    std::vector<std::size_t> pos(streams.size(), 0);
    bool more = true;
    while (more) {
        more = false;
        std::vector<TriTrace> chunks;
        for (std::size_t i = 0; i < streams.size(); ++i) {
            if (pos[i] >= streams[i].size()) continue;
            const auto n = std::min(next_len(), streams[i].size() - pos[i]);
            chunks.push_back(streams[i].slice(pos[i], n));
            pos[i] += n;
            more = true;
        }
        if (!chunks.empty()) p.ingest(chunks);
    }
    p.finish();
    return p.result();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config validation and parsing") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    c.stack_threshold = 1.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.refiner.aic_half_window_s = 6.0;
    CHECK_THROWS(c.validate());

    const auto kv = KeyValueConfig::parse_string(
        "[trigger]\ns1 = 7\nbands = \"2-4, 4-8/2\"\n[feature]\npost_s = 10\n[classifier]\nthreshold = 0.6\n"
        "[refiner]\nvp_km_s = 6.0\n[pipeline]\nchunk_s = 30\n");
    const auto p = pipeline_config_from(kv);
    CHECK(p.trigger.s1 == 7.0);
    REQUIRE(p.trigger.bands.size() == 2);
    CHECK(p.trigger.bands[1] == dsp::BandpassSpec{4.0, 8.0, 2});
    CHECK(p.feature.post_s == 10.0);
    CHECK(p.stack_threshold == 0.6);
    CHECK(p.refiner.vp_km_s == 6.0);
    CHECK(p.chunk_s == 30.0);
    CHECK_THROWS_WITH(pipeline_config_from(KeyValueConfig::parse_string("[trigger]\nsl = 7\n")), doctest::Contains("sl"));
}

TEST_CASE("zero streams produce no picks") {
    const auto& c = mechanics_corpus();
    std::vector<TriTrace> quiet;
    for (const auto& s : c.blocks[0].streams) {
        const std::vector<double> z(s.size(), 0.0);
        quiet.emplace_back(s.station_id(), s.sample_rate_hz(), s.start_us(), z, z, z);
    }
    PipelineConfig cfg;
    const auto r = run_stream(quiet, ratio_bundle(cfg.feature), c.stations, cfg);
    CHECK(r.picks.empty());
    CHECK(r.counts.candidates == 0);
    PipelineOptions bypass;
    bypass.bypass_classifier = true;
    CHECK(run_stream(quiet, nullptr, c.stations, cfg, bypass).picks.empty());
}

TEST_CASE("chunking, worker count and emissions") {
    const auto& c = mechanics_corpus();
    PipelineConfig cfg;
    const auto bundle = ratio_bundle(cfg.feature);
    const auto ref = run_stream(c.blocks[0].streams, bundle, c.stations, cfg);
    REQUIRE(ref.picks.size() >= 10);
    CHECK(ref.counts.samples >= ref.counts.candidates);
    CHECK(ref.counts.candidates >= ref.counts.classified);
    CHECK(ref.counts.classified >= ref.counts.refined);
    CHECK(ref.counts.refined == ref.picks.size());

    std::mt19937_64 rng(1);
    PipelineOptions par;
    par.workers = 3;
    par.classifier_workers = 2;
    const auto a = run_chunked(c.blocks[0].streams, bundle, c.stations, cfg, {}, [&] { return 1 + rng() % 20000; });
    const auto b = run_chunked(c.blocks[0].streams, bundle, c.stations, cfg, par, [&] { return 1 + rng() % 700; });
    CHECK(a.picks == ref.picks);
    CHECK(b.picks == ref.picks);

    // latency: nothing leaves before t + post_s + AIC window unless the stream ended
    const TimeUs hold = seconds_to_us(cfg.feature.post_s + cfg.refiner.aic_half_window_s);
    TimeUs end = c.blocks[0].streams[0].end_us();
    for (const auto& s : c.blocks[0].streams) end = std::min(end, s.end_us());
    std::vector<Pick> emitted;
    for (const auto& e : b.emissions) {
        CHECK((e.delivered_us >= e.pick.time_us + hold || e.delivered_us == end));
        emitted.push_back(e.pick);
    }
    // and nothing emitted is revised or withdrawn later
    CHECK(emitted == picks_of(b.picks));
}

TEST_CASE("raising the classifier threshold never adds picks") {
    const auto& c = mechanics_corpus();
    PipelineConfig cfg;
    const auto bundle = ratio_bundle(cfg.feature);
    std::vector<Pick> prev;
    bool first = true;
    for (double t : {0.2, 0.5, 0.8, 0.95}) {
        cfg.stack_threshold = t;
        const auto picks = picks_of(run_stream(c.blocks[0].streams, bundle, c.stations, cfg).picks);
        if (!first) {
            for (const auto& p : picks) CHECK(std::find(prev.begin(), prev.end(), p) != prev.end());
        }
        prev = picks;
        first = false;
    }
}

TEST_CASE("input errors") {
    const auto& c = mechanics_corpus();
    PipelineConfig cfg;
    const auto bundle = ratio_bundle(cfg.feature);
    {
        Pipeline p(cfg, bundle, c.stations);
        p.add_stream("ST01", 100.0, 0);
        CHECK_THROWS_WITH(p.add_stream("ST01", 100.0, 0), doctest::Contains("duplicate"));
        CHECK_THROWS_WITH(p.add_stream("ST02", 50.0, 0), doctest::Contains("rates"));
        CHECK_THROWS_WITH(p.add_stream("XX", 100.0, 0), doctest::Contains("catalog"));
        const std::vector<double> z(100, 0.0);
        CHECK_THROWS_WITH(p.ingest({TriTrace("ST01", 100.0, 5'000'000, z, z, z)}), doctest::Contains("contiguous"));
    }
    CHECK_THROWS(Pipeline(cfg, nullptr, c.stations));
    auto other = cfg;
    other.feature.post_s = 10.0;
    CHECK_THROWS_WITH(Pipeline(other, bundle, c.stations), doctest::Contains("post window"));
}

TEST_CASE("trained ensemble on a 3-station corpus with about 20 events") {
    // train on one block, evaluate on another hour at 20 events/hour; a denser rate packs
    // arrivals inside the trigger refractory and measures overlap rather than picking
    const auto corpus = gen_corpus(small_corpus_config(5, 2, 3600.0, 20.0));
    PipelineConfig cfg;
    const auto& train = corpus.blocks[0];
    const auto& test = corpus.blocks[1];
    const auto table = build_feature_table(train.streams, auto_candidates(train.streams, cfg.trigger), train.labels, cfg.feature);
    const auto bundle = std::make_shared<const ModelBundle>(train_stack(table, StackConfig{}));
    const auto r = run_stream(test.streams, bundle, corpus.stations, cfg);
    const auto rep = evaluate(picks_of(r.picks), test.labels);
    MESSAGE("labels ", test.labels.size(), " picks ", r.picks.size(), " P ", rep.precision, " R ", rep.recall);
    CHECK(rep.precision >= 0.8);
    CHECK(rep.recall >= 0.8);
}

TEST_CASE("bench report is consistent") {
    const auto& c = mechanics_corpus();
    PipelineConfig cfg;
    const auto rep = bench(c.blocks[0].streams, ratio_bundle(cfg.feature), c.stations, cfg, 3);
    CHECK(rep.parallel_matches_serial);
    CHECK(rep.counts.samples >= rep.counts.candidates);
    CHECK(rep.counts.candidates >= rep.counts.classified);
    CHECK(rep.counts.classified >= rep.counts.refined);
    CHECK(rep.trigger_us_per_sample > 0.0);
    CHECK(rep.to_json().find("\"parallel_matches_serial\": true") != std::string::npos);
}

}
