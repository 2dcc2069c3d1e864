#include <doctest.h>

#include <json.hpp>
#include <random>

#include "qpk/evaluation.hpp"
#include "qpk/synth.hpp"

using namespace qpk;

namespace {

Pick pk(const std::string& st, double t_s) { return Pick{st, seconds_to_us(t_s), 0.9, Stage::Refined}; }
LabeledArrival lb(const std::string& st, double t_s) { return LabeledArrival{st, seconds_to_us(t_s)}; }

std::pair<std::vector<Pick>, std::vector<LabeledArrival>> random_sets(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 60.0), j(-0.8, 0.8);
    std::vector<Pick> p;
    std::vector<LabeledArrival> l;
    for (int i = 0; i < 40; ++i) {
        const std::string st = "S" + std::to_string(rng() % 3);
        const double t = u(rng);
        l.push_back(lb(st, t));
        if (rng() % 4) p.push_back(pk(st, t + j(rng)));
    }
    for (int i = 0; i < 15; ++i) p.push_back(pk("S" + std::to_string(rng() % 3), u(rng)));
    return {p, l};
}

Matrix four_groups(std::uint64_t seed, std::vector<int>& truth) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.1);
    Matrix m(0, 9);
    truth.clear();
    for (int i = 0; i < 16; ++i) {
        const int grp = (i * 7 + static_cast<int>(seed)) % 4;
        std::vector<double> row(9);
        for (int c = 0; c < 9; ++c) row[c] = (c % 4 == grp ? 10.0 : 0.0) + g(rng);
        m.append_row(row);
        truth.push_back(grp);
    }
    return m;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("matching boundary and one-to-one examples") {
    CHECK(match_picks({pk("A", 10.0)}, {lb("A", 10.0)}).pairs.size() == 1);
    CHECK(match_picks({pk("A", 10.4)}, {lb("A", 10.0)}).pairs.empty());
    CHECK(match_picks({pk("A", 10.399999)}, {lb("A", 10.0)}).pairs.size() == 1);
    CHECK(match_picks({pk("B", 10.0)}, {lb("A", 10.0)}).pairs.empty());
    const auto m = match_picks({pk("A", 10.3), pk("A", 9.9)}, {lb("A", 10.0)});
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].pick == 1);
    CHECK(m.pairs[0].dt_s == doctest::Approx(-0.1));
    CHECK(m.unmatched_picks == std::vector<std::size_t>{0});
}

TEST_CASE("ties prefer the earlier label") {
    const auto m = match_picks({pk("A", 10.0)}, {lb("A", 10.2), lb("A", 9.8)});
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].label == 1);
}

TEST_CASE("precision, recall and F") {
    const auto r = evaluate({pk("A", 1), pk("A", 2), pk("A", 3)}, {lb("A", 1), lb("A", 2), lb("A", 3), lb("A", 4)});
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 0.75);
    CHECK(r.f_score == doctest::Approx(6.0 / 7.0));
    const auto none = evaluate({}, {lb("A", 1)});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f_score == 0.0);
    const auto all = evaluate({pk("A", 1), pk("B", 1)}, {lb("A", 1), lb("B", 1)});
    CHECK(all.f_score == 1.0);
    CHECK(f_score(0.0, 0.0) == 0.0);
}

TEST_CASE("greedy matching is maximal and one-to-one on random inputs") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto [p, l] = random_sets(s);
        const auto m = match_picks(p, l, 0.4);
        std::set<std::size_t> ps, ls;
        for (const auto& pr : m.pairs) {
            CHECK(ps.insert(pr.pick).second);
            CHECK(ls.insert(pr.label).second);
            CHECK(p[pr.pick].station_id == l[pr.label].station_id);
            CHECK(std::fabs(pr.dt_s) < 0.4);
        }
        CHECK(m.pairs.size() + m.unmatched_picks.size() == p.size());
        CHECK(m.pairs.size() + m.unmatched_labels.size() == l.size());
        for (auto i : m.unmatched_picks)
            for (auto j : m.unmatched_labels) {
                if (p[i].station_id != l[j].station_id) continue;
                CHECK(std::abs(static_cast<double>(p[i].time_us - l[j].time_us)) >= 0.4e6);
            }
        // result does not depend on input order
        auto p2 = p;
        std::reverse(p2.begin(), p2.end());
        CHECK(match_picks(p2, l, 0.4).pairs.size() == m.pairs.size());
    }
}

TEST_CASE("tolerance sweep is monotone and starts at zero") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto [p, l] = random_sets(100 + s);
        const auto sweep = tolerance_sweep(p, l, parse_sweep_grid("0:1:0.05"));
        REQUIRE(sweep.size() == 21);
        CHECK(sweep.front().precision == 0.0);
        CHECK(sweep.front().recall == 0.0);
        for (std::size_t i = 1; i < sweep.size(); ++i) {
            CHECK(sweep[i].precision >= sweep[i - 1].precision);
            CHECK(sweep[i].recall >= sweep[i - 1].recall);
        }
    }
    CHECK_THROWS(tolerance_sweep({}, {}, {0.5, 0.1}));
}

TEST_CASE("sweep grid parsing") {
    const auto g = parse_sweep_grid("0.1:0.5:0.1");
    REQUIRE(g.size() == 5);
    CHECK(g.back() == doctest::Approx(0.5));
    CHECK_THROWS(parse_sweep_grid("0:1"));
    CHECK_THROWS(parse_sweep_grid("1:0:0.1"));
    CHECK_THROWS(parse_sweep_grid("0:1:0"));
}

TEST_CASE("k-means recovers separated groups and handles k = n") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<int> truth;
        const auto m = four_groups(seed, truth);
        const auto r = kmeans(m, 4, seed);
        CHECK(adjusted_rand_index(r.assignment, truth) == 1.0);
        CHECK(r.assignment[0] == 0);  // canonical numbering
    }
    std::vector<int> truth;
    const auto m = four_groups(9, truth);
    const auto all = kmeans(m, m.rows(), 1);
    CHECK(all.wcss == 0.0);
    CHECK(std::set<int>(all.assignment.begin(), all.assignment.end()).size() == m.rows());
    CHECK(kmeans(m, 4, 1).wcss == kmeans(m, 4, 2).wcss);
    CHECK_THROWS(kmeans(m, m.rows() + 1, 0));
}

TEST_CASE("adjusted rand index") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2}, b{5, 5, 3, 3, 9, 9}, c{0, 1, 0, 1, 0, 1};
    CHECK(adjusted_rand_index(a, b) == 1.0);
    CHECK(adjusted_rand_index(a, c) < 0.1);
}

TEST_CASE("station weight clustering from bundles") {
    std::vector<int> truth;
    const auto w = four_groups(3, truth);
    std::map<std::string, ModelBundle> bundles;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        ModelBundle b;
        b.meta_weights.assign(w.row(i).begin(), w.row(i).end());
        char id[8];
        std::snprintf(id, sizeof id, "ST%02zu", i);
        bundles.emplace(id, b);
    }
    const auto cl = cluster_station_weights(bundles, 4, 0);
    CHECK(adjusted_rand_index(cl.cluster, truth) == 1.0);
    CHECK(cl.stations.front() == "ST00");
    CHECK_THROWS(cluster_station_weights(bundles, 17, 0));
}

TEST_CASE("report document schema") {
    EvalDocument doc;
    doc.folds = {{1.0, 0.5, 2.0 / 3.0}};
    doc.mean = doc.folds[0];
    doc.sweep = {{0.4, 0.9, 0.8}};
    StationClusters cl;
    cl.stations = {"A", "B"};
    cl.weights = Matrix(2, 2, 1.0);
    cl.cluster = {0, 1};
    doc.clusters = cl;
    const auto j = nlohmann::json::parse(doc.to_json());
    CHECK(j["folds"][0]["precision"] == 1.0);
    CHECK(j["folds"][0].contains("f"));
    CHECK(j["mean"]["recall"] == 0.5);
    CHECK(j["sweep"][0]["tol"] == 0.4);
    CHECK(j["sweep"][0]["p"] == 0.9);
    CHECK(j["sweep"][0]["r"] == 0.8);
    CHECK(j["clusters"]["assignment"]["B"] == 1);
    CHECK(j["clusters"]["weights"].size() == 2);
}

TEST_CASE("feature table labels follow the matching rule") {
    SynthConfig sc;
    sc.n_stations = 2;
    sc.duration_s = 300.0;
    sc.event_rate_per_hour = 60.0;
    sc.snr_min = 20.0;
    sc.snr_max = 40.0;
    sc.seed = 3;
    const auto c = gen_corpus(sc);
    const auto& b = c.blocks[0];
    FeatureConfig fc;
    fc.post_s = 5.0;
    std::vector<Pick> cands;
    for (const auto& l : b.labels) cands.push_back({l.station_id, l.time_us + 100'000});   // 0.1 s late: positive
    for (const auto& l : b.labels) cands.push_back({l.station_id, l.time_us + 2'000'000}); // 2 s late: negative
    cands.push_back({b.streams[0].station_id(), b.streams[0].start_us()});                  // no window: skipped
    const auto t = build_feature_table(b.streams, cands, b.labels, fc);
    CHECK(t.rows() == 2 * b.labels.size());
    CHECK(std::count(t.label.begin(), t.label.end(), 1) == static_cast<long>(b.labels.size()));
    CHECK(t.names.size() == 679);
    CHECK(std::is_sorted(t.time_us.begin(), t.time_us.begin() + static_cast<long>(t.rows() / 2)));
}

TEST_CASE("leave-one-block-out cross-validation") {
    SynthConfig sc;
    sc.n_stations = 3;
    sc.n_blocks = 3;
    sc.duration_s = 600.0;
    sc.event_rate_per_hour = 60.0;
    sc.snr_min = 15.0;
    sc.snr_max = 60.0;
    sc.seed = 8;
    auto c = gen_corpus(sc);
    KFoldOptions opt;
    const auto r = kfold_by_block(c.blocks, c.stations, opt);
    REQUIRE(r.folds.size() == 3);
    double lo = 1.0, hi = 0.0;
    for (const auto& f : r.folds) {
        lo = std::min(lo, f.report.f_score);
        hi = std::max(hi, f.report.f_score);
    }
    CHECK(r.mean_f >= lo);
    CHECK(r.mean_f <= hi);

    // fold identity comes from the tag, not the position
    std::reverse(c.blocks.begin(), c.blocks.end());
    const auto again = kfold_by_block(c.blocks, c.stations, opt);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(again.folds[i].tag == r.folds[i].tag);
        CHECK(again.folds[i].report.f_score == r.folds[i].report.f_score);
    }

    auto empty = c.blocks;
    empty[1].labels.clear();
    CHECK_THROWS_WITH(kfold_by_block(empty, c.stations, opt), doctest::Contains("no positive labels"));
}

TEST_CASE("transfer from regime A to regime B runs") {
    SynthConfig a;
    a.n_stations = 3;
    a.duration_s = 600.0;
    a.event_rate_per_hour = 60.0;
    a.seed = 2;
    auto b = SynthConfig::regime_b();
    b.n_stations = 3;
    b.stations = synth_stations(a);
    b.duration_s = 600.0;
    b.event_rate_per_hour = 60.0;
    b.seed = 3;
    const auto ca = gen_corpus(a), cb = gen_corpus(b);
    const auto fold = train_and_test({&ca.blocks[0]}, cb.blocks[0], ca.stations, {});
    CHECK(fold.report.precision >= 0.0);
    CHECK(fold.report.recall <= 1.0);
    CHECK(fold.train_rows > 0);
}

}
