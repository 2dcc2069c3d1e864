#include "qpk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "csv_util.hpp"
#include "json.hpp"
#include "qpk/parallel.hpp"

namespace qpk {

Matching match_picks(const std::vector<Pick>& picks, const std::vector<LabeledArrival>& labels, double tol_s) {
    Matching m;
    m.n_picks = picks.size();
    m.n_labels = labels.size();
    m.tol_s = tol_s;

    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_station;
    for (std::size_t i = 0; i < picks.size(); ++i) by_station[picks[i].station_id].first.push_back(i);
    for (std::size_t j = 0; j < labels.size(); ++j) by_station[labels[j].station_id].second.push_back(j);

    const double tol_us = tol_s * 1e6;
    std::vector<bool> pick_used(picks.size(), false), label_used(labels.size(), false);
    for (auto& [station, idx] : by_station) {
        auto& [pi, li] = idx;
        std::sort(pi.begin(), pi.end(), [&](auto a, auto b) { return std::tie(picks[a].time_us, a) < std::tie(picks[b].time_us, b); });
        std::sort(li.begin(), li.end(), [&](auto a, auto b) { return std::tie(labels[a].time_us, a) < std::tie(labels[b].time_us, b); });

        struct Cand {
            TimeUs adt;
            std::size_t label_rank, pick_rank;
        };
        std::vector<Cand> cands;
        std::size_t lo = 0;
        for (std::size_t r = 0; r < li.size(); ++r) {
            const TimeUs t = labels[li[r]].time_us;
            while (lo < pi.size() && static_cast<double>(t - picks[pi[lo]].time_us) >= tol_us) ++lo;
            for (std::size_t q = lo; q < pi.size(); ++q) {
                const TimeUs dt = picks[pi[q]].time_us - t;
                if (static_cast<double>(dt) >= tol_us) break;
                if (static_cast<double>(std::abs(dt)) < tol_us) cands.push_back({std::abs(dt), r, q});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            return std::tie(a.adt, a.label_rank, a.pick_rank) < std::tie(b.adt, b.label_rank, b.pick_rank);
        });
        for (const auto& c : cands) {
            const auto p = pi[c.pick_rank], l = li[c.label_rank];
            if (pick_used[p] || label_used[l]) continue;
            pick_used[p] = label_used[l] = true;
            m.pairs.push_back({p, l, us_to_seconds(picks[p].time_us - labels[l].time_us)});
        }
    }
    for (std::size_t i = 0; i < picks.size(); ++i) {
        if (!pick_used[i]) m.unmatched_picks.push_back(i);
    }
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (!label_used[j]) m.unmatched_labels.push_back(j);
    }
    return m;
}

double f_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport prf(const Matching& m) {
    EvalReport r;
    const auto hits = static_cast<double>(m.pairs.size());
    r.precision = m.n_picks ? hits / static_cast<double>(m.n_picks) : 0.0;
    r.recall = m.n_labels ? hits / static_cast<double>(m.n_labels) : 0.0;
    r.f_score = f_score(r.precision, r.recall);
    r.tolerance_s = m.tol_s;
    r.matching = m;
    return r;
}

EvalReport evaluate(const std::vector<Pick>& picks, const std::vector<LabeledArrival>& labels, double tol_s) {
    return prf(match_picks(picks, labels, tol_s));
}

std::vector<SweepPoint> tolerance_sweep(const std::vector<Pick>& picks, const std::vector<LabeledArrival>& labels,
                                        const std::vector<double>& grid) {
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error("tolerance_sweep: grid must ascend");
    std::vector<SweepPoint> out;
    for (double tol : grid) {
        const auto r = evaluate(picks, labels, tol);
        if (!out.empty() && (r.precision < out.back().precision || r.recall < out.back().recall)) {
            throw std::logic_error("tolerance_sweep: curve decreased");
        }
        out.push_back({tol, r.precision, r.recall});
    }
    return out;
}

std::vector<double> parse_sweep_grid(const std::string& spec) {
    const auto parts = detail::split_csv(spec, ':');
    if (parts.size() != 3) throw FormatError("sweep grid must be start:stop:step");
    const double a = detail::parse_double(parts[0], "sweep start");
    const double b = detail::parse_double(parts[1], "sweep stop");
    const double step = detail::parse_double(parts[2], "sweep step");
    if (!(step > 0.0) || b < a) throw FormatError("sweep grid needs step > 0 and stop >= start");
    std::vector<double> grid;
    const auto n = static_cast<long long>(std::floor((b - a) / step + 0.5));
    for (long long i = 0; i <= n; ++i) grid.push_back(a + static_cast<double>(i) * step);
    return grid;
}

std::vector<Pick> picks_of(const std::vector<AssociatedPick>& picks) {
    std::vector<Pick> out;
    out.reserve(picks.size());
    for (const auto& a : picks) out.push_back(a.pick);
    return out;
}

// ---- training tables --------------------------------------------------------

std::vector<Pick> auto_candidates(const std::vector<TriTrace>& streams, const TriggerConfig& cfg) {
    std::vector<Pick> out;
    for (const auto& s : streams) {
        auto t = detect_triggers(s.z(), cfg);
        out.insert(out.end(), t.begin(), t.end());
    }
    sort_picks(out);
    return out;
}

FeatureTable build_feature_table(const std::vector<TriTrace>& streams, const std::vector<Pick>& candidates,
                                 const std::vector<LabeledArrival>& labels, const FeatureConfig& cfg, double tol_s,
                                 std::size_t workers) {
    std::map<std::string, const TriTrace*> by_station;
    for (const auto& s : streams) {
        if (!by_station.emplace(s.station_id(), &s).second) throw Error("feature table: duplicate stream '" + s.station_id() + "'");
    }
    std::vector<Pick> cands;
    for (const auto& c : candidates) {
        const auto it = by_station.find(c.station_id);
        if (it == by_station.end()) throw Error("feature table: no stream for candidate station '" + c.station_id + "'");
        const auto& s = *it->second;
        const auto first = s.index_of(c.time_us) - std::llround(cfg.pre_s * s.sample_rate_hz());
        if (first < 0 || static_cast<std::size_t>(first) + window_samples(cfg, s.sample_rate_hz()) > s.size()) continue;
        cands.push_back(c);
    }
    sort_picks(cands);

    std::vector<int> label(cands.size(), 0);
    for (const auto& pair : match_picks(cands, labels, tol_s).pairs) label[pair.pick] = 1;

    const FeatureExtractor fx(cfg);
    std::vector<FeatureVector> rows(cands.size());
    parallel_for(cands.size(), workers, [&](std::size_t i) {
        rows[i] = fx.assemble(cut_window(*by_station.at(cands[i].station_id), cands[i].time_us, cfg));
    });

    FeatureTable table;
    table.names = *fx.names();
    table.x = Matrix(0, table.names.size());
    for (std::size_t i = 0; i < cands.size(); ++i) table.append(cands[i].station_id, cands[i].time_us, label[i], rows[i].values);
    return table;
}

// ---- cross-validation -------------------------------------------------------

namespace {

FeatureTable concat(const std::vector<const FeatureTable*>& parts) {
    FeatureTable out;
    for (const auto* t : parts) {
        if (out.names.empty()) {
            out.names = t->names;
            out.x = Matrix(0, t->names.size());
        }
        for (std::size_t i = 0; i < t->rows(); ++i) out.append(t->station[i], t->time_us[i], t->label[i], t->x.row(i));
    }
    return out;
}

FoldReport run_fold(const FeatureTable& train, const Block& test, const std::vector<Station>& stations,
                    const KFoldOptions& opt) {
    auto stack = opt.stack;
    stack.workers = std::max(stack.workers, opt.workers);
    auto bundle = std::make_shared<const ModelBundle>(train_stack(train, stack));
    PipelineOptions po;
    po.workers = opt.workers;
    const auto res = run_stream(test.streams, bundle, stations, opt.pipeline, po);
    return {test.tag, evaluate(picks_of(res.picks), test.labels, opt.tol_s), train.rows()};
}

FeatureTable block_table(const Block& b, const KFoldOptions& opt) {
    if (b.labels.empty()) throw Error("kfold: block " + std::to_string(b.tag) + " has no positive labels");
    return build_feature_table(b.streams, auto_candidates(b.streams, opt.pipeline.trigger), b.labels, opt.pipeline.feature,
                               opt.tol_s, opt.workers);
}

}  // namespace

FoldReport train_and_test(const std::vector<const Block*>& train, const Block& test, const std::vector<Station>& stations,
                          const KFoldOptions& opt) {
    std::vector<FeatureTable> tables;
    for (const auto* b : train) tables.push_back(block_table(*b, opt));
    std::vector<const FeatureTable*> parts;
    for (const auto& t : tables) parts.push_back(&t);
    return run_fold(concat(parts), test, stations, opt);
}

KFoldResult kfold_by_block(const std::vector<Block>& blocks, const std::vector<Station>& stations,
                           const KFoldOptions& opt) {
    if (blocks.size() < 2) throw Error("kfold: need at least two blocks");
    std::vector<const Block*> order;
    for (const auto& b : blocks) order.push_back(&b);
    std::sort(order.begin(), order.end(), [](const Block* a, const Block* b) { return a->tag < b->tag; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->tag == order[i - 1]->tag) throw Error("kfold: duplicate block tag");
    }
    std::vector<FeatureTable> tables;
    for (const auto* b : order) tables.push_back(block_table(*b, opt));

    KFoldResult out;
    for (std::size_t f = 0; f < order.size(); ++f) {
        std::vector<const FeatureTable*> parts;
        for (std::size_t j = 0; j < order.size(); ++j) {
            if (j != f) parts.push_back(&tables[j]);
        }
        out.folds.push_back(run_fold(concat(parts), *order[f], stations, opt));
    }
    for (const auto& f : out.folds) {
        out.mean_precision += f.report.precision;
        out.mean_recall += f.report.recall;
        out.mean_f += f.report.f_score;
    }
    const auto k = static_cast<double>(out.folds.size());
    out.mean_precision /= k;
    out.mean_recall /= k;
    out.mean_f /= k;
    return out;
}

// ---- report ---------------------------------------------------------------

std::string EvalDocument::to_json() const {
    using nlohmann::json;
    const auto prf_json = [](const ReportPrf& r) { return json{{"precision", r.precision}, {"recall", r.recall}, {"f", r.f}}; };
    json doc;
    doc["folds"] = json::array();
    for (const auto& f : folds) doc["folds"].push_back(prf_json(f));
    doc["mean"] = prf_json(mean);
    doc["sweep"] = json::array();
    for (const auto& s : sweep) doc["sweep"].push_back({{"tol", s.tol_s}, {"p", s.precision}, {"r", s.recall}});
    doc["clusters"] = json::object();
    if (clusters) {
        json assign = json::object();
        json weights = json::array();
        for (std::size_t i = 0; i < clusters->stations.size(); ++i) {
            assign[clusters->stations[i]] = clusters->cluster[i];
            const auto row = clusters->weights.row(i);
            weights.push_back(std::vector<double>(row.begin(), row.end()));
        }
        doc["clusters"] = {{"assignment", assign}, {"weights", weights}, {"stations", clusters->stations}, {"wcss", clusters->wcss}};
    }
    return doc.dump(2);
}

}  // namespace qpk
