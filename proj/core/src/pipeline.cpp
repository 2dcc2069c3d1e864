#include "qpk/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

#include "json.hpp"
#include "qpk/parallel.hpp"

namespace qpk {

void PipelineConfig::validate() const {
    trigger.validate();
    feature.validate();
    refiner.validate();
    if (!(stack_threshold > 0.0 && stack_threshold < 1.0)) throw Error("pipeline: stack_threshold must lie in (0, 1)");
    if (!(chunk_s > 0.0)) throw Error("pipeline: chunk_s must be positive");
    if (refiner.aic_half_window_s >= feature.pre_s || refiner.aic_half_window_s >= feature.post_s) {
        throw Error("pipeline: AIC window must fit inside the feature window");
    }
}

PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
    PipelineConfig c;
    c.trigger.s1 = kv.get_double("trigger.s1", c.trigger.s1);
    c.trigger.s2 = kv.get_double("trigger.s2", c.trigger.s2);
    c.trigger.t_up_s = kv.get_double("trigger.t_up_s", c.trigger.t_up_s);
    c.trigger.lta_decay_s = kv.get_double("trigger.lta_decay_s", c.trigger.lta_decay_s);
    c.trigger.refractory_s = kv.get_double("trigger.refractory_s", c.trigger.refractory_s);
    c.trigger.bands = kv.get_bands("trigger.bands", c.trigger.bands);
    c.feature.pre_s = kv.get_double("feature.pre_s", c.feature.pre_s);
    c.feature.post_s = kv.get_double("feature.post_s", c.feature.post_s);
    c.stack_threshold = kv.get_double("classifier.threshold", c.stack_threshold);
    c.refiner.aic_half_window_s = kv.get_double("refiner.aic_half_window_s", c.refiner.aic_half_window_s);
    c.refiner.vp_km_s = kv.get_double("refiner.vp_km_s", c.refiner.vp_km_s);
    c.refiner.min_stations = static_cast<int>(kv.get_int("refiner.min_stations", c.refiner.min_stations));
    c.refiner.guard_s = kv.get_double("refiner.guard_s", c.refiner.guard_s);
    c.refiner.low_contrast_range = kv.get_double("refiner.low_contrast_range", c.refiner.low_contrast_range);
    c.chunk_s = kv.get_double("pipeline.chunk_s", c.chunk_s);
    kv.reject_unknown();
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    return pipeline_config_from(KeyValueConfig::parse_file(path));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

class StationProcessor {
public:
    StationProcessor(const PipelineConfig& cfg, const ModelBundle* bundle, const FeatureExtractor* fx,
                     const PipelineOptions& opt, std::string station, double rate, TimeUs start)
        : cfg_(cfg),
          bundle_(bundle),
          fx_(fx),
          opt_(opt),
          clock_{std::move(station), Channel::Z, rate, start, {}},
          detector_(cfg.trigger, clock_.station_id, rate, start),
          pre_n_(std::llround(cfg.feature.pre_s * rate)),
          count_n_(static_cast<std::int64_t>(window_samples(cfg.feature, rate))),
          lookback_n_(pre_n_ + std::llround(cfg.trigger.t_up_s * rate) + 2) {}

    const std::string& station() const { return clock_.station_id; }
    double rate() const { return clock_.sample_rate_hz; }
    TimeUs delivered_us() const { return clock_.time_of(seen_); }
    const StageCounts& counts() const { return counts_; }
    const StageTimes& times() const { return times_; }

    std::vector<Pick> ingest(const TriTrace& chunk) {
        if (chunk.station_id() != clock_.station_id || chunk.sample_rate_hz() != clock_.sample_rate_hz) {
            throw Error("pipeline: chunk does not belong to stream '" + clock_.station_id + "'");
        }
        if (chunk.start_us() != delivered_us()) {
            throw Error("pipeline: chunk for '" + clock_.station_id + "' is not contiguous with previous data");
        }
        for (int c = 0; c < 3; ++c) {
            const auto& s = chunk.channel(static_cast<Channel>(c)).samples;
            buf_[c].insert(buf_[c].end(), s.begin(), s.end());
        }
        seen_ += chunk.size();
        counts_.samples += chunk.size();

        const auto t0 = Clock::now();
        auto triggers = detector_.feed(chunk.z().samples);
        if (opt_.collect_timing) times_.trigger_s += seconds_since(t0);
        counts_.candidates += triggers.size();
        pending_.insert(pending_.end(), triggers.begin(), triggers.end());

        std::vector<Pick> out;
        process_ready(out);
        trim();
        return out;
    }

    void finish() {
        counts_.dropped_edge += pending_.size();
        pending_.clear();
    }

private:
    std::int64_t first_of(const Pick& p) const { return clock_.index_of(p.time_us) - pre_n_; }

    void process_ready(std::vector<Pick>& out) {
        while (!pending_.empty()) {
            const Pick cand = pending_.front();
            const std::int64_t first = first_of(cand);
            if (first < 0) {
                ++counts_.dropped_edge;
                pending_.pop_front();
                continue;
            }
            if (first + count_n_ > static_cast<std::int64_t>(seen_)) break;
            pending_.pop_front();
            if (auto p = process(cand, static_cast<std::uint64_t>(first))) out.push_back(std::move(*p));
        }
    }

    std::optional<Pick> process(const Pick& cand, std::uint64_t first) {
        const auto off = static_cast<std::ptrdiff_t>(first - buf_first_);
        std::array<std::vector<double>, 3> ch;
        for (int c = 0; c < 3; ++c) ch[c].assign(buf_[c].begin() + off, buf_[c].begin() + off + count_n_);
        const TriTrace win(clock_.station_id, clock_.sample_rate_hz, clock_.time_of(first), std::move(ch[0]),
                           std::move(ch[1]), std::move(ch[2]));

        Pick pick = cand;
        if (!opt_.bypass_classifier) {
            const auto t0 = Clock::now();
            const auto fv = fx_->assemble(win);
            pick.confidence = confidence(*bundle_, fv, opt_.classifier_workers);
            if (opt_.collect_timing) times_.classifier_s += seconds_since(t0);
            if (!accept_confidence(pick.confidence, cfg_.stack_threshold)) return std::nullopt;
            pick = pick.advanced(Stage::Classified);
        }
        ++counts_.classified;

        const auto t0 = Clock::now();
        const auto r = refine_pick(win, pick, cfg_.refiner);
        if (opt_.collect_timing) times_.refiner_s += seconds_since(t0);
        if (r.status != RefineStatus::Refined) ++counts_.low_contrast;
        return r.pick;
    }

    void trim() {
        auto keep = static_cast<std::int64_t>(seen_) - lookback_n_;
        for (const auto& p : pending_) keep = std::min(keep, first_of(p));
        if (keep <= static_cast<std::int64_t>(buf_first_)) return;
        const auto drop = static_cast<std::size_t>(keep - static_cast<std::int64_t>(buf_first_));
        if (drop < 4096 && drop * 2 < buf_[0].size()) return;
        for (auto& b : buf_) b.erase(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(drop));
        buf_first_ += drop;
    }

    const PipelineConfig& cfg_;
    const ModelBundle* bundle_;
    const FeatureExtractor* fx_;
    const PipelineOptions& opt_;
    Trace clock_;
    TriggerDetector detector_;
    std::int64_t pre_n_, count_n_, lookback_n_;
    std::array<std::vector<double>, 3> buf_;
    std::uint64_t buf_first_ = 0;  // absolute index of buf_[c][0]
    std::uint64_t seen_ = 0;
    std::deque<Pick> pending_;
    StageCounts counts_;
    StageTimes times_;
};

bool time_less(const Pick& a, const Pick& b) {
    if (a.time_us != b.time_us) return a.time_us < b.time_us;
    return a.station_id < b.station_id;
}

}  // namespace

struct Pipeline::Impl {
    PipelineConfig cfg;
    std::shared_ptr<const ModelBundle> bundle;
    std::vector<Station> catalog;
    PipelineOptions opt;
    std::optional<FeatureExtractor> fx;
    StreamingAssociator assoc;
    std::vector<std::unique_ptr<StationProcessor>> procs;
    std::map<std::string, std::size_t> proc_index;
    std::vector<Pick> held;  // kept by association, waiting for their finalization time
    std::vector<Emission> emissions;
    TimeUs hold_us = 0;
    bool finished = false;

    Impl(PipelineConfig c, std::shared_ptr<const ModelBundle> b, std::vector<Station> cat, PipelineOptions o)
        : cfg(std::move(c)), bundle(std::move(b)), catalog(std::move(cat)), opt(o), assoc(catalog, cfg.refiner) {
        cfg.validate();
        if (!opt.bypass_classifier) {
            if (!bundle) throw Error("pipeline: a model bundle is required unless the classifier is bypassed");
            if (std::abs(bundle->post_s - cfg.feature.post_s) > 1e-9) {
                throw Error("pipeline: bundle post window does not match feature.post_s");
            }
            fx.emplace(cfg.feature);
            if (*fx->names() != bundle->feature_names) throw Error("pipeline: bundle features do not match config");
        }
        hold_us = seconds_to_us(cfg.feature.post_s + cfg.refiner.aic_half_window_s);
    }

    TimeUs delivered() const {
        TimeUs t = std::numeric_limits<TimeUs>::max();
        for (const auto& p : procs) t = std::min(t, p->delivered_us());
        return t;
    }

    // Earliest onset any future pick can still have.
    TimeUs watermark() const {
        if (procs.empty()) return std::numeric_limits<TimeUs>::min();
        const double slack_s = cfg.feature.post_s + cfg.refiner.aic_half_window_s + 2.0 / procs.front()->rate();
        return delivered() - seconds_to_us(slack_s);
    }

    std::vector<Pick> release(TimeUs delivered_us, bool all) {
        std::sort(held.begin(), held.end(), time_less);
        std::vector<Pick> out;
        std::vector<Pick> keep;
        for (auto& p : held) {
            if (all || delivered_us >= p.time_us + hold_us) {
                emissions.push_back({p, delivered_us});
                out.push_back(std::move(p));
            } else {
                keep.push_back(std::move(p));
            }
        }
        held = std::move(keep);
        return out;
    }
};

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<const ModelBundle> bundle, std::vector<Station> catalog,
                   PipelineOptions opt)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(bundle), std::move(catalog), opt)) {}

Pipeline::~Pipeline() = default;

void Pipeline::add_stream(const std::string& station, double rate_hz, TimeUs start_us) {
    auto& m = *impl_;
    if (m.finished) throw Error("pipeline: already finished");
    if (m.proc_index.count(station)) throw Error("pipeline: duplicate stream for station '" + station + "'");
    if (!m.procs.empty() && m.procs.front()->rate() != rate_hz) throw Error("pipeline: stream sample rates differ");
    if (std::none_of(m.catalog.begin(), m.catalog.end(), [&](const Station& s) { return s.station_id == station; })) {
        throw Error("pipeline: station '" + station + "' is not in the catalog");
    }
    m.proc_index[station] = m.procs.size();
    m.procs.push_back(std::make_unique<StationProcessor>(m.cfg, m.bundle.get(), m.fx ? &*m.fx : nullptr, m.opt, station,
                                                         rate_hz, start_us));
}

std::vector<Pick> Pipeline::ingest(const std::vector<TriTrace>& chunks) {
    auto& m = *impl_;
    if (m.finished) throw Error("pipeline: already finished");
    std::vector<std::size_t> target(chunks.size());
    std::vector<bool> seen(m.procs.size(), false);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto it = m.proc_index.find(chunks[i].station_id());
        if (it == m.proc_index.end()) throw Error("pipeline: no stream declared for '" + chunks[i].station_id() + "'");
        if (seen[it->second]) throw Error("pipeline: two chunks for one station in a single ingest");
        seen[it->second] = true;
        target[i] = it->second;
    }
    std::vector<std::vector<Pick>> found(chunks.size());
    parallel_for(chunks.size(), m.opt.workers,
                 [&](std::size_t i) { found[i] = m.procs[target[i]]->ingest(chunks[i]); });
    for (const auto& f : found) {
        for (const auto& p : f) m.assoc.add(p);
    }
    auto kept = m.assoc.advance(m.watermark());
    m.held.insert(m.held.end(), kept.begin(), kept.end());
    return m.release(m.delivered(), false);
}

std::vector<Pick> Pipeline::finish() {
    auto& m = *impl_;
    if (m.finished) throw Error("pipeline: already finished");
    m.finished = true;
    for (auto& p : m.procs) p->finish();
    auto kept = m.assoc.finish();
    m.held.insert(m.held.end(), kept.begin(), kept.end());
    return m.release(m.procs.empty() ? 0 : m.delivered(), true);
}

PipelineResult Pipeline::result() const {
    const auto& m = *impl_;
    if (!m.finished) throw Error("pipeline: result() before finish()");
    PipelineResult r;
    std::vector<Pick> picks;
    for (const auto& e : m.emissions) picks.push_back(e.pick);
    r.picks = associate(std::move(picks), m.catalog, m.cfg.refiner);
    for (const auto& p : m.procs) {
        const auto& c = p->counts();
        r.counts.samples += c.samples;
        r.counts.candidates += c.candidates;
        r.counts.classified += c.classified;
        r.counts.dropped_edge += c.dropped_edge;
        r.counts.low_contrast += c.low_contrast;
        r.times.trigger_s += p->times().trigger_s;
        r.times.classifier_s += p->times().classifier_s;
        r.times.refiner_s += p->times().refiner_s;
    }
    r.counts.refined = r.picks.size();
    r.emissions = m.emissions;
    return r;
}

PipelineResult run_stream(const std::vector<TriTrace>& streams, std::shared_ptr<const ModelBundle> bundle,
                          const std::vector<Station>& stations, const PipelineConfig& cfg, const PipelineOptions& opt) {
    Pipeline pipe(cfg, std::move(bundle), stations, opt);
    std::size_t longest = 0;
    for (const auto& s : streams) {
        pipe.add_stream(s.station_id(), s.sample_rate_hz(), s.start_us());
        longest = std::max(longest, s.size());
    }
    if (!streams.empty()) {
        const auto chunk = static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.chunk_s * streams.front().sample_rate_hz())));
        for (std::size_t first = 0; first < longest; first += chunk) {
            std::vector<TriTrace> round;
            for (const auto& s : streams) {
                if (first < s.size()) round.push_back(s.slice(first, std::min(chunk, s.size() - first)));
            }
            pipe.ingest(round);
        }
    }
    pipe.finish();
    return pipe.result();
}

std::string BenchReport::to_json() const {
    const nlohmann::json doc = {
        {"counts",
         {{"samples", counts.samples},
          {"candidates", counts.candidates},
          {"classified", counts.classified},
          {"refined", counts.refined},
          {"dropped_edge", counts.dropped_edge}}},
        {"mean_latency_us",
         {{"trigger_per_sample", trigger_us_per_sample},
          {"classifier_per_candidate", classifier_us_per_candidate},
          {"refiner_per_pick", refiner_us_per_pick}}},
        {"parallel_workers", parallel_workers},
        {"wall_s", {{"serial", serial_wall_s}, {"parallel", parallel_wall_s}}},
        {"classifier_wall_s", {{"serial", classifier_serial_wall_s}, {"parallel", classifier_parallel_wall_s}}},
        {"parallel_matches_serial", parallel_matches_serial},
    };
    return doc.dump(2);
}

BenchReport bench(const std::vector<TriTrace>& streams, std::shared_ptr<const ModelBundle> bundle,
                  const std::vector<Station>& stations, const PipelineConfig& cfg, std::size_t parallel_workers) {
    BenchReport rep;
    rep.parallel_workers = std::max<std::size_t>(1, parallel_workers);

    PipelineOptions serial;
    serial.collect_timing = true;
    auto t0 = Clock::now();
    const auto a = run_stream(streams, bundle, stations, cfg, serial);
    rep.serial_wall_s = seconds_since(t0);

    PipelineOptions par;
    par.workers = rep.parallel_workers;
    t0 = Clock::now();
    const auto b = run_stream(streams, bundle, stations, cfg, par);
    rep.parallel_wall_s = seconds_since(t0);
    rep.parallel_matches_serial = a.picks == b.picks;

    rep.counts = a.counts;
    const auto per = [](double s, std::uint64_t n) { return n ? s * 1e6 / static_cast<double>(n) : 0.0; };
    rep.trigger_us_per_sample = per(a.times.trigger_s, a.counts.samples);
    rep.classifier_us_per_candidate = per(a.times.classifier_s, a.counts.candidates);
    rep.refiner_us_per_pick = per(a.times.refiner_s, a.counts.classified);

    // Classifier alone over every candidate window, one worker vs many.
    std::vector<TriTrace> windows;
    for (const auto& s : streams) {
        for (const auto& p : detect_triggers(s.z(), cfg.trigger)) {
            const auto first = s.index_of(p.time_us) - std::llround(cfg.feature.pre_s * s.sample_rate_hz());
            if (first >= 0 && static_cast<std::size_t>(first) + window_samples(cfg.feature, s.sample_rate_hz()) <= s.size()) {
                windows.push_back(cut_window(s, p.time_us, cfg.feature));
            }
        }
    }
    const FeatureExtractor fx(cfg.feature);
    std::vector<double> c1(windows.size()), c2(windows.size());
    t0 = Clock::now();
    for (std::size_t i = 0; i < windows.size(); ++i) c1[i] = confidence(*bundle, fx.assemble(windows[i]));
    rep.classifier_serial_wall_s = seconds_since(t0);
    t0 = Clock::now();
    parallel_for(windows.size(), rep.parallel_workers,
                 [&](std::size_t i) { c2[i] = confidence(*bundle, fx.assemble(windows[i])); });
    rep.classifier_parallel_wall_s = seconds_since(t0);
    rep.parallel_matches_serial = rep.parallel_matches_serial && c1 == c2;
    return rep;
}

}  // namespace qpk
