#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qpk/config.hpp"
#include "qpk/features.hpp"
#include "qpk/refiner.hpp"
#include "qpk/stacking.hpp"
#include "qpk/trigger.hpp"

namespace qpk {

struct PipelineConfig {
    TriggerConfig trigger;
    FeatureConfig feature;
    double stack_threshold = 0.5;
    RefinerConfig refiner;
    double chunk_s = 60.0;

    void validate() const;
};

/**
 * Keys (all optional):
 *   [trigger]    s1, s2, t_up_s, lta_decay_s, refractory_s, bands = "2.5-5, 5-10, 10-20"
 *   [feature]    pre_s, post_s
 *   [classifier] threshold
 *   [refiner]    aic_half_window_s, vp_km_s, min_stations, guard_s, low_contrast_range
 *   [pipeline]   chunk_s
 * Unknown keys are rejected.
 */
PipelineConfig pipeline_config_from(const KeyValueConfig& kv);
PipelineConfig load_pipeline_config(const std::string& path);

struct PipelineOptions {
    // Trigger + Refiner only: every candidate is refined without featurising.
    bool bypass_classifier = false;
    // Station workers.
    std::size_t workers = 1;
    // Base-model fan-out inside each classification.
    std::size_t classifier_workers = 1;
    bool collect_timing = false;
};

struct StageCounts {
    std::uint64_t samples = 0;      // vertical samples ingested
    std::uint64_t candidates = 0;   // triggers
    std::uint64_t classified = 0;   // accepted by the classifier
    std::uint64_t refined = 0;      // emitted after association pruning
    std::uint64_t dropped_edge = 0; // candidates without full window at end of stream
    std::uint64_t low_contrast = 0;
};

struct StageTimes {
    double trigger_s = 0.0;
    double classifier_s = 0.0;
    double refiner_s = 0.0;
};

// Records when a pick left the pipeline: the minimum delivered time over all
// stations at the moment of emission.
struct Emission {
    Pick pick;
    TimeUs delivered_us = 0;
};

struct PipelineResult {
    std::vector<AssociatedPick> picks;  // sorted by time
    StageCounts counts;
    StageTimes times;
    std::vector<Emission> emissions;    // in emission order
};

/**
 * Streaming driver over a fixed station set.
 *
 * Each ingest() call delivers the next contiguous chunk for any subset of
 * stations; stations are processed concurrently and joined before
 * association. A pick with onset t is emitted only after every station has
 * delivered data up to t + post_s + aic_half_window_s and is never revised.
 */
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, std::shared_ptr<const ModelBundle> bundle, std::vector<Station> catalog,
             PipelineOptions opt = {});
    ~Pipeline();
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    // Declares a stream; must precede its first chunk.
    void add_stream(const std::string& station, double rate_hz, TimeUs start_us);
    std::vector<Pick> ingest(const std::vector<TriTrace>& chunks);
    std::vector<Pick> finish();

    // Valid after finish().
    PipelineResult result() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Runs whole streams through a Pipeline in cfg.chunk_s chunks.
PipelineResult run_stream(const std::vector<TriTrace>& streams, std::shared_ptr<const ModelBundle> bundle,
                          const std::vector<Station>& stations, const PipelineConfig& cfg,
                          const PipelineOptions& opt = {});

struct BenchReport {
    StageCounts counts;
    double trigger_us_per_sample = 0.0;
    double classifier_us_per_candidate = 0.0;
    double refiner_us_per_pick = 0.0;
    std::size_t parallel_workers = 1;
    double serial_wall_s = 0.0;
    double parallel_wall_s = 0.0;
    // Classifier-only wall time over every candidate window.
    double classifier_serial_wall_s = 0.0;
    double classifier_parallel_wall_s = 0.0;
    bool parallel_matches_serial = false;

    std::string to_json() const;
};

BenchReport bench(const std::vector<TriTrace>& streams, std::shared_ptr<const ModelBundle> bundle,
                  const std::vector<Station>& stations, const PipelineConfig& cfg, std::size_t parallel_workers);

}  // namespace qpk
