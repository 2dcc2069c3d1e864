#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpk/matrix.hpp"
#include "qpk/pipeline.hpp"
#include "qpk/stacking.hpp"
#include "qpk/waveform.hpp"

namespace qpk {

// ---- matching and metrics --------------------------------------------------

struct MatchedPair {
    std::size_t pick;   // index into the picks argument
    std::size_t label;  // index into the labels argument
    double dt_s;        // pick - label
};

struct Matching {
    std::vector<MatchedPair> pairs;  // in acceptance order
    std::vector<std::size_t> unmatched_picks;
    std::vector<std::size_t> unmatched_labels;
    std::size_t n_picks = 0;
    std::size_t n_labels = 0;
    double tol_s = 0.4;
};

/**
 * One-to-one matching per station. Pairs with |dt| < tol_s are visited in
 * ascending |dt| (ties: earlier label, then earlier pick) and accepted when
 * both ends are still free.
 */
Matching match_picks(const std::vector<Pick>& picks, const std::vector<LabeledArrival>& labels, double tol_s = 0.4);

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    double tolerance_s = 0.4;
    Matching matching;
};

// Empty denominators give 0.
EvalReport prf(const Matching& m);
EvalReport evaluate(const std::vector<Pick>& picks, const std::vector<LabeledArrival>& labels, double tol_s = 0.4);
double f_score(double precision, double recall);

struct SweepPoint {
    double tol_s;
    double precision;
    double recall;
};

// Grid must ascend. Throws std::logic_error if either curve ever decreases.
std::vector<SweepPoint> tolerance_sweep(const std::vector<Pick>& picks, const std::vector<LabeledArrival>& labels,
                                        const std::vector<double>& grid);

/// "start:stop:step" inclusive of stop (within half a step).
std::vector<double> parse_sweep_grid(const std::string& spec);

std::vector<Pick> picks_of(const std::vector<AssociatedPick>& picks);

// ---- training tables --------------------------------------------------------

/**
 * Featurises candidate times on each stream. Candidates within tol_s of a
 * label (one-to-one, as in match_picks) are positive. Candidates lacking a
 * full window are skipped. Rows are in (station, time) order.
 */
FeatureTable build_feature_table(const std::vector<TriTrace>& streams, const std::vector<Pick>& candidates,
                                 const std::vector<LabeledArrival>& labels, const FeatureConfig& cfg,
                                 double tol_s = 0.4, std::size_t workers = 1);

/// Candidates from the streaming trigger on every stream.
std::vector<Pick> auto_candidates(const std::vector<TriTrace>& streams, const TriggerConfig& cfg);

// ---- cross-validation -------------------------------------------------------

struct Block {
    int tag = 0;
    std::vector<TriTrace> streams;
    std::vector<LabeledArrival> labels;
};

struct FoldReport {
    int tag = 0;
    EvalReport report;
    std::size_t train_rows = 0;
};

struct KFoldResult {
    std::vector<FoldReport> folds;  // ascending tag
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f = 0.0;
};

struct KFoldOptions {
    PipelineConfig pipeline;
    StackConfig stack;
    double tol_s = 0.4;
    std::size_t workers = 1;
};

/**
 * Leave-one-block-out: for each block, trains on the candidates of all other
 * blocks, runs the pipeline on the held-out block and evaluates it.
 */
KFoldResult kfold_by_block(const std::vector<Block>& blocks, const std::vector<Station>& stations,
                           const KFoldOptions& opt);

/// Train on `train` blocks, run and evaluate on `test`.
FoldReport train_and_test(const std::vector<const Block*>& train, const Block& test, const std::vector<Station>& stations,
                          const KFoldOptions& opt);

// ---- station weight clustering ----------------------------------------------

struct KMeansResult {
    std::vector<int> assignment;  // labels numbered by first appearance
    Matrix centroids;
    double wcss = 0.0;
};

/// Lloyd iterations from k-means++ seeds; best of `restarts` by WCSS.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 50,
                    std::size_t max_iter = 300);

struct StationClusters {
    std::vector<std::string> stations;
    Matrix weights;  // one row of meta-weights per station
    std::vector<int> cluster;
    double wcss = 0.0;
};

StationClusters cluster_station_weights(const std::map<std::string, ModelBundle>& bundles, std::size_t k = 4,
                                        std::uint64_t seed = 0, std::size_t restarts = 50);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// ---- report ---------------------------------------------------------------

struct ReportPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

struct EvalDocument {
    std::vector<ReportPrf> folds;
    ReportPrf mean;
    std::vector<SweepPoint> sweep;
    std::optional<StationClusters> clusters;

    std::string to_json() const;
};

}  // namespace qpk
