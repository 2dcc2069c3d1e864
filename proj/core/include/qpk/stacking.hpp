#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qpk/basemodels.hpp"
#include "qpk/features.hpp"

namespace qpk {

struct StackConfig {
    std::size_t inner_folds = 5;
    double threshold = 0.5;
    std::uint64_t seed = 0;
    double meta_l2 = 1e-6;
    // Worker threads for (fold x model) training and base-model scoring.
    std::size_t workers = 1;

    void validate() const;
};

// Per-feature z-scoring fitted on training rows only.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;  // population std, 1 where a feature is constant

    static Standardizer fit(const Matrix& x);
    std::vector<double> apply(std::span<const double> row) const;
    Matrix apply(const Matrix& x) const;
};

// A named base-model trainer.
struct Learner {
    std::string name;
    std::function<TrainedModel(const Dataset&, std::uint64_t seed)> fit;
};

std::vector<Learner> default_learners();

/// Fold id in [0, k) per row; each class is shuffled and dealt round-robin.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed);

/**
 * Trained ensemble: standardiser, base models refitted on all rows, and the
 * logistic meta-model over their scores.
 */
struct ModelBundle {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::vector<std::string> feature_names;
    double post_s = 20.0;
    StackConfig config;
    Standardizer standardizer;
    std::vector<std::string> base_names;
    std::vector<TrainedModel> base_models;
    std::vector<double> meta_weights;
    double meta_intercept = 0.0;

    // Base-model scores for a raw (unstandardised) feature row.
    std::vector<double> base_scores(std::span<const double> raw, std::size_t workers = 1) const;
    double confidence(std::span<const double> raw, std::size_t workers = 1) const;
    double combine(std::span<const double> scores) const;

    std::string to_json() const;
    static ModelBundle from_json(const std::string& text);
    void save(const std::string& path) const;
    static ModelBundle load(const std::string& path);
};

// Out-of-fold bookkeeping returned by train_stack on request.
struct StackTrace {
    Matrix judgements;                     // n x models, out-of-fold scores
    std::vector<std::size_t> fold_of_row;
    std::vector<std::vector<std::size_t>> train_rows;  // per fold, rows the base models saw
};

ModelBundle train_stack(const Dataset& data, std::vector<std::string> feature_names, const StackConfig& cfg,
                        const std::vector<Learner>& learners = default_learners(), StackTrace* trace = nullptr);

/// Convenience over a feature table; `post_s` is inferred from the column count.
ModelBundle train_stack(const FeatureTable& table, const StackConfig& cfg);

/// Checks the vector's names against the bundle before scoring.
double confidence(const ModelBundle& bundle, const FeatureVector& fv, std::size_t workers = 1);

/// Strictly greater than the threshold.
bool classify(const ModelBundle& bundle, const FeatureVector& fv, double threshold);
inline bool accept_confidence(double confidence, double threshold) { return confidence > threshold; }

}  // namespace qpk
