#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qpk/matrix.hpp"

namespace qpk {

// Binary-labelled training rows.
struct Dataset {
    Matrix x;
    std::vector<int> y;  // 0 or 1

    std::size_t size() const { return x.rows(); }
    std::size_t dims() const { return x.cols(); }

    // Throws unless n >= 2, d >= 1, labels are binary and both classes occur.
    void validate_for_fit() const;

    Dataset subset(std::span<const std::size_t> rows) const;
    std::size_t positives() const;
};

enum class BaseModelKind : std::uint8_t {
    SvmLinear,
    SvmPoly,
    TreeGini,
    TreeEntropy,
    Knn,
    RandomForest,
    AdaBoost,
    LogisticRegression,
    GaussianNaiveBayes,
    Custom,  // externally supplied scorer; not serialisable
};

inline constexpr std::array<BaseModelKind, 9> kBaseModelKinds = {
    BaseModelKind::SvmLinear,   BaseModelKind::SvmPoly,  BaseModelKind::TreeGini,
    BaseModelKind::TreeEntropy, BaseModelKind::Knn,      BaseModelKind::RandomForest,
    BaseModelKind::AdaBoost,    BaseModelKind::LogisticRegression, BaseModelKind::GaussianNaiveBayes,
};

std::string_view to_string(BaseModelKind kind);
BaseModelKind base_model_kind_from_string(std::string_view name);

namespace detail {
class ModelImpl;
}

/**
 * An immutable fitted classifier. Copies share the fitted state.
 *
 * predict_proba returns a score in [0, 1] that is monotone in the model's
 * internal margin (decision value, logit, vote share, ...).
 */
class TrainedModel {
public:
    explicit TrainedModel(std::shared_ptr<const detail::ModelImpl> impl);

    BaseModelKind kind() const;
    std::size_t dims() const;
    double predict_proba(std::span<const double> x) const;
    double margin(std::span<const double> x) const;

    const detail::ModelImpl& impl() const { return *impl_; }

    // Wraps an arbitrary scorer, e.g. a test oracle.
    static TrainedModel custom(std::string name, std::size_t dims, std::function<double(std::span<const double>)> score);

private:
    std::shared_ptr<const detail::ModelImpl> impl_;
};

enum class SplitCriterion : std::uint8_t { Gini, Entropy };

struct TreeOptions {
    SplitCriterion criterion = SplitCriterion::Gini;
    int max_depth = 12;
    std::size_t min_leaf = 5;
    std::size_t max_features = 0;  // 0 = all features
};

struct ForestOptions {
    std::size_t n_trees = 100;
    std::size_t max_features = 0;  // 0 = floor(sqrt(d))
    bool bootstrap = true;
    TreeOptions tree{SplitCriterion::Gini, 12, 5, 0};
};

struct LogisticOptions {
    double l2 = 1e-4;
    int max_iter = 500;
    double tol = 1e-8;  // on the gradient norm
};

struct LinearSvmOptions {
    double c = 1.0;
    int epochs = 200;
};

struct PolySvmOptions {
    double c = 1.0;
    int degree = 3;
    double coef0 = 1.0;
    double gamma = 0.0;  // 0 = 1/d
    double tol = 1e-3;
    std::size_t max_iter_per_row = 10;
};

struct KnnOptions {
    std::size_t k = 5;
};

struct AdaBoostOptions {
    std::size_t n_estimators = 50;
};

TrainedModel fit_linear_svm(const Dataset& data, const LinearSvmOptions& opt, std::uint64_t seed);
TrainedModel fit_poly_svm(const Dataset& data, const PolySvmOptions& opt, std::uint64_t seed);
TrainedModel fit_tree(const Dataset& data, const TreeOptions& opt, std::uint64_t seed);
TrainedModel fit_forest(const Dataset& data, const ForestOptions& opt, std::uint64_t seed);
TrainedModel fit_knn(const Dataset& data, const KnnOptions& opt);
TrainedModel fit_adaboost(const Dataset& data, const AdaBoostOptions& opt);
TrainedModel fit_logistic(const Dataset& data, const LogisticOptions& opt);
TrainedModel fit_gaussian_nb(const Dataset& data);

/// Fits `kind` with its default hyperparameters; deterministic in (kind, data, seed).
TrainedModel fit(BaseModelKind kind, const Dataset& data, std::uint64_t seed);

/// Raw L2-regularised logistic regression, also used by the stacking meta-model.
struct LogisticFit {
    std::vector<double> weights;
    double intercept = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;
};
LogisticFit train_logistic(const Matrix& x, std::span<const int> y, const LogisticOptions& opt);

double sigmoid(double z);

}  // namespace qpk
