#include "qpk/basemodels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "model_impl.hpp"
#include "qpk/random.hpp"
#include "qpk/waveform.hpp"
#include "tree.hpp"

namespace qpk {

using nlohmann::json;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// log(1 + exp(a))
double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

double signed_label(int y) { return y == 1 ? 1.0 : -1.0; }

json nodes_to_json(const std::vector<detail::TreeNode>& nodes) {
    json f = json::array(), t = json::array(), l = json::array(), r = json::array(), v = json::array();
    for (const auto& n : nodes) {
        f.push_back(n.feature);
        t.push_back(n.threshold);
        l.push_back(n.left);
        r.push_back(n.right);
        v.push_back(n.value);
    }
    return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"value", v}};
}

std::vector<detail::TreeNode> nodes_from_json(const json& j) {
    const auto& f = j.at("feature");
    std::vector<detail::TreeNode> nodes(f.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = {f[i].get<std::int32_t>(), j.at("threshold")[i].get<double>(), j.at("left")[i].get<std::int32_t>(),
                    j.at("right")[i].get<std::int32_t>(), j.at("value")[i].get<double>()};
    }
    return nodes;
}

json matrix_to_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.rows() * m.cols()) throw FormatError("matrix payload size mismatch");
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(r * m.cols()), m.cols(), m.row(r).begin());
    }
    return m;
}

// ---------------------------------------------------------------------------

class LinearModel final : public detail::ModelImpl {
public:
    LinearModel(BaseModelKind kind, std::vector<double> w, double b) : kind_(kind), w_(std::move(w)), b_(b) {}
    BaseModelKind kind() const override { return kind_; }
    std::size_t dims() const override { return w_.size(); }
    double margin(std::span<const double> x) const override { return dot(w_, x) + b_; }
    json to_json() const override { return {{"weights", w_}, {"intercept", b_}}; }

private:
    BaseModelKind kind_;
    std::vector<double> w_;
    double b_;
};

class PolySvmModel final : public detail::ModelImpl {
public:
    PolySvmModel(Matrix sv, std::vector<double> coef, double b, double gamma, double coef0, int degree)
        : sv_(std::move(sv)), coef_(std::move(coef)), b_(b), gamma_(gamma), coef0_(coef0), degree_(degree) {}
    BaseModelKind kind() const override { return BaseModelKind::SvmPoly; }
    std::size_t dims() const override { return sv_.cols(); }
    double margin(std::span<const double> x) const override {
        double f = b_;
        for (std::size_t i = 0; i < sv_.rows(); ++i) f += coef_[i] * std::pow(gamma_ * dot(sv_.row(i), x) + coef0_, degree_);
        return f;
    }
    json to_json() const override {
        return {{"support_vectors", matrix_to_json(sv_)}, {"dual_coef", coef_}, {"intercept", b_},
                {"gamma", gamma_},                        {"coef0", coef0_},    {"degree", degree_}};
    }
    static std::shared_ptr<const PolySvmModel> from_json(const json& j) {
        return std::make_shared<PolySvmModel>(matrix_from_json(j.at("support_vectors")),
                                              j.at("dual_coef").get<std::vector<double>>(), j.at("intercept").get<double>(),
                                              j.at("gamma").get<double>(), j.at("coef0").get<double>(), j.at("degree").get<int>());
    }

private:
    Matrix sv_;
    std::vector<double> coef_;
    double b_, gamma_, coef0_;
    int degree_;
};

class TreeModel final : public detail::ModelImpl {
public:
    TreeModel(BaseModelKind kind, std::size_t dims, std::vector<detail::TreeNode> nodes)
        : kind_(kind), dims_(dims), nodes_(std::move(nodes)) {}
    BaseModelKind kind() const override { return kind_; }
    std::size_t dims() const override { return dims_; }
    double proba(std::span<const double> x) const override { return detail::tree_leaf(nodes_, x).value; }
    double margin(std::span<const double> x) const override { return proba(x) - 0.5; }
    json to_json() const override { return {{"dims", dims_}, {"nodes", nodes_to_json(nodes_)}}; }

private:
    BaseModelKind kind_;
    std::size_t dims_;
    std::vector<detail::TreeNode> nodes_;
};

class ForestModel final : public detail::ModelImpl {
public:
    ForestModel(std::size_t dims, std::vector<std::vector<detail::TreeNode>> trees) : dims_(dims), trees_(std::move(trees)) {}
    BaseModelKind kind() const override { return BaseModelKind::RandomForest; }
    std::size_t dims() const override { return dims_; }
    double proba(std::span<const double> x) const override {
        double s = 0.0;
        for (const auto& t : trees_) s += detail::tree_leaf(t, x).value;
        return s / static_cast<double>(trees_.size());
    }
    double margin(std::span<const double> x) const override { return proba(x) - 0.5; }
    json to_json() const override {
        json trees = json::array();
        for (const auto& t : trees_) trees.push_back(nodes_to_json(t));
        return {{"dims", dims_}, {"trees", trees}};
    }

private:
    std::size_t dims_;
    std::vector<std::vector<detail::TreeNode>> trees_;
};

// Node values hold the real-valued stump outputs h(x) = 0.5 log(p / (1 - p)).
class AdaBoostModel final : public detail::ModelImpl {
public:
    AdaBoostModel(std::size_t dims, std::vector<std::vector<detail::TreeNode>> stumps)
        : dims_(dims), stumps_(std::move(stumps)) {}
    BaseModelKind kind() const override { return BaseModelKind::AdaBoost; }
    std::size_t dims() const override { return dims_; }
    double margin(std::span<const double> x) const override {
        double f = 0.0;
        for (const auto& s : stumps_) f += detail::tree_leaf(s, x).value;
        return 2.0 * f;
    }
    json to_json() const override {
        json stumps = json::array();
        for (const auto& s : stumps_) stumps.push_back(nodes_to_json(s));
        return {{"dims", dims_}, {"stumps", stumps}};
    }

private:
    std::size_t dims_;
    std::vector<std::vector<detail::TreeNode>> stumps_;
};

class KnnModel final : public detail::ModelImpl {
public:
    KnnModel(Matrix x, std::vector<int> y, std::size_t k) : x_(std::move(x)), y_(std::move(y)), k_(k) {}
    BaseModelKind kind() const override { return BaseModelKind::Knn; }
    std::size_t dims() const override { return x_.cols(); }
    double proba(std::span<const double> q) const override {
        std::vector<std::pair<double, std::size_t>> dist(x_.rows());
        for (std::size_t i = 0; i < x_.rows(); ++i) {
            const auto r = x_.row(i);
            double s = 0.0;
            for (std::size_t c = 0; c < r.size(); ++c) s += (r[c] - q[c]) * (r[c] - q[c]);
            dist[i] = {s, i};
        }
        const std::size_t k = std::min(k_, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        double votes = 0.0;
        for (std::size_t i = 0; i < k; ++i) votes += y_[dist[i].second];
        return (votes + 0.5) / (static_cast<double>(k) + 1.0);
    }
    double margin(std::span<const double> x) const override { return proba(x) - 0.5; }
    json to_json() const override { return {{"k", k_}, {"x", matrix_to_json(x_)}, {"y", y_}}; }

private:
    Matrix x_;
    std::vector<int> y_;
    std::size_t k_;
};

class GaussianNbModel final : public detail::ModelImpl {
public:
    GaussianNbModel(double log_prior_ratio, std::vector<double> mean0, std::vector<double> var0, std::vector<double> mean1,
                    std::vector<double> var1)
        : log_prior_ratio_(log_prior_ratio),
          mean0_(std::move(mean0)),
          var0_(std::move(var0)),
          mean1_(std::move(mean1)),
          var1_(std::move(var1)) {}
    BaseModelKind kind() const override { return BaseModelKind::GaussianNaiveBayes; }
    std::size_t dims() const override { return mean0_.size(); }
    double margin(std::span<const double> x) const override {
        double m = log_prior_ratio_;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d1 = x[i] - mean1_[i], d0 = x[i] - mean0_[i];
            m += -0.5 * std::log(var1_[i]) - d1 * d1 / (2.0 * var1_[i]) + 0.5 * std::log(var0_[i]) + d0 * d0 / (2.0 * var0_[i]);
        }
        return m;
    }
    json to_json() const override {
        return {{"log_prior_ratio", log_prior_ratio_}, {"mean0", mean0_}, {"var0", var0_}, {"mean1", mean1_}, {"var1", var1_}};
    }

private:
    double log_prior_ratio_;
    std::vector<double> mean0_, var0_, mean1_, var1_;
};

class CustomModel final : public detail::ModelImpl {
public:
    CustomModel(std::string name, std::size_t dims, std::function<double(std::span<const double>)> fn)
        : name_(std::move(name)), dims_(dims), fn_(std::move(fn)) {}
    BaseModelKind kind() const override { return BaseModelKind::Custom; }
    std::size_t dims() const override { return dims_; }
    double proba(std::span<const double> x) const override { return fn_(x); }
    double margin(std::span<const double> x) const override { return fn_(x) - 0.5; }
    json to_json() const override { throw Error("custom model '" + name_ + "' cannot be serialised"); }

private:
    std::string name_;
    std::size_t dims_;
    std::function<double(std::span<const double>)> fn_;
};

std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(BaseModelKind kind) {
    switch (kind) {
        case BaseModelKind::SvmLinear: return "SvmLinear";
        case BaseModelKind::SvmPoly: return "SvmPoly";
        case BaseModelKind::TreeGini: return "TreeGini";
        case BaseModelKind::TreeEntropy: return "TreeEntropy";
        case BaseModelKind::Knn: return "Knn";
        case BaseModelKind::RandomForest: return "RandomForest";
        case BaseModelKind::AdaBoost: return "AdaBoost";
        case BaseModelKind::LogisticRegression: return "LogisticRegression";
        case BaseModelKind::GaussianNaiveBayes: return "GaussianNaiveBayes";
        case BaseModelKind::Custom: return "Custom";
    }
    return "?";
}

BaseModelKind base_model_kind_from_string(std::string_view name) {
    for (auto k : kBaseModelKinds) {
        if (to_string(k) == name) return k;
    }
    throw FormatError("unknown base model kind '" + std::string(name) + "'");
}

void Dataset::validate_for_fit() const {
    if (y.size() != x.rows()) throw Error("dataset: label count does not match rows");
    if (x.rows() < 2) throw Error("dataset: need at least 2 rows");
    if (x.cols() == 0) throw Error("dataset: zero feature dimensions");
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw Error("dataset: labels must be 0 or 1");
        pos += static_cast<std::size_t>(v);
    }
    if (pos == 0 || pos == y.size()) throw Error("dataset: single-class data");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset d{x.select_rows(rows), {}};
    d.y.reserve(rows.size());
    for (auto r : rows) d.y.push_back(y[r]);
    return d;
}

std::size_t Dataset::positives() const { return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1)); }

TrainedModel::TrainedModel(std::shared_ptr<const detail::ModelImpl> impl) : impl_(std::move(impl)) {
    if (!impl_) throw Error("null model");
}

BaseModelKind TrainedModel::kind() const { return impl_->kind(); }
std::size_t TrainedModel::dims() const { return impl_->dims(); }

double TrainedModel::predict_proba(std::span<const double> x) const {
    if (x.size() != impl_->dims()) throw Error("predict_proba: dimension mismatch");
    const double p = impl_->proba(x);
    return std::isfinite(p) ? std::clamp(p, 0.0, 1.0) : 0.5;
}

double TrainedModel::margin(std::span<const double> x) const {
    if (x.size() != impl_->dims()) throw Error("margin: dimension mismatch");
    return impl_->margin(x);
}

TrainedModel TrainedModel::custom(std::string name, std::size_t dims, std::function<double(std::span<const double>)> score) {
    return TrainedModel(std::make_shared<CustomModel>(std::move(name), dims, std::move(score)));
}

// ---- trainers --------------------------------------------------------------

LogisticFit train_logistic(const Matrix& x, std::span<const int> y, const LogisticOptions& opt) {
    const std::size_t n = x.rows(), d = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> w(d, 0.0), gw(d), trial_w(d);
    // margin[i] = x_i . w + b, kept in step with (w, b); xg[i] = x_i . gw
    std::vector<double> margin(n, 0.0), xg(n), trial_margin(n);
    double b = 0.0;

    auto objective = [&](const std::vector<double>& m, const std::vector<double>& ww) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) f += softplus(-signed_label(y[i]) * m[i]);
        double reg = 0.0;
        for (double v : ww) reg += v * v;
        return f * inv_n + 0.5 * opt.l2 * reg;
    };

    LogisticFit fit;
    double step = 1.0;
    double f = objective(margin, w);
    for (int it = 0; it < opt.max_iter; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ys = signed_label(y[i]);
            const double coef = -ys * sigmoid(-ys * margin[i]) * inv_n;
            const auto r = x.row(i);
            for (std::size_t c = 0; c < d; ++c) gw[c] += coef * r[c];
            gb += coef;
        }
        double g2 = gb * gb;
        for (std::size_t c = 0; c < d; ++c) {
            gw[c] += opt.l2 * w[c];
            g2 += gw[c] * gw[c];
        }
        fit.grad_norm = std::sqrt(g2);
        fit.iterations = it;
        if (fit.grad_norm < opt.tol) break;
        for (std::size_t i = 0; i < n; ++i) xg[i] = dot(x.row(i), gw) + gb;

        // Armijo backtracking, warm-started from the previous accepted step.
        step = std::min(step * 2.0, 1e4);
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            for (std::size_t c = 0; c < d; ++c) trial_w[c] = w[c] - step * gw[c];
            for (std::size_t i = 0; i < n; ++i) trial_margin[i] = margin[i] - step * xg[i];
            const double ft = objective(trial_margin, trial_w);
            if (ft <= f - 0.5 * step * g2) {
                w.swap(trial_w);
                margin.swap(trial_margin);
                b -= step * gb;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        fit.iterations = it + 1;
        if (!accepted) break;
    }
    fit.weights = std::move(w);
    fit.intercept = b;
    return fit;
}

TrainedModel fit_logistic(const Dataset& data, const LogisticOptions& opt) {
    data.validate_for_fit();
    auto fit = train_logistic(data.x, data.y, opt);
    return TrainedModel(std::make_shared<LinearModel>(BaseModelKind::LogisticRegression, std::move(fit.weights), fit.intercept));
}

// Pegasos on the hinge loss with lambda = 1 / (C n); the bias is an extra
// constant feature. The returned weights average the final epoch. The
// iterate is stored as scale * v so the per-step shrink costs O(1).
TrainedModel fit_linear_svm(const Dataset& data, const LinearSvmOptions& opt, std::uint64_t seed) {
    data.validate_for_fit();
    const std::size_t n = data.size(), d = data.dims();
    const double lambda = 1.0 / (opt.c * static_cast<double>(n));
    const double radius2 = 1.0 / lambda;
    std::vector<double> v(d + 1, 0.0), avg(d + 1, 0.0);
    double scale = 1.0, v_norm2 = 0.0;
    std::vector<double> row_norm2(n);
    for (std::size_t i = 0; i < n; ++i) row_norm2[i] = dot(data.x.row(i), data.x.row(i)) + 1.0;
    std::vector<std::size_t> order = all_rows(n);
    std::mt19937_64 rng(seed);
    std::uint64_t t = 0;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (auto i : order) {
            ++t;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            const auto r = data.x.row(i);
            const double ys = signed_label(data.y[i]);
            const double vx = dot(std::span<const double>(v).first(d), r) + v[d];
            const double m = ys * scale * vx;
            const double shrink = 1.0 - eta * lambda;
            if (shrink <= 0.0) {
                std::fill(v.begin(), v.end(), 0.0);
                scale = 1.0;
                v_norm2 = 0.0;
            } else {
                scale *= shrink;
            }
            if (m < 1.0) {
                const double a = eta * ys / scale;
                v_norm2 += 2.0 * a * (shrink <= 0.0 ? 0.0 : vx) + a * a * row_norm2[i];
                for (std::size_t c = 0; c < d; ++c) v[c] += a * r[c];
                v[d] += a;
            }
            const double norm2 = scale * scale * v_norm2;
            if (norm2 > radius2) scale *= std::sqrt(radius2 / norm2);
            if (scale < 1e-100 || scale > 1e100) {
                for (double& x : v) x *= scale;
                v_norm2 *= scale * scale;
                scale = 1.0;
            }
            if (epoch == opt.epochs - 1) {
                for (std::size_t c = 0; c <= d; ++c) avg[c] += scale * v[c];
            }
        }
    }
    for (double& x : avg) x /= static_cast<double>(n);
    const double bias = avg[d];
    avg.pop_back();
    return TrainedModel(std::make_shared<LinearModel>(BaseModelKind::SvmLinear, std::move(avg), bias));
}

// Simplified SMO over a precomputed polynomial kernel.
TrainedModel fit_poly_svm(const Dataset& data, const PolySvmOptions& opt, std::uint64_t seed) {
    data.validate_for_fit();
    const std::size_t n = data.size(), d = data.dims();
    const double gamma = opt.gamma > 0.0 ? opt.gamma : 1.0 / static_cast<double>(d);
    const double c = opt.c;

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMajor> xm(data.x.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    RowMajor gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    gram.noalias() = xm * xm.transpose();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = std::pow(gamma * gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + opt.coef0, opt.degree);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    auto kern = [&](std::size_t i, std::size_t j) { return k[i * n + j]; };

    std::vector<double> y(n), alpha(n, 0.0), err(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = signed_label(data.y[i]);
        err[i] = -y[i];
    }
    double b = 0.0;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> other(0, n - 2);

    const std::size_t cap = opt.max_iter_per_row * n;
    std::size_t examined = 0;
    int quiet_passes = 0;
    while (examined < cap && quiet_passes < 3) {
        std::size_t changed = 0;
        for (std::size_t i = 0; i < n && examined < cap; ++i, ++examined) {
            const double r = y[i] * err[i];
            if (!((r < -opt.tol && alpha[i] < c) || (r > opt.tol && alpha[i] > 0.0))) continue;
            std::size_t j = other(rng);
            if (j >= i) ++j;

            const double ai = alpha[i], aj = alpha[j];
            double lo, hi;
            if (y[i] != y[j]) {
                lo = std::max(0.0, aj - ai);
                hi = std::min(c, c + aj - ai);
            } else {
                lo = std::max(0.0, ai + aj - c);
                hi = std::min(c, ai + aj);
            }
            if (lo >= hi) continue;
            const double eta = 2.0 * kern(i, j) - kern(i, i) - kern(j, j);
            if (eta >= 0.0) continue;
            double aj_new = std::clamp(aj - y[j] * (err[i] - err[j]) / eta, lo, hi);
            if (std::abs(aj_new - aj) < 1e-5) continue;
            const double ai_new = ai + y[i] * y[j] * (aj - aj_new);

            const double di = y[i] * (ai_new - ai), dj = y[j] * (aj_new - aj);
            const double b1 = b - err[i] - di * kern(i, i) - dj * kern(i, j);
            const double b2 = b - err[j] - di * kern(i, j) - dj * kern(j, j);
            double b_new;
            if (ai_new > 0.0 && ai_new < c) b_new = b1;
            else if (aj_new > 0.0 && aj_new < c) b_new = b2;
            else b_new = 0.5 * (b1 + b2);

            for (std::size_t m = 0; m < n; ++m) err[m] += di * kern(i, m) + dj * kern(j, m) + (b_new - b);
            alpha[i] = ai_new;
            alpha[j] = aj_new;
            b = b_new;
            ++changed;
        }
        quiet_passes = changed == 0 ? quiet_passes + 1 : 0;
    }

    std::vector<std::size_t> support;
    std::vector<double> coef;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] > 0.0) {
            support.push_back(i);
            coef.push_back(alpha[i] * y[i]);
        }
    }
    return TrainedModel(
        std::make_shared<PolySvmModel>(data.x.select_rows(support), std::move(coef), b, gamma, opt.coef0, opt.degree));
}

TrainedModel fit_tree(const Dataset& data, const TreeOptions& opt, std::uint64_t seed) {
    data.validate_for_fit();
    std::mt19937_64 rng(seed);
    const auto w = unit_weights(data.size());
    auto nodes = detail::grow_tree(data.x, data.y, w, all_rows(data.size()), opt, rng);
    const auto kind = opt.criterion == SplitCriterion::Gini ? BaseModelKind::TreeGini : BaseModelKind::TreeEntropy;
    return TrainedModel(std::make_shared<TreeModel>(kind, data.dims(), std::move(nodes)));
}

TrainedModel fit_forest(const Dataset& data, const ForestOptions& opt, std::uint64_t seed) {
    data.validate_for_fit();
    const std::size_t n = data.size(), d = data.dims();
    TreeOptions tree = opt.tree;
    tree.max_features = opt.max_features > 0 ? opt.max_features
                                             : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
    const auto w = unit_weights(n);
    std::vector<std::vector<detail::TreeNode>> trees;
    trees.reserve(opt.n_trees);
    for (std::size_t t = 0; t < opt.n_trees; ++t) {
        std::mt19937_64 rng(derive_seed(seed, t));
        std::vector<std::size_t> rows;
        if (opt.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            rows.resize(n);
            for (auto& r : rows) r = pick(rng);
            std::sort(rows.begin(), rows.end());
        } else {
            rows = all_rows(n);
        }
        trees.push_back(detail::grow_tree(data.x, data.y, w, std::move(rows), tree, rng));
    }
    return TrainedModel(std::make_shared<ForestModel>(d, std::move(trees)));
}

TrainedModel fit_knn(const Dataset& data, const KnnOptions& opt) {
    data.validate_for_fit();
    if (opt.k == 0) throw Error("knn: k must be positive");
    return TrainedModel(std::make_shared<KnnModel>(data.x, data.y, opt.k));
}

// Real-valued AdaBoost (SAMME.R, two classes) over depth-1 stumps.
TrainedModel fit_adaboost(const Dataset& data, const AdaBoostOptions& opt) {
    data.validate_for_fit();
    constexpr double kClip = 1e-6;
    const std::size_t n = data.size();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    const TreeOptions stump{SplitCriterion::Gini, 1, 1, 0};
    std::mt19937_64 rng(0);  // unused: stumps search every feature
    std::vector<std::vector<detail::TreeNode>> stumps;
    const auto presorted = detail::presort_columns(data.x);

    for (std::size_t m = 0; m < opt.n_estimators; ++m) {
        auto nodes = detail::grow_tree(data.x, data.y, w, all_rows(n), stump, rng, &presorted);
        for (auto& node : nodes) {
            const double p = std::clamp(node.value, kClip, 1.0 - kClip);
            node.value = 0.5 * std::log(p / (1.0 - p));
        }
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::exp(-signed_label(data.y[i]) * detail::tree_leaf(nodes, data.x.row(i)).value);
            total += w[i];
        }
        const bool split = nodes.front().feature >= 0;
        stumps.push_back(std::move(nodes));
        if (!split || !(total > 0.0)) break;
        for (double& v : w) v /= total;
    }
    return TrainedModel(std::make_shared<AdaBoostModel>(data.dims(), std::move(stumps)));
}

TrainedModel fit_gaussian_nb(const Dataset& data) {
    data.validate_for_fit();
    const std::size_t n = data.size(), d = data.dims();
    std::vector<double> mean[2] = {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    std::vector<double> var[2] = {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    std::vector<double> all_mean(d, 0.0), all_var(d, 0.0);
    double count[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const int c = data.y[i];
        count[c] += 1;
        const auto r = data.x.row(i);
        for (std::size_t f = 0; f < d; ++f) {
            mean[c][f] += r[f];
            all_mean[f] += r[f];
        }
    }
    for (int c = 0; c < 2; ++c) {
        for (auto& v : mean[c]) v /= count[c];
    }
    for (auto& v : all_mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = data.y[i];
        const auto r = data.x.row(i);
        for (std::size_t f = 0; f < d; ++f) {
            var[c][f] += (r[f] - mean[c][f]) * (r[f] - mean[c][f]);
            all_var[f] += (r[f] - all_mean[f]) * (r[f] - all_mean[f]);
        }
    }
    double max_var = 0.0;
    for (auto& v : all_var) max_var = std::max(max_var, v / static_cast<double>(n));
    const double floor = std::max(1e-9 * max_var, 1e-300);
    for (int c = 0; c < 2; ++c) {
        for (auto& v : var[c]) v = v / count[c] + floor;
    }
    return TrainedModel(std::make_shared<GaussianNbModel>(std::log(count[1] / count[0]), std::move(mean[0]), std::move(var[0]),
                                                          std::move(mean[1]), std::move(var[1])));
}

TrainedModel fit(BaseModelKind kind, const Dataset& data, std::uint64_t seed) {
    switch (kind) {
        case BaseModelKind::SvmLinear: return fit_linear_svm(data, {}, seed);
        case BaseModelKind::SvmPoly: return fit_poly_svm(data, {}, seed);
        case BaseModelKind::TreeGini: return fit_tree(data, {SplitCriterion::Gini, 12, 5, 0}, seed);
        case BaseModelKind::TreeEntropy: return fit_tree(data, {SplitCriterion::Entropy, 12, 5, 0}, seed);
        case BaseModelKind::Knn: return fit_knn(data, {});
        case BaseModelKind::RandomForest: return fit_forest(data, {}, seed);
        case BaseModelKind::AdaBoost: return fit_adaboost(data, {});
        case BaseModelKind::LogisticRegression: return fit_logistic(data, {});
        case BaseModelKind::GaussianNaiveBayes: return fit_gaussian_nb(data);
        case BaseModelKind::Custom: break;
    }
    throw Error("fit: custom models have no trainer");
}

// ---- serialisation ---------------------------------------------------------

namespace detail {

json model_to_json(const TrainedModel& model) {
    return {{"kind", std::string(to_string(model.kind()))}, {"params", model.impl().to_json()}};
}

TrainedModel model_from_json(const json& j) {
    const auto kind = base_model_kind_from_string(j.at("kind").get<std::string>());
    const json& p = j.at("params");
    switch (kind) {
        case BaseModelKind::SvmLinear:
        case BaseModelKind::LogisticRegression:
            return TrainedModel(std::make_shared<LinearModel>(kind, p.at("weights").get<std::vector<double>>(),
                                                              p.at("intercept").get<double>()));
        case BaseModelKind::SvmPoly: return TrainedModel(PolySvmModel::from_json(p));
        case BaseModelKind::TreeGini:
        case BaseModelKind::TreeEntropy:
            return TrainedModel(std::make_shared<TreeModel>(kind, p.at("dims").get<std::size_t>(), nodes_from_json(p.at("nodes"))));
        case BaseModelKind::Knn:
            return TrainedModel(std::make_shared<KnnModel>(matrix_from_json(p.at("x")), p.at("y").get<std::vector<int>>(),
                                                           p.at("k").get<std::size_t>()));
        case BaseModelKind::RandomForest: {
            std::vector<std::vector<TreeNode>> trees;
            for (const auto& t : p.at("trees")) trees.push_back(nodes_from_json(t));
            return TrainedModel(std::make_shared<ForestModel>(p.at("dims").get<std::size_t>(), std::move(trees)));
        }
        case BaseModelKind::AdaBoost: {
            std::vector<std::vector<TreeNode>> stumps;
            for (const auto& t : p.at("stumps")) stumps.push_back(nodes_from_json(t));
            return TrainedModel(std::make_shared<AdaBoostModel>(p.at("dims").get<std::size_t>(), std::move(stumps)));
        }
        case BaseModelKind::GaussianNaiveBayes:
            return TrainedModel(std::make_shared<GaussianNbModel>(
                p.at("log_prior_ratio").get<double>(), p.at("mean0").get<std::vector<double>>(),
                p.at("var0").get<std::vector<double>>(), p.at("mean1").get<std::vector<double>>(),
                p.at("var1").get<std::vector<double>>()));
        case BaseModelKind::Custom: break;
    }
    throw FormatError("model kind cannot be deserialised");
}

}  // namespace detail

}  // namespace qpk
