#include "qpk/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "model_impl.hpp"
#include "qpk/parallel.hpp"
#include "qpk/random.hpp"
#include "qpk/waveform.hpp"

namespace qpk {

using nlohmann::json;

void StackConfig::validate() const {
    if (inner_folds < 2) throw Error("stacking: inner_folds must be at least 2");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("stacking: threshold must lie in (0, 1)");
}

Standardizer Standardizer::fit(const Matrix& x) {
    const std::size_t n = x.rows(), d = x.cols();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = x.row(i);
        for (std::size_t c = 0; c < d; ++c) s.mean[c] += r[c];
    }
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = x.row(i);
        for (std::size_t c = 0; c < d; ++c) s.scale[c] += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
    }
    for (auto& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (!(v > 1e-300)) v = 1.0;
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
    if (row.size() != mean.size()) throw Error("standardizer: dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / scale[c];
    return out;
}

Matrix Standardizer::apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto z = apply(x.row(i));
        std::copy(z.begin(), z.end(), out.row(i).begin());
    }
    return out;
}

std::vector<Learner> default_learners() {
    std::vector<Learner> out;
    for (auto kind : kBaseModelKinds) {
        out.push_back({std::string(to_string(kind)), [kind](const Dataset& d, std::uint64_t seed) { return fit(kind, d, seed); }});
    }
    return out;
}

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> fold(y.size(), 0);
    std::mt19937_64 rng(seed);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == cls) rows.push_back(i);
        }
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t i = 0; i < rows.size(); ++i) fold[rows[i]] = i % k;
    }
    return fold;
}

ModelBundle train_stack(const Dataset& data, std::vector<std::string> feature_names, const StackConfig& cfg,
                        const std::vector<Learner>& learners, StackTrace* trace) {
    cfg.validate();
    data.validate_for_fit();
    if (feature_names.size() != data.dims()) throw Error("train_stack: feature names do not match data dimensions");
    if (learners.empty()) throw Error("train_stack: no base learners");
    const std::size_t pos = data.positives();
    if (pos < cfg.inner_folds || data.size() - pos < cfg.inner_folds) {
        throw Error("train_stack: a class has fewer rows than folds; some fold would be single-class");
    }

    const std::size_t n = data.size(), k = cfg.inner_folds, m = learners.size();
    ModelBundle bundle;
    bundle.feature_names = std::move(feature_names);
    bundle.config = cfg;
    bundle.standardizer = Standardizer::fit(data.x);
    const Dataset z{bundle.standardizer.apply(data.x), data.y};

    const auto fold_of = stratified_folds(z.y, k, derive_seed(cfg.seed, 0xf01d));
    std::vector<std::vector<std::size_t>> train_rows(k), test_rows(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < k; ++f) (f == fold_of[i] ? test_rows[f] : train_rows[f]).push_back(i);
    }
    std::vector<Dataset> fold_train(k);
    for (std::size_t f = 0; f < k; ++f) fold_train[f] = z.subset(train_rows[f]);

    Matrix judgements(n, m);
    parallel_for(k * m, cfg.workers, [&](std::size_t task) {
        const std::size_t f = task / m, j = task % m;
        const auto model = learners[j].fit(fold_train[f], derive_seed(cfg.seed, 1 + task));
        for (auto row : test_rows[f]) judgements(row, j) = model.predict_proba(z.x.row(row));
    });

    const auto meta = train_logistic(judgements, z.y, LogisticOptions{cfg.meta_l2, 500, 1e-8});
    bundle.meta_weights = meta.weights;
    bundle.meta_intercept = meta.intercept;

    std::vector<std::optional<TrainedModel>> final_models(m);
    parallel_for(m, cfg.workers, [&](std::size_t j) {
        final_models[j] = learners[j].fit(z, derive_seed(cfg.seed, 0x10000 + j));
    });
    for (std::size_t j = 0; j < m; ++j) {
        bundle.base_names.push_back(learners[j].name);
        bundle.base_models.push_back(*final_models[j]);
    }
    // Tables that are not waveform feature vectors (tests, tooling) carry post_s = 0.
    try {
        bundle.post_s = FeatureConfig::post_s_for_count(bundle.feature_names.size());
    } catch (const Error&) {
        bundle.post_s = 0.0;
    }

    if (trace) {
        trace->judgements = std::move(judgements);
        trace->fold_of_row = fold_of;
        trace->train_rows = std::move(train_rows);
    }
    return bundle;
}

ModelBundle train_stack(const FeatureTable& table, const StackConfig& cfg) {
    Dataset data{table.x, table.label};
    return train_stack(data, table.names, cfg);
}

std::vector<double> ModelBundle::base_scores(std::span<const double> raw, std::size_t workers) const {
    const auto z = standardizer.apply(raw);
    std::vector<double> scores(base_models.size());
    parallel_for(base_models.size(), workers, [&](std::size_t j) { scores[j] = base_models[j].predict_proba(z); });
    return scores;
}

double ModelBundle::combine(std::span<const double> scores) const {
    if (scores.size() != meta_weights.size()) throw Error("bundle: score count mismatch");
    double s = meta_intercept;
    for (std::size_t j = 0; j < scores.size(); ++j) s += meta_weights[j] * scores[j];
    return sigmoid(s);
}

double ModelBundle::confidence(std::span<const double> raw, std::size_t workers) const {
    if (raw.size() != feature_names.size()) throw Error("bundle: feature length mismatch");
    return combine(base_scores(raw, workers));
}

double confidence(const ModelBundle& bundle, const FeatureVector& fv, std::size_t workers) {
    if (fv.values.size() != bundle.feature_names.size()) throw Error("confidence: feature length mismatch");
    if (fv.names && *fv.names != bundle.feature_names) throw Error("confidence: feature names do not match bundle");
    return bundle.confidence(fv.values, workers);
}

bool classify(const ModelBundle& bundle, const FeatureVector& fv, double threshold) {
    return accept_confidence(confidence(bundle, fv), threshold);
}

std::string ModelBundle::to_json() const {
    json models = json::array();
    for (std::size_t j = 0; j < base_models.size(); ++j) {
        json m = detail::model_to_json(base_models[j]);
        m["name"] = base_names[j];
        models.push_back(std::move(m));
    }
    const json doc = {
        {"format", "quakepick-bundle"},
        {"format_version", format_version},
        {"post_s", post_s},
        {"config",
         {{"inner_folds", config.inner_folds}, {"threshold", config.threshold}, {"seed", config.seed}, {"meta_l2", config.meta_l2}}},
        {"feature_names", feature_names},
        {"standardizer", {{"mean", standardizer.mean}, {"scale", standardizer.scale}}},
        {"base_models", models},
        {"meta", {{"weights", meta_weights}, {"intercept", meta_intercept}}},
    };
    return doc.dump();
}

ModelBundle ModelBundle::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bundle: invalid JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "quakepick-bundle") throw FormatError("bundle: wrong format tag");
        ModelBundle b;
        b.format_version = doc.at("format_version").get<int>();
        if (b.format_version != kFormatVersion) {
            throw FormatError("bundle: unsupported format_version " + std::to_string(b.format_version));
        }
        b.post_s = doc.at("post_s").get<double>();
        const auto& c = doc.at("config");
        b.config.inner_folds = c.at("inner_folds").get<std::size_t>();
        b.config.threshold = c.at("threshold").get<double>();
        b.config.seed = c.at("seed").get<std::uint64_t>();
        b.config.meta_l2 = c.at("meta_l2").get<double>();
        b.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        b.standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
        b.standardizer.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
        for (const auto& m : doc.at("base_models")) {
            b.base_names.push_back(m.at("name").get<std::string>());
            b.base_models.push_back(detail::model_from_json(m));
        }
        b.meta_weights = doc.at("meta").at("weights").get<std::vector<double>>();
        b.meta_intercept = doc.at("meta").at("intercept").get<double>();
        if (b.meta_weights.size() != b.base_models.size()) throw FormatError("bundle: meta weight count mismatch");
        if (b.standardizer.mean.size() != b.feature_names.size() || b.standardizer.scale.size() != b.feature_names.size()) {
            throw FormatError("bundle: standardizer length mismatch");
        }
        return b;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bundle: ") + e.what());
    }
}

void ModelBundle::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << to_json() << '\n';
    if (!out) throw Error("write failure");
}

ModelBundle ModelBundle::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace qpk
