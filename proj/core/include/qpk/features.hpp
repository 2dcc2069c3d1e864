#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qpk/dsp.hpp"
#include "qpk/matrix.hpp"
#include "qpk/waveform.hpp"

namespace qpk {

struct FeatureConfig {
    double pre_s = 5.0;
    double post_s = 20.0;  // AN
    std::vector<dsp::BandpassSpec> fluct_bands = {{2.0, 10.0, 4}, {10.0, 20.0, 4}};
    std::vector<dsp::BandpassSpec> waterfall_bands = {
        {0.5, 0.833, 4},     {0.833, 1.389, 4},   {1.389, 2.314, 4},   {2.314, 3.858, 4},   {3.858, 6.430, 4},
        {6.430, 10.717, 4},  {10.717, 17.816, 4}, {17.816, 29.768, 4}, {29.768, 49.615, 4},
    };
    std::vector<dsp::BandpassSpec> other_bands = {
        {1.389, 2.314, 4}, {2.314, 3.858, 4}, {3.858, 6.430, 4}, {6.430, 10.717, 4}, {10.717, 17.816, 4},
    };

    void validate() const;

    // Number of whole 5 s blocks in the post-window.
    int post_blocks() const;
    // 679 + 12 * (post_blocks - 1) with the default band lists.
    std::size_t feature_count() const;

    // Post-window length implied by a feature count, or throws.
    static double post_s_for_count(std::size_t count);
};

// Feature names in extraction order; stable across runs and builds.
std::vector<std::string> feature_names(const FeatureConfig& cfg);

struct FeatureVector {
    std::vector<double> values;
    std::shared_ptr<const std::vector<std::string>> names;
    // Non-finite values replaced by 0 during assembly.
    std::size_t nonfinite_replaced = 0;
};

// Per-category output: parallel name/value lists.
struct NamedValues {
    std::vector<std::string> names;
    std::vector<double> values;

    void add(std::string name, double v) {
        names.push_back(std::move(name));
        values.push_back(v);
    }
};

/// Exact-length cut [t - pre_s, t + post_s) from a continuous stream.
TriTrace cut_window(const TriTrace& stream, TimeUs t, const FeatureConfig& cfg);

std::size_t window_samples(const FeatureConfig& cfg, double rate_hz);

NamedValues amplitude_fluctuation(const TriTrace& win, const FeatureConfig& cfg);
NamedValues maximal_amplitude(const TriTrace& win, const FeatureConfig& cfg);
NamedValues spectral_waterfall(const TriTrace& win, const FeatureConfig& cfg);
NamedValues other_features(const TriTrace& win, const FeatureConfig& cfg);

/**
 * Computes all four feature families on a cut window.
 *
 * Every band is filtered once and shared between the families; with
 * `parallel` the families are evaluated concurrently, which yields the same
 * bits as the serial path.
 */
class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureConfig cfg);

    FeatureVector assemble(const TriTrace& win, bool parallel = false) const;

    const FeatureConfig& config() const { return cfg_; }
    const std::shared_ptr<const std::vector<std::string>>& names() const { return names_; }
    std::size_t size() const { return names_->size(); }

private:
    FeatureConfig cfg_;
    std::shared_ptr<const std::vector<std::string>> names_;
};

FeatureVector assemble(const TriTrace& win, const FeatureConfig& cfg);

/// Training table: one row per candidate with its identity and label.
struct FeatureTable {
    std::vector<std::string> names;
    std::vector<std::string> station;
    std::vector<TimeUs> time_us;
    std::vector<int> label;
    Matrix x;

    std::size_t rows() const { return x.rows(); }
    void append(const std::string& st, TimeUs t, int lbl, std::span<const double> values);
};

// CSV: station,time_us,label,<feature names...>
void write_feature_table(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_table(std::istream& in);

}  // namespace qpk
