#pragma once

#include <span>
#include <vector>

namespace qpk::dsp {

struct BandpassSpec {
    double low_hz = 1.0;
    double high_hz = 10.0;
    int order = 4;

    bool operator==(const BandpassSpec&) const = default;
};

// Throws qpk::Error unless 0 < low < high < rate/2 and 1 <= order <= 16.
void validate(const BandpassSpec& spec, double rate_hz);

// b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

/**
 * Causal Butterworth bandpass as a cascade of second-order sections.
 *
 * An order-N design has N sections (2N poles) and unit gain at the
 * geometric centre of the pre-warped band edges. The filter keeps its
 * state between calls so a stream may be fed in arbitrary chunks.
 */
class BandpassFilter {
public:
    BandpassFilter(const BandpassSpec& spec, double rate_hz);

    double process(double x) {
        for (std::size_t s = 0; s < sections_.size(); ++s) {
            const Biquad& q = sections_[s];
            State& st = state_[s];
            const double y = q.b0 * x + st.z1;
            st.z1 = q.b1 * x - q.a1 * y + st.z2;
            st.z2 = q.b2 * x - q.a2 * y;
            x = y;
        }
        return x;
    }

    void process(std::span<const double> in, std::span<double> out);
    void reset();

    const std::vector<Biquad>& sections() const { return sections_; }
    const BandpassSpec& spec() const { return spec_; }

private:
    struct State {
        double z1 = 0, z2 = 0;
    };
    BandpassSpec spec_;
    std::vector<Biquad> sections_;
    std::vector<State> state_;
};

/// Filters `x` from a zero initial state.
std::vector<double> bandpass(std::span<const double> x, double rate_hz, const BandpassSpec& spec);

/// Mean and population variance of |x|.
struct WindowStats {
    double mean_abs = 0.0;
    double var_abs = 0.0;
};
WindowStats window_stats(std::span<const double> x);

double max_abs(std::span<const double> x);

/// (x - mean) / sqrt(var) with population variance; throws on zero variance.
std::vector<double> zscore(std::span<const double> x);

/// sum(x^2) / sum(y^2); throws when y has no energy.
double rms_amplitude_ratio(std::span<const double> x, std::span<const double> y);

/// mean(|x|) - mean(|y|).
double mean_difference(std::span<const double> x, std::span<const double> y);

struct EnvelopeSlopes {
    double pre = 0.0;
    double post = 0.0;
};

/**
 * Envelope rise and decay around an arrival.
 *
 * `x` spans [-5 s, +5 s) around the arrival, so the arrival sits at index
 * round(5 * rate). With a, b, c the maxima of |x| over [-5, -1.5),
 * [1.5, 5) and [-0.5, 0.5) located at times ta, tb, tc (seconds relative to
 * the arrival, earliest index on ties):
 *
 *     pre  = (c - a) / (tc - ta)
 *     post = (c - b) / (100 * (tc - tb))
 *
 * A zero denominator yields 0 for that slope.
 */
EnvelopeSlopes envelope_slope(std::span<const double> x, double rate_hz);

/**
 * Rectilinearity of three-component motion from the eigenvalues (a, b, c)
 * of the channel covariance matrix:
 *
 *     ((a-b)^2 + (a-c)^2 + (b-c)^2) / (2 (a+b+c)^2)
 *
 * 0 for isotropic motion, 1 for motion along a single axis. Throws when all
 * eigenvalues vanish.
 */
double polarization_slope(std::span<const double> e, std::span<const double> n, std::span<const double> z);

}  // namespace qpk::dsp
