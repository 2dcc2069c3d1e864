#include "qpk/dsp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "qpk/waveform.hpp"

namespace qpk::dsp {

using cplx = std::complex<double>;

void validate(const BandpassSpec& spec, double rate_hz) {
    if (!(rate_hz > 0.0)) throw Error("invalid bandpass: sample rate must be positive");
    if (!(spec.low_hz > 0.0) || !(spec.high_hz > spec.low_hz) || !(spec.high_hz < rate_hz / 2.0)) {
        throw Error("invalid bandpass: need 0 < low < high < rate/2");
    }
    if (spec.order < 1 || spec.order > 16) throw Error("invalid bandpass: order must be in [1, 16]");
}

namespace {

std::vector<Biquad> design_bandpass(const BandpassSpec& spec, double fs) {
    const double pi = std::numbers::pi;
    const double w1 = 2.0 * fs * std::tan(pi * spec.low_hz / fs);
    const double w2 = 2.0 * fs * std::tan(pi * spec.high_hz / fs);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;
    const int order = spec.order;

    // Lowpass prototype poles, each mapped to the two roots of s^2 - p*bw*s + w0^2.
    std::vector<cplx> upper;
    std::vector<double> real_roots;
    for (int k = 0; k < order; ++k) {
        const cplx p = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
        const cplx pb = p * bw;
        const cplx disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
        for (const cplx r : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
            if (std::abs(r.imag()) < 1e-9 * std::abs(r)) {
                real_roots.push_back(r.real());
            } else if (r.imag() > 0) {
                upper.push_back(r);
            }
        }
    }
    // Real roots appear only for odd orders with very wide bands; each pair
    // shares a section.
    std::sort(real_roots.begin(), real_roots.end());

    auto bilinear = [fs](cplx s) { return (2.0 * fs + s) / (2.0 * fs - s); };
    const double wc = 2.0 * std::atan(w0 / (2.0 * fs));
    const cplx zc = std::polar(1.0, -wc);  // z^-1 at the band centre

    auto normalized = [&](double a1, double a2) {
        Biquad q{1.0, 0.0, -1.0, a1, a2};
        const cplx num = 1.0 - zc * zc;
        const cplx den = 1.0 + a1 * zc + a2 * zc * zc;
        const double g = std::abs(den) / std::abs(num);
        q.b0 *= g;
        q.b2 *= g;
        return q;
    };

    std::vector<Biquad> sections;
    for (const cplx r : upper) {
        const cplx zp = bilinear(r);
        sections.push_back(normalized(-2.0 * zp.real(), std::norm(zp)));
    }
    for (std::size_t i = 0; i + 1 < real_roots.size(); i += 2) {
        const double za = bilinear(real_roots[i]).real();
        const double zb = bilinear(real_roots[i + 1]).real();
        sections.push_back(normalized(-(za + zb), za * zb));
    }
    return sections;
}

}  // namespace

BandpassFilter::BandpassFilter(const BandpassSpec& spec, double rate_hz) : spec_(spec) {
    validate(spec, rate_hz);
    sections_ = design_bandpass(spec, rate_hz);
    state_.assign(sections_.size(), State{});
}

void BandpassFilter::process(std::span<const double> in, std::span<double> out) {
    if (in.size() != out.size()) throw Error("bandpass: output size mismatch");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = process(in[i]);
}

void BandpassFilter::reset() { state_.assign(sections_.size(), State{}); }

std::vector<double> bandpass(std::span<const double> x, double rate_hz, const BandpassSpec& spec) {
    BandpassFilter f(spec, rate_hz);
    std::vector<double> y(x.size());
    f.process(x, y);
    return y;
}

WindowStats window_stats(std::span<const double> x) {
    if (x.empty()) throw Error("window_stats: empty window");
    // Welford
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (double v : x) {
        const double a = std::abs(v);
        ++n;
        const double d = a - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (a - mean);
    }
    return {mean, std::max(0.0, m2 / static_cast<double>(n))};
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

std::vector<double> zscore(std::span<const double> x) {
    if (x.empty()) throw Error("zscore: empty window");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    if (!(var > 0.0)) throw Error("zscore: zero-variance window");
    const double sd = std::sqrt(var);
    std::vector<double> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [&](double v) { return (v - mean) / sd; });
    return out;
}

double rms_amplitude_ratio(std::span<const double> x, std::span<const double> y) {
    double sx = 0.0, sy = 0.0;
    for (double v : x) sx += v * v;
    for (double v : y) sy += v * v;
    if (!(sy > 0.0)) throw Error("rms_amplitude_ratio: reference window has no energy");
    return sx / sy;
}

double mean_difference(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw Error("mean_difference: empty input");
    double sx = 0.0, sy = 0.0;
    for (double v : x) sx += std::abs(v);
    for (double v : y) sy += std::abs(v);
    return sx / static_cast<double>(x.size()) - sy / static_cast<double>(y.size());
}

EnvelopeSlopes envelope_slope(std::span<const double> x, double rate_hz) {
    if (!(rate_hz > 0.0)) throw Error("envelope_slope: invalid sample rate");
    const auto at = [rate_hz](double s) { return static_cast<std::ptrdiff_t>(std::llround(s * rate_hz)); };
    const std::ptrdiff_t centre = at(5.0);
    const auto len = static_cast<std::ptrdiff_t>(x.size());
    if (len < 2 * centre || centre < at(1.5) + 1) {
        throw Error("envelope_slope: window does not span [-5 s, +5 s]");
    }

    struct Peak {
        double value;
        double time_s;
    };
    auto peak = [&](double from_s, double to_s) {
        const std::ptrdiff_t lo = centre + at(from_s);
        const std::ptrdiff_t hi = std::min(len, centre + at(to_s));
        if (lo < 0 || hi <= lo) throw Error("envelope_slope: window does not span [-5 s, +5 s]");
        std::ptrdiff_t best = lo;
        for (std::ptrdiff_t i = lo + 1; i < hi; ++i) {
            if (std::abs(x[static_cast<std::size_t>(i)]) > std::abs(x[static_cast<std::size_t>(best)])) best = i;
        }
        return Peak{std::abs(x[static_cast<std::size_t>(best)]), static_cast<double>(best - centre) / rate_hz};
    };

    const Peak a = peak(-5.0, -1.5);
    const Peak b = peak(1.5, 5.0);
    const Peak c = peak(-0.5, 0.5);

    EnvelopeSlopes out;
    if (c.time_s != a.time_s) out.pre = (c.value - a.value) / (c.time_s - a.time_s);
    if (c.time_s != b.time_s) out.post = (c.value - b.value) / (100.0 * (c.time_s - b.time_s));
    return out;
}

double polarization_slope(std::span<const double> e, std::span<const double> n, std::span<const double> z) {
    if (e.size() != n.size() || n.size() != z.size() || e.empty()) {
        throw Error("polarization_slope: channel windows must be non-empty and equal length");
    }
    const std::span<const double> ch[3] = {e, n, z};
    double mean[3] = {0, 0, 0};
    for (int c = 0; c < 3; ++c) {
        for (double v : ch[c]) mean[c] += v;
        mean[c] /= static_cast<double>(e.size());
    }
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < e.size(); ++i) {
        const Eigen::Vector3d d(e[i] - mean[0], n[i] - mean[1], z[i] - mean[2]);
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(e.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov, Eigen::EigenvaluesOnly);
    const Eigen::Vector3d ev = solver.eigenvalues().cwiseMax(0.0);
    const double a = ev[0], b = ev[1], c = ev[2];
    const double sum = a + b + c;
    if (!(sum > 0.0)) throw Error("polarization_slope: degenerate all-zero windows");
    const double r = ((a - b) * (a - b) + (a - c) * (a - c) + (b - c) * (b - c)) / (2.0 * sum * sum);
    return std::clamp(r, 0.0, 1.0);
}

}  // namespace qpk::dsp
