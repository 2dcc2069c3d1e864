#include "qpk/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <istream>
#include <ostream>

#include "csv_util.hpp"

namespace qpk {

namespace {

constexpr Channel kChannels[3] = {Channel::E, Channel::N, Channel::Z};

std::string band_name(const dsp::BandpassSpec& b) {
    return detail::format_double(b.low_hz) + "-" + detail::format_double(b.high_hz) + "Hz";
}

std::string span_name(double from_s, double to_s) {
    return detail::format_double(from_s) + ":" + detail::format_double(to_s);
}

struct SubWindow {
    double from_s, to_s;
};

std::vector<SubWindow> fluctuation_windows(const FeatureConfig& cfg) {
    // (0, 1) stands in for the "(0, -1)" entry, mirroring (-1, 0).
    std::vector<SubWindow> w = {{-cfg.pre_s, 0.0}, {0.0, cfg.post_s}, {-1.0, 0.0}, {0.0, 1.0}};
    for (int i = 1; i <= cfg.post_blocks(); ++i) w.push_back({5.0 * (i - 1), 5.0 * i});
    return w;
}

std::vector<SubWindow> waterfall_windows() {
    std::vector<SubWindow> w;
    for (int k = 1; k <= 5; ++k) {
        const double s = 0.2 * k;
        w.push_back({-s, 0.0});
        w.push_back({0.0, s});
    }
    return w;
}

constexpr SubWindow kMaxNeighbourhood{-1.0, 1.0};

// Index arithmetic for a cut window whose arrival sits at `centre`.
struct WindowGeometry {
    double rate;
    std::ptrdiff_t centre;
    std::ptrdiff_t size;

    std::ptrdiff_t at(double s) const {
        return std::clamp<std::ptrdiff_t>(centre + static_cast<std::ptrdiff_t>(std::llround(s * rate)), 0, size);
    }
    std::span<const double> view(const std::vector<double>& x, SubWindow w) const {
        const auto lo = at(w.from_s), hi = at(w.to_s);
        return {x.data() + lo, static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, hi - lo))};
    }
};

dsp::WindowStats safe_stats(std::span<const double> x) { return x.empty() ? dsp::WindowStats{} : dsp::window_stats(x); }

// Every distinct band filtered once per channel.
class FilterBank {
public:
    FilterBank(const TriTrace& win, const FeatureConfig& cfg) {
        for (const auto* list : {&cfg.fluct_bands, &cfg.waterfall_bands, &cfg.other_bands}) {
            for (const auto& b : *list) {
                if (std::find(specs_.begin(), specs_.end(), b) != specs_.end()) continue;
                specs_.push_back(b);
                std::array<std::vector<double>, 3> out;
                for (int c = 0; c < 3; ++c) {
                    out[c] = dsp::bandpass(win.channel(kChannels[c]).samples, win.sample_rate_hz(), b);
                }
                filtered_.push_back(std::move(out));
            }
        }
    }

    const std::vector<double>& get(const dsp::BandpassSpec& b, int channel) const {
        const auto it = std::find(specs_.begin(), specs_.end(), b);
        return filtered_[static_cast<std::size_t>(it - specs_.begin())][static_cast<std::size_t>(channel)];
    }

private:
    std::vector<dsp::BandpassSpec> specs_;
    std::vector<std::array<std::vector<double>, 3>> filtered_;
};

WindowGeometry geometry(const TriTrace& win, const FeatureConfig& cfg) {
    const double rate = win.sample_rate_hz();
    if (win.size() != window_samples(cfg, rate)) throw Error("feature window length does not match config");
    return {rate, static_cast<std::ptrdiff_t>(std::llround(cfg.pre_s * rate)), static_cast<std::ptrdiff_t>(win.size())};
}

NamedValues fluctuation_from(const FilterBank& bank, const WindowGeometry& g, const FeatureConfig& cfg) {
    NamedValues out;
    const auto windows = fluctuation_windows(cfg);
    for (const auto& band : cfg.fluct_bands) {
        for (int c = 0; c < 3; ++c) {
            const auto& x = bank.get(band, c);
            const std::string prefix = "fluct_" + band_name(band) + "_" + std::string(to_string(kChannels[c])) + "_";
            for (const auto& w : windows) {
                const auto st = safe_stats(g.view(x, w));
                const std::string name = prefix + span_name(w.from_s, w.to_s);
                out.add(name + "_mean", st.mean_abs);
                out.add(name + "_var", st.var_abs);
            }
        }
    }
    return out;
}

NamedValues maximal_from(const FilterBank& bank, const WindowGeometry& g, const FeatureConfig& cfg) {
    NamedValues out;
    const SubWindow search{2.0, cfg.post_s};
    for (const auto& band : cfg.fluct_bands) {
        for (int c = 0; c < 3; ++c) {
            const auto& x = bank.get(band, c);
            const std::string prefix = "maxamp_" + band_name(band) + "_" + std::string(to_string(kChannels[c])) + "_";
            const auto lo = g.at(search.from_s), hi = g.at(search.to_s);
            std::ptrdiff_t best = lo;
            for (auto i = lo + 1; i < hi; ++i) {
                if (std::abs(x[static_cast<std::size_t>(i)]) > std::abs(x[static_cast<std::size_t>(best)])) best = i;
            }
            const double peak = hi > lo ? std::abs(x[static_cast<std::size_t>(best)]) : 0.0;
            out.add(prefix + "max", peak);
            if (kChannels[c] == Channel::Z) continue;

            const auto radius = static_cast<std::ptrdiff_t>(std::llround(kMaxNeighbourhood.to_s * g.rate));
            const auto n_lo = std::max<std::ptrdiff_t>(0, best - radius);
            const auto n_hi = std::min<std::ptrdiff_t>(g.size, best + radius + 1);
            const auto st = safe_stats({x.data() + n_lo, static_cast<std::size_t>(n_hi - n_lo)});
            out.add(prefix + "nbhd_mean", st.mean_abs);
            out.add(prefix + "nbhd_var", st.var_abs);
        }
    }
    return out;
}

NamedValues waterfall_from(const FilterBank& bank, const WindowGeometry& g, const FeatureConfig& cfg) {
    NamedValues out;
    const auto windows = waterfall_windows();
    for (const auto& band : cfg.waterfall_bands) {
        for (int c = 0; c < 3; ++c) {
            const auto& x = bank.get(band, c);
            const std::string prefix = "wfall_" + band_name(band) + "_" + std::string(to_string(kChannels[c])) + "_";
            for (const auto& w : windows) {
                const auto st = safe_stats(g.view(x, w));
                const std::string name = prefix + span_name(w.from_s, w.to_s);
                out.add(name + "_mean", st.mean_abs);
                out.add(name + "_var", st.var_abs);
            }
        }
    }
    return out;
}

NamedValues other_from(const FilterBank& bank, const WindowGeometry& g, const FeatureConfig& cfg) {
    NamedValues out;
    const SubWindow full{-5.0, 5.0};
    const SubWindow after{0.0, 5.0};
    for (const auto& band : cfg.other_bands) {
        std::span<const double> views[3];
        for (int c = 0; c < 3; ++c) {
            const auto& x = bank.get(band, c);
            const std::string prefix = "other_" + band_name(band) + "_" + std::string(to_string(kChannels[c])) + "_";
            const auto whole = g.view(x, full);
            const auto post = g.view(x, after);
            views[c] = whole;

            double ratio = 0.0;
            if (dsp::max_abs(whole) > 0.0) ratio = dsp::rms_amplitude_ratio(post, whole);
            out.add(prefix + "rms_ratio", ratio);
            out.add(prefix + "mean_diff", dsp::mean_difference(post, whole));
            const auto slopes = dsp::envelope_slope(whole, g.rate);
            out.add(prefix + "env_slope_pre", slopes.pre);
            out.add(prefix + "env_slope_post", slopes.post);
        }
        double pol = 0.0;
        if (dsp::max_abs(views[0]) > 0.0 || dsp::max_abs(views[1]) > 0.0 || dsp::max_abs(views[2]) > 0.0) {
            try {
                pol = dsp::polarization_slope(views[0], views[1], views[2]);
            } catch (const Error&) {
                pol = 0.0;  // constant non-zero channels
            }
        }
        out.add("other_" + band_name(band) + "_polarization", pol);
    }
    return out;
}

void append(NamedValues& dst, NamedValues&& src) {
    dst.names.insert(dst.names.end(), std::make_move_iterator(src.names.begin()), std::make_move_iterator(src.names.end()));
    dst.values.insert(dst.values.end(), src.values.begin(), src.values.end());
}

NamedValues extract_all(const TriTrace& win, const FeatureConfig& cfg, bool parallel) {
    const auto g = geometry(win, cfg);
    const FilterBank bank(win, cfg);
    NamedValues parts[4];
    if (parallel) {
        auto f0 = std::async(std::launch::async, [&] { return fluctuation_from(bank, g, cfg); });
        auto f1 = std::async(std::launch::async, [&] { return maximal_from(bank, g, cfg); });
        auto f2 = std::async(std::launch::async, [&] { return waterfall_from(bank, g, cfg); });
        parts[3] = other_from(bank, g, cfg);
        parts[0] = f0.get();
        parts[1] = f1.get();
        parts[2] = f2.get();
    } else {
        parts[0] = fluctuation_from(bank, g, cfg);
        parts[1] = maximal_from(bank, g, cfg);
        parts[2] = waterfall_from(bank, g, cfg);
        parts[3] = other_from(bank, g, cfg);
    }
    NamedValues all;
    for (auto& p : parts) append(all, std::move(p));
    return all;
}

}  // namespace

void FeatureConfig::validate() const {
    if (!(pre_s >= 5.0)) throw Error("features: pre_s must be at least 5 s");
    if (!(post_s >= 5.0)) throw Error("features: post_s must be at least 5 s");
    if (fluct_bands.empty() || waterfall_bands.empty() || other_bands.empty()) {
        throw Error("features: band lists must not be empty");
    }
}

int FeatureConfig::post_blocks() const { return static_cast<int>(std::floor(post_s / 5.0 + 1e-9)); }

std::size_t FeatureConfig::feature_count() const {
    const auto nf = fluct_bands.size(), nw = waterfall_bands.size(), no = other_bands.size();
    const std::size_t fluct = nf * 3 * 2 * (4 + static_cast<std::size_t>(post_blocks()));
    const std::size_t maximal = nf * 7;
    const std::size_t waterfall = nw * 3 * 2 * 10;
    const std::size_t other = no * (3 * 4 + 1);
    return fluct + maximal + waterfall + other;
}

double FeatureConfig::post_s_for_count(std::size_t count) {
    FeatureConfig cfg;
    for (int blocks = 1; blocks <= 40; ++blocks) {
        cfg.post_s = 5.0 * blocks;
        if (cfg.feature_count() == count) return cfg.post_s;
    }
    throw Error("feature count " + std::to_string(count) + " does not match any post-window length");
}

std::vector<std::string> feature_names(const FeatureConfig& cfg) {
    cfg.validate();
    const std::size_t rate = 100;
    std::vector<double> zeros(window_samples(cfg, rate), 0.0);
    const TriTrace win("names", rate, 0, zeros, zeros, zeros);
    return extract_all(win, cfg, false).names;
}

std::size_t window_samples(const FeatureConfig& cfg, double rate_hz) {
    return static_cast<std::size_t>(std::llround((cfg.pre_s + cfg.post_s) * rate_hz));
}

TriTrace cut_window(const TriTrace& stream, TimeUs t, const FeatureConfig& cfg) {
    const double rate = stream.sample_rate_hz();
    const std::int64_t first = stream.index_of(t) - std::llround(cfg.pre_s * rate);
    const auto count = window_samples(cfg, rate);
    if (first < 0 || static_cast<std::size_t>(first) + count > stream.size()) {
        throw Error("cut_window: stream does not cover the requested window");
    }
    return stream.slice(static_cast<std::size_t>(first), count);
}

NamedValues amplitude_fluctuation(const TriTrace& win, const FeatureConfig& cfg) {
    return fluctuation_from(FilterBank(win, cfg), geometry(win, cfg), cfg);
}

NamedValues maximal_amplitude(const TriTrace& win, const FeatureConfig& cfg) {
    if (!(cfg.post_s > 2.0)) throw Error("maximal_amplitude: post window must exceed 2 s");
    return maximal_from(FilterBank(win, cfg), geometry(win, cfg), cfg);
}

NamedValues spectral_waterfall(const TriTrace& win, const FeatureConfig& cfg) {
    return waterfall_from(FilterBank(win, cfg), geometry(win, cfg), cfg);
}

NamedValues other_features(const TriTrace& win, const FeatureConfig& cfg) {
    return other_from(FilterBank(win, cfg), geometry(win, cfg), cfg);
}

FeatureExtractor::FeatureExtractor(FeatureConfig cfg)
    : cfg_(std::move(cfg)), names_(std::make_shared<const std::vector<std::string>>(feature_names(cfg_))) {}

FeatureVector FeatureExtractor::assemble(const TriTrace& win, bool parallel) const {
    auto all = extract_all(win, cfg_, parallel);
    FeatureVector fv{std::move(all.values), names_, 0};
    for (double& v : fv.values) {
        if (!std::isfinite(v)) {
            v = 0.0;
            ++fv.nonfinite_replaced;
        }
    }
    return fv;
}

FeatureVector assemble(const TriTrace& win, const FeatureConfig& cfg) { return FeatureExtractor(cfg).assemble(win); }

void FeatureTable::append(const std::string& st, TimeUs t, int lbl, std::span<const double> values) {
    if (!names.empty() && values.size() != names.size()) throw Error("feature row length mismatch");
    station.push_back(st);
    time_us.push_back(t);
    label.push_back(lbl);
    x.append_row(values);
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
    out << "station,time_us,label";
    for (const auto& n : table.names) out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << table.station[r] << ',' << table.time_us[r] << ',' << table.label[r];
        for (double v : table.x.row(r)) out << ',' << detail::format_double(v);
        out << '\n';
    }
    if (!out) throw Error("write failure");
}

FeatureTable read_feature_table(std::istream& in) {
    detail::CsvReader reader(in, {"station", "time_us", "label"});
    FeatureTable table;
    table.names.assign(reader.header().begin() + 3, reader.header().end());
    if (table.names.empty()) throw FormatError("malformed header: no feature columns");
    std::vector<double> row(table.names.size());
    while (reader.next()) {
        const auto& f = reader.fields();
        const auto lbl = detail::parse_int(f[2], "label");
        if (lbl != 0 && lbl != 1) throw FormatError("malformed row: label must be 0 or 1");
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = detail::parse_double(f[i + 3], "feature");
        table.append(f[0], detail::parse_int(f[1], "time_us"), static_cast<int>(lbl), row);
    }
    return table;
}

}  // namespace qpk
