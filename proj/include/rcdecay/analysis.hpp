// analysis.hpp — observables extracted from a TimeSeries: revival peaks,
// exponential and power-law fits, cross-method deviations.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rcdecay/errors.hpp"
#include "rcdecay/time_series.hpp"

namespace rcdecay {

struct Peak {
    double time{0.0};
    double height{0.0};  // |a|²
    int window{0};       // round(t/τ) when τ is known, otherwise the peak's ordinal
};

struct PeakList {
    std::vector<Peak> peaks;
    std::string source;

    [[nodiscard]] std::size_t size() const { return peaks.size(); }
    [[nodiscard]] bool empty() const { return peaks.empty(); }
};

struct FitResult {
    enum class Kind { exponential, powerlaw } kind{Kind::exponential};
    double parameter{0.0};  // γ_fit for exponential, exponent p for power law
    double intercept{0.0};
    double r_squared{0.0};
    std::pair<double, double> window{0.0, 0.0};
    std::size_t points{0};
};

namespace detail {

struct LineFit {
    double slope{0.0};
    double intercept{0.0};
    double r_squared{0.0};
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw InvalidArgument("fit: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return f;
}

inline double max_spacing(const std::vector<double>& t) {
    double d = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) d = std::max(d, t[i] - t[i - 1]);
    return d;
}

} // namespace detail

// Local maxima of |a|² above min_height, kept greedily from the highest down
// so that accepted peaks are at least min_separation apart. Positions and
// heights are refined by a parabola through log|a|² at the three samples
// around each maximum. `period` > 0 assigns window = round(t/period).
inline PeakList detect_peaks(const TimeSeries& ts, double min_height, double min_separation, double period = 0.0) {
    if (ts.size() == 0) throw InvalidArgument("detect_peaks: empty series");
    ts.validate();
    const double dt = detail::max_spacing(ts.times);
    if (!(min_separation > 2.0 * dt)) {
        throw InvalidArgument("detect_peaks: min_separation must exceed twice the sample spacing");
    }
    const std::size_t n = ts.size();
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = ts.probability(i);

    std::vector<Peak> candidates;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(p[i] > p[i - 1] && p[i] >= p[i + 1]) || p[i] < min_height) continue;
        Peak pk{ts.times[i], p[i], 0};
        // Log-parabola vertex (exact for Gaussian bumps), only on a resolved
        // peak; next to a kink or a near-zero of a(t) the sample is kept.
        if (p[i - 1] > 0.1 * p[i] && p[i + 1] > 0.1 * p[i]) {
            const double l = std::log(p[i - 1]);
            const double c = std::log(p[i]);
            const double r = std::log(p[i + 1]);
            const double curv = l - 2.0 * c + r;
            if (curv < 0.0) {
                const double off = std::clamp(0.5 * (l - r) / curv, -0.5, 0.5);
                const double h = off >= 0.0 ? ts.times[i + 1] - ts.times[i] : ts.times[i] - ts.times[i - 1];
                pk.time = ts.times[i] + off * h;
                pk.height = std::exp(c - 0.25 * (l - r) * off);
            }
        }
        candidates.push_back(pk);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Peak& a, const Peak& b) { return a.height > b.height; });
    PeakList out;
    out.source = ts.source;
    for (const auto& c : candidates) {
        const bool clear = std::all_of(out.peaks.begin(), out.peaks.end(), [&](const Peak& q) {
            return std::abs(q.time - c.time) >= min_separation;
        });
        if (clear) out.peaks.push_back(c);
    }
    std::sort(out.peaks.begin(), out.peaks.end(), [](const Peak& a, const Peak& b) { return a.time < b.time; });
    for (std::size_t i = 0; i < out.peaks.size(); ++i) {
        auto& pk = out.peaks[i];
        pk.window = period > 0.0 ? static_cast<int>(std::lround(pk.time / period)) : static_cast<int>(i + 1);
    }
    return out;
}

// Least-squares line through log|a|² on [t_lo, t_hi]; γ_fit = −slope.
inline FitResult decay_rate_fit(const TimeSeries& ts, double t_lo, double t_hi) {
    // The upper edge may overhang the last sample by less than one spacing,
    // so "0.5τ" works on grids that do not hit it exactly.
    if (ts.size() == 0 || !(t_hi > t_lo) || t_lo < ts.times.front() ||
        t_hi > ts.times.back() + detail::max_spacing(ts.times)) {
        throw InvalidArgument("decay_rate_fit: window must lie inside the series");
    }
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double t = ts.times[i];
        if (t < t_lo || t > t_hi) continue;
        const double p = ts.probability(i);
        if (!(p > 0.0)) throw InvalidArgument("decay_rate_fit: |a|^2 vanishes inside the window");
        x.push_back(t);
        y.push_back(std::log(p));
    }
    if (x.size() < 2) throw InvalidArgument("decay_rate_fit: fewer than two samples in the window");
    const auto line = detail::least_squares(x, y);
    FitResult f;
    f.kind = FitResult::Kind::exponential;
    f.parameter = -line.slope;
    f.intercept = line.intercept;
    f.r_squared = line.r_squared;
    f.window = {t_lo, t_hi};
    f.points = x.size();
    return f;
}

// Least-squares line through (log m, log height) after dropping the first
// `skip_first` peaks; parameter is the exponent.
inline FitResult fit_powerlaw(const PeakList& peaks, int skip_first = 1) {
    if (skip_first < 0) throw InvalidArgument("fit_powerlaw: skip_first must be >= 0");
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = static_cast<std::size_t>(skip_first); i < peaks.size(); ++i) {
        const auto& pk = peaks.peaks[i];
        if (pk.window < 1 || !(pk.height > 0.0)) {
            throw InvalidArgument("fit_powerlaw: peaks need window index >= 1 and positive height");
        }
        x.push_back(std::log(static_cast<double>(pk.window)));
        y.push_back(std::log(pk.height));
    }
    if (x.size() < 5) throw InvalidArgument("fit_powerlaw: need at least 5 peaks after skipping");
    const auto line = detail::least_squares(x, y);
    FitResult f;
    f.kind = FitResult::Kind::powerlaw;
    f.parameter = line.slope;
    f.intercept = line.intercept;
    f.r_squared = line.r_squared;
    f.window = {peaks.peaks[static_cast<std::size_t>(skip_first)].time, peaks.peaks.back().time};
    f.points = x.size();
    return f;
}

struct MethodComparison {
    double max_amplitude_deviation{0.0};    // max |a_A − a_B|
    double max_probability_deviation{0.0};  // max ||a_A|² − |a_B|²|
    double time_of_max{0.0};
};

inline MethodComparison compare_methods(const TimeSeries& a, const TimeSeries& b) {
    if (a.size() != b.size()) throw InvalidArgument("compare_methods: series lengths differ");
    MethodComparison m;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ta = a.times[i];
        if (std::abs(ta - b.times[i]) > 1e-9 * std::max(1.0, std::abs(ta))) {
            throw InvalidArgument("compare_methods: time grids differ");
        }
        const double d = std::abs(a.amplitude[i] - b.amplitude[i]);
        if (d > m.max_amplitude_deviation) {
            m.max_amplitude_deviation = d;
            m.time_of_max = ta;
        }
        m.max_probability_deviation = std::max(m.max_probability_deviation, std::abs(a.probability(i) - b.probability(i)));
    }
    return m;
}

// max | |a|² + ΣP_i − 1 | over the series.
inline double conservation_error(const TimeSeries& ts) {
    if (!ts.has_populations()) throw InvalidArgument("conservation_error: series has no band populations");
    double e = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) e = std::max(e, std::abs(ts.norm(i) - 1.0));
    return e;
}

} // namespace rcdecay
