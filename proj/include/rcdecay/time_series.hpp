// time_series.hpp — sampled survival amplitude with per-band populations

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "rcdecay/errors.hpp"

namespace rcdecay {

struct TimeSeries {
    std::vector<double> times;
    std::vector<std::complex<double>> amplitude;     // a(t)
    std::vector<std::vector<double>> populations;    // [band][sample], may be empty
    double norm_drift{0.0};                          // max | |a|² + ΣP_i − 1 |
    std::string source;

    [[nodiscard]] std::size_t size() const { return times.size(); }

    [[nodiscard]] double probability(std::size_t i) const { return std::norm(amplitude[i]); }

    [[nodiscard]] bool has_populations() const { return !populations.empty(); }

    // |a|² + Σ_i P_i at sample i.
    [[nodiscard]] double norm(std::size_t i) const {
        double s = probability(i);
        for (const auto& p : populations) s += p[i];
        return s;
    }

    void validate() const {
        if (amplitude.size() != times.size()) throw InvalidArgument("time series: column lengths differ");
        for (const auto& p : populations) {
            if (p.size() != times.size()) throw InvalidArgument("time series: population column length differs");
        }
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) throw InvalidArgument("time series: times not strictly increasing");
        }
    }

    // Recompute norm_drift from the stored columns.
    void update_norm_drift() {
        norm_drift = 0.0;
        if (!has_populations()) return;
        for (std::size_t i = 0; i < size(); ++i) norm_drift = std::max(norm_drift, std::abs(norm(i) - 1.0));
    }
};

// t = 0, dt, 2dt, ... up to and including t_max (within dt·1e-9).
inline std::vector<double> uniform_grid(double t_max, double dt) {
    if (!(dt > 0.0) || !(t_max >= 0.0)) throw InvalidArgument("time grid needs dt > 0 and t_max >= 0");
    const auto n = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9));
    std::vector<double> grid(n + 1);
    for (std::size_t i = 0; i <= n; ++i) grid[i] = static_cast<double>(i) * dt;
    return grid;
}

} // namespace rcdecay
