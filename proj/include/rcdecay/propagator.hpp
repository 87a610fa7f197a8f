// propagator.hpp — direct integration of i d/dt (a, b) = H (a, b) for the
// arrowhead Hamiltonian, using an adaptive Dormand–Prince 5(4) pair with PI
// step control and continuous (dense) output at the sample times.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "rcdecay/errors.hpp"
#include "rcdecay/model.hpp"
#include "rcdecay/time_series.hpp"

namespace rcdecay {

using cplx = std::complex<double>;

// Amplitudes [a, b_0, b_1, ...] with the b_j in ArrowheadSystem level order.
struct StateVector {
    std::vector<cplx> values;

    StateVector() = default;
    explicit StateVector(std::size_t levels) : values(levels + 1, cplx{0.0, 0.0}) {}

    static StateVector initial(const ArrowheadSystem& sys) {
        StateVector s(sys.size());
        s.values[0] = 1.0;
        return s;
    }

    [[nodiscard]] cplx a() const { return values[0]; }
    [[nodiscard]] std::size_t levels() const { return values.empty() ? 0 : values.size() - 1; }

    [[nodiscard]] double norm_squared() const {
        double s = 0.0;
        for (const auto& v : values) s += std::norm(v);
        return s;
    }

    // P_i = Σ_{j in band i} |b_j|²
    [[nodiscard]] std::vector<double> band_populations(const ArrowheadSystem& sys) const {
        std::vector<double> p(sys.band_count, 0.0);
        for (std::size_t j = 0; j < sys.size(); ++j) p[sys.band_of[j]] += std::norm(values[j + 1]);
        return p;
    }
};

namespace detail {

// dy = −i H y in O(levels).
inline void apply_rhs(const ArrowheadSystem& sys, const cplx* y, cplx* dy) {
    const std::size_t n = sys.size();
    const double* e = sys.energies.data();
    const cplx* c = sys.couplings.data();
    const double ar = y[0].real();
    const double ai = y[0].imag();
    double sr = sys.detuning * ar;
    double si = sys.detuning * ai;
    for (std::size_t j = 0; j < n; ++j) {
        const double br = y[j + 1].real();
        const double bi = y[j + 1].imag();
        const double cr = c[j].real();
        const double ci = c[j].imag();
        sr += cr * br - ci * bi;
        si += cr * bi + ci * br;
        // ε b + β* a
        const double hr = e[j] * br + cr * ar + ci * ai;
        const double hi = e[j] * bi + cr * ai - ci * ar;
        dy[j + 1] = cplx(hi, -hr);
    }
    dy[0] = cplx(si, -sr);
}

// Interaction picture: ã = a e^{iωt}, b̃_j = b_j e^{iε_j t}.
inline void apply_rhs_rotating(const ArrowheadSystem& sys, double t, const cplx* y, cplx* dy) {
    const std::size_t n = sys.size();
    cplx sum{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
        const cplx ph = std::polar(1.0, (sys.detuning - sys.energies[j]) * t);
        const cplx cb = sys.couplings[j] * y[j + 1];
        sum += cplx(cb.real() * ph.real() - cb.imag() * ph.imag(), cb.real() * ph.imag() + cb.imag() * ph.real());
        const cplx ca = std::conj(sys.couplings[j]) * y[0];
        const cplx v(ca.real() * ph.real() + ca.imag() * ph.imag(), ca.imag() * ph.real() - ca.real() * ph.imag());
        dy[j + 1] = cplx(v.imag(), -v.real());
    }
    dy[0] = cplx(sum.imag(), -sum.real());
}

inline double l2_norm(const std::vector<cplx>& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

} // namespace detail

// Derivative of the state under the arrowhead Hamiltonian.
inline StateVector rhs(const StateVector& state, const ArrowheadSystem& sys) {
    if (state.values.size() != sys.size() + 1) {
        throw InvalidArgument("rhs: state has " + std::to_string(state.values.size()) +
                              " components, model needs " + std::to_string(sys.size() + 1));
    }
    StateVector d(sys.size());
    detail::apply_rhs(sys, state.values.data(), d.values.data());
    return d;
}

struct PropagateOptions {
    bool rotating_frame{false};
    double initial_step{0.0};           // 0 picks a starting step automatically
    std::size_t max_steps{100'000'000};
};

struct IntegrationStats {
    std::size_t accepted{0};
    std::size_t rejected{0};
    std::size_t rhs_calls{0};
    double last_step{0.0};
};

// Dormand–Prince 5(4) with FSAL, PI step-size control and the 4th-order
// continuous extension. The error of a step is ‖y5 − y4‖₂/(tol·‖y‖₂), or the
// step's norm change against its share of the norm budget if that is larger.
class Dopri5 {
public:
    Dopri5(const ArrowheadSystem& sys, double tol, bool rotating)
        : sys_(sys), tol_(tol), rotating_(rotating) {
        const std::size_t n = sys.size() + 1;
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &r3_, &r4_, &r5_}) v->resize(n);
    }

    // Integrate y from t0 to t1 (either direction). observe(i, t, y) is called
    // for every samples[i] in the closed range, in integration order.
    template <class Observer>
    IntegrationStats integrate(std::vector<cplx>& y, double t0, double t1, std::span<const double> samples,
                               Observer&& observe, const PropagateOptions& opts = {}) {
        IntegrationStats stats;
        const double dir = t1 >= t0 ? 1.0 : -1.0;
        const std::size_t n = y.size();
        double t = t0;
        std::size_t next = 0;
        while (next < samples.size() && dir * (samples[next] - t0) <= 0.0) {
            if (samples[next] == t0) observe(next, t0, y);
            ++next;
        }
        if (t0 == t1) return stats;

        eval(t, y, k1_);
        ++stats.rhs_calls;
        double h = opts.initial_step > 0.0 ? opts.initial_step : initial_step(t, y, dir, stats);
        h = std::min(h, std::abs(t1 - t0));
        double err_old = 1e-4;
        bool last_rejected = false;
        const double span = std::abs(t1 - t0);

        while (dir * (t1 - t) > 0.0) {
            if (stats.accepted + stats.rejected >= opts.max_steps) {
                throw StiffFailure("propagate: step budget exhausted at t = " + std::to_string(t));
            }
            if (h < 1e-14 * std::max(std::abs(t), span)) {
                std::ostringstream msg;
                msg << "propagate: step size underflow (h = " << h << " at t = " << t
                    << "; largest |eps_n| = " << sys_.max_abs_energy() << ", stability needs h ~ "
                    << 3.3 / std::max(sys_.max_abs_energy(), 1e-300) << ")";
                throw StiffFailure(msg.str());
            }
            bool final_step = false;
            if (h >= std::abs(t1 - t)) {
                h = std::abs(t1 - t);
                final_step = true;
            }
            const double hs = dir * h;
            step(t, hs, y);
            stats.rhs_calls += 6;

            double num = 0.0;
            double ny = 0.0;
            double nn = 0.0;
            double dnorm = 0.0;  // ‖ynew‖² − ‖y‖², summed from increments
            for (std::size_t i = 0; i < n; ++i) {
                const cplx e = hs * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
                num += std::norm(e);
                ny += std::norm(y[i]);
                nn += std::norm(ynew_[i]);
                dnorm += std::real(std::conj(ynew_[i] - y[i]) * (ynew_[i] + y[i]));
            }
            const double scale = tol_ * std::max({std::sqrt(ny), std::sqrt(nn), 1e-300});
            // The pair is slightly dissipative; its norm loss is systematic and
            // would grow linearly with the run length. Each step may spend at
            // most its share h/span of a norm_budget·tol total.
            const double norm_allowed = norm_budget * tol_ * (h / span) * std::max(ny, 1e-300);
            const double err = std::max(std::sqrt(num) / scale, std::abs(dnorm) / norm_allowed);

            if (err <= 1.0) {
                const double t_new = final_step ? t1 : t + hs;
                if (next < samples.size() && dir * (samples[next] - t_new) <= 0.0) {
                    prepare_dense(hs, y);
                    while (next < samples.size() && dir * (samples[next] - t_new) <= 0.0) {
                        const double theta = (samples[next] - t) / hs;
                        interpolate(theta, y, ytmp_);
                        observe(next, samples[next], ytmp_);
                        ++next;
                    }
                }
                y.swap(ynew_);
                std::swap(k1_, k7_);
                t = t_new;
                ++stats.accepted;
                stats.last_step = h;
                // PI controller (β = 0.04)
                double fac = std::pow(std::max(err, 1e-16), 0.17) / std::pow(err_old, 0.04);
                fac = std::clamp(fac / 0.9, 0.1, 5.0);
                double h_new = h / fac;
                if (last_rejected) h_new = std::min(h_new, h);
                err_old = std::max(err, 1e-4);
                last_rejected = false;
                h = h_new;
            } else {
                ++stats.rejected;
                h = h / std::min(5.0, std::pow(err, 0.17) / 0.9);
                last_rejected = true;
            }
        }
        return stats;
    }

    // total |‖y‖² − 1| the integration may spend, in units of tol
    static constexpr double norm_budget = 20.0;

private:
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                            d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                            d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

    void eval(double t, const std::vector<cplx>& y, std::vector<cplx>& dy) const {
        if (rotating_) detail::apply_rhs_rotating(sys_, t, y.data(), dy.data());
        else detail::apply_rhs(sys_, y.data(), dy.data());
    }

    void step(double t, double h, const std::vector<cplx>& y) {
        const std::size_t n = y.size();
        for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * (a21 * k1_[i]);
        eval(t + c2 * h, ytmp_, k2_);
        for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        eval(t + c3 * h, ytmp_, k3_);
        for (std::size_t i = 0; i < n; ++i) ytmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
        eval(t + c4 * h, ytmp_, k4_);
        for (std::size_t i = 0; i < n; ++i)
            ytmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
        eval(t + c5 * h, ytmp_, k5_);
        for (std::size_t i = 0; i < n; ++i)
            ytmp_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
        eval(t + h, ytmp_, k6_);
        for (std::size_t i = 0; i < n; ++i)
            ynew_[i] = y[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
        eval(t + h, ynew_, k7_);
    }

    void prepare_dense(double h, const std::vector<cplx>& y) {
        const std::size_t n = y.size();
        for (std::size_t i = 0; i < n; ++i) {
            const cplx r2 = ynew_[i] - y[i];
            r3_[i] = h * k1_[i] - r2;
            r4_[i] = r2 - h * k7_[i] - r3_[i];
            r5_[i] = h * (d1 * k1_[i] + d3 * k3_[i] + d4 * k4_[i] + d5 * k5_[i] + d6 * k6_[i] + d7 * k7_[i]);
        }
    }

    void interpolate(double theta, const std::vector<cplx>& y, std::vector<cplx>& out) const {
        const double th1 = 1.0 - theta;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const cplx r2 = ynew_[i] - y[i];
            out[i] = y[i] + theta * (r2 + th1 * (r3_[i] + theta * (r4_[i] + th1 * r5_[i])));
        }
    }

    double initial_step(double t, const std::vector<cplx>& y, double dir, IntegrationStats& stats) {
        const double d0 = detail::l2_norm(y);
        const double d1n = detail::l2_norm(k1_);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        for (std::size_t i = 0; i < y.size(); ++i) ytmp_[i] = y[i] + dir * h0 * k1_[i];
        eval(t + dir * h0, ytmp_, k2_);
        ++stats.rhs_calls;
        double diff = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) diff += std::norm(k2_[i] - k1_[i]);
        const double d2 = std::sqrt(diff) / (d0 * h0);
        const double dmax = std::max(d1n / std::max(d0, 1e-300), d2);
        const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 * tol_ / dmax, 0.2);
        return std::min(100.0 * h0, h1);
    }

    const ArrowheadSystem& sys_;
    double tol_;
    bool rotating_;
    std::vector<cplx> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, r3_, r4_, r5_;
};

namespace detail {
inline void check_tol(double tol) {
    if (!(tol >= 1e-12 && tol <= 1e-4)) throw InvalidArgument("propagate: tol must lie in [1e-12, 1e-4]");
}
} // namespace detail

// Evolve `state` from t0 to t1 (t1 < t0 runs backwards in time).
inline StateVector evolve(const ArrowheadSystem& sys, StateVector state, double t0, double t1, double tol,
                          const PropagateOptions& opts = {}) {
    detail::check_tol(tol);
    if (state.values.size() != sys.size() + 1) throw InvalidArgument("evolve: state dimension does not match model");
    if (opts.rotating_frame) {
        for (std::size_t j = 0; j < sys.size(); ++j) state.values[j + 1] *= std::polar(1.0, sys.energies[j] * t0);
        state.values[0] *= std::polar(1.0, sys.detuning * t0);
    }
    Dopri5 integrator(sys, tol, opts.rotating_frame);
    integrator.integrate(state.values, t0, t1, {}, [](std::size_t, double, const std::vector<cplx>&) {}, opts);
    if (opts.rotating_frame) {
        for (std::size_t j = 0; j < sys.size(); ++j) state.values[j + 1] *= std::polar(1.0, -sys.energies[j] * t1);
        state.values[0] *= std::polar(1.0, -sys.detuning * t1);
    }
    return state;
}

struct PropagationResult {
    TimeSeries series;
    IntegrationStats stats;
};

// Integrate from a = 1, b = 0 and sample a(t) and P_i(t) on 0, dt, ..., t_max.
inline PropagationResult propagate_system(const ArrowheadSystem& sys, double t_max, double sample_dt, double tol,
                                          const PropagateOptions& opts = {}) {
    detail::check_tol(tol);
    if (!(t_max > 0.0)) throw InvalidArgument("propagate: t_max must be positive");
    const auto grid = uniform_grid(t_max, sample_dt);

    PropagationResult out;
    auto& ts = out.series;
    ts.source = "ode";
    ts.times = grid;
    ts.amplitude.resize(grid.size());
    ts.populations.assign(sys.band_count, std::vector<double>(grid.size(), 0.0));

    auto observe = [&](std::size_t i, double t, const std::vector<cplx>& y) {
        cplx a = y[0];
        if (opts.rotating_frame) a *= std::polar(1.0, -sys.detuning * t);
        ts.amplitude[i] = a;
        for (std::size_t j = 0; j < sys.size(); ++j) ts.populations[sys.band_of[j]][i] += std::norm(y[j + 1]);
    };
    auto state = StateVector::initial(sys);
    Dopri5 integrator(sys, tol, opts.rotating_frame);
    out.stats = integrator.integrate(state.values, 0.0, grid.back() > 0.0 ? grid.back() : t_max, grid, observe, opts);
    ts.update_norm_drift();
    return out;
}

inline TimeSeries propagate(const ModelSpec& model, double t_max, double sample_dt, double tol,
                            const PropagateOptions& opts = {}) {
    return propagate_system(assemble(model), t_max, sample_dt, tol, opts).series;
}

// Band populations of a propagated series.
inline const std::vector<std::vector<double>>& band_populations(const TimeSeries& ts) {
    if (!ts.has_populations()) throw InvalidArgument("band_populations: series was recorded without populations");
    return ts.populations;
}

} // namespace rcdecay
