// laplace_series.hpp — closed-form survival amplitudes obtained by inverting
// the Laplace transform window by window. Every formula is a finite sum of
// step terms switched on at the revival times.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rcdecay/errors.hpp"
#include "rcdecay/model.hpp"
#include "rcdecay/numeric.hpp"
#include "rcdecay/time_series.hpp"

namespace rcdecay {

struct SeriesResult {
    std::complex<double> value{0.0, 0.0};
    int terms_used{0};
    bool valid{true};  // t inside the window where the formula is exact
};

namespace detail {

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive and finite");
}

inline void require_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("series: t must be finite and >= 0");
}

inline constexpr int scaled_laguerre_threshold = 150;

// −(x/k) e^{−x/2} L^{(1)}_{k−1}(x), x = γ t_k > 0.
inline double constant_term(int k, double x) {
    if (k <= scaled_laguerre_threshold) {
        return -(x / k) * std::exp(-0.5 * x) * numeric::laguerre(k - 1, 1.0, x);
    }
    const auto l = numeric::laguerre_scaled(k - 1, 1.0, x);
    if (l.sign == 0.0) return 0.0;
    return -l.sign * std::exp(std::log(x / k) - 0.5 * x + l.log_abs);
}

} // namespace detail

// a(t) = e^{−γt/2} + Σ_{k≥1} −(γt_k/k) e^{−γt_k/2} L^{(1)}_{k−1}(γt_k) Θ(t_k), t_k = t − kτ.
inline SeriesResult constant_series(double gamma, double tau, double t) {
    detail::require_positive(gamma, "constant_series: gamma");
    detail::require_positive(tau, "constant_series: tau");
    detail::require_time(t);
    const int k_max = static_cast<int>(std::floor(t / tau));
    double a = std::exp(-0.5 * gamma * t);
    for (int k = 1; k <= k_max; ++k) {
        const double tk = t - k * tau;
        if (tk <= 0.0) continue;
        a += detail::constant_term(k, gamma * tk);
    }
    return {a, k_max + 1, true};
}

// a(t) = Σ_n [−(γ/4)(t−nT)]ⁿ/n! e^{−(t−nT)γ/4} Θ(t−nT).
inline SeriesResult harmonic_continuum(double gamma, double period, double t) {
    detail::require_positive(gamma, "harmonic_continuum: gamma");
    detail::require_positive(period, "harmonic_continuum: T");
    detail::require_time(t);
    const int n_max = static_cast<int>(std::floor(t / period));
    double a = std::exp(-0.25 * gamma * t);
    for (int n = 1; n <= n_max; ++n) {
        const double x = 0.25 * gamma * (t - n * period);
        if (x <= 0.0) continue;
        const double mag = std::exp(n * std::log(x) - std::lgamma(n + 1.0) - x);
        a += (n % 2 == 0) ? mag : -mag;
    }
    return {a, n_max + 1, true};
}

// Early-window series for the harmonic band sampled with M levels per period.
//   M = 2: the constant series with γ → γ/2 and τ = T (exact for every t)
//   M = 3: a⁽¹⁾ = −(γ/4)s e^{−γs/4}, a⁽²⁾ = [−(γ/4)s + (γ²/32)s²] e^{−γs/4}
//   M = 4: a⁽¹⁾ as for M = 3, a⁽²⁾ = (γ²/32)s² e^{−γs/4}
// with s = t − mT for the m-th term; M = 3, 4 are exact for t < 3T.
inline SeriesResult harmonic_discrete_series(int order, double gamma, double period, double t) {
    if (order < 2 || order > 4) {
        throw UnsupportedProfile("harmonic_discrete_series: M must be 2, 3 or 4");
    }
    detail::require_positive(gamma, "harmonic_discrete_series: gamma");
    detail::require_positive(period, "harmonic_discrete_series: T");
    detail::require_time(t);
    if (order == 2) return constant_series(0.5 * gamma, period, t);

    const double q = 0.25 * gamma;
    double a = std::exp(-q * t);
    int terms = 1;
    const double s1 = t - period;
    if (s1 > 0.0) {
        a += -q * s1 * std::exp(-q * s1);
        ++terms;
    }
    const double s2 = t - 2.0 * period;
    if (s2 > 0.0) {
        const double quad = gamma * gamma / 32.0 * s2 * s2;
        a += (order == 3 ? quad - q * s2 : quad) * std::exp(-q * s2);
        ++terms;
    }
    return {a, terms, t < 3.0 * period};
}

// Two parallel constant bands, through second order in the revival terms.
// Each band contributes (γ_i/2)coth(sτ_i/2) to the self-energy, so
//   a(s) = 1/(s + g + Σ_i γ_i Σ_k e^{−ksτ_i}),  g = γ₁₂/2,
// and expanding in the exponentials gives, with u = t − (revival time):
//   order 0: e^{−gt}
//   order 1: −γ_i u e^{−gu} at τ_i and at 2τ_i
//   order 2: (γ_i²/2)u² e^{−gu} at 2τ_i, γ₁γ₂u² e^{−gu} at τ₁+τ₂
// exact until a third-order revival (3τ_i, 2τ_i + τ_j) starts.
inline SeriesResult twoband_series(double gamma1, double gamma2, double tau1, double tau2, double t) {
    detail::require_positive(gamma1, "twoband_series: gamma1");
    detail::require_positive(gamma2, "twoband_series: gamma2");
    detail::require_positive(tau1, "twoband_series: tau1");
    detail::require_positive(tau2, "twoband_series: tau2");
    detail::require_time(t);

    const double g = 0.5 * (gamma1 + gamma2);
    double a = std::exp(-g * t);
    int terms = 1;
    auto add = [&](double shift, auto&& poly) {
        const double u = t - shift;
        if (u <= 0.0) return;
        a += poly(u) * std::exp(-g * u);
        ++terms;
    };
    add(tau1, [&](double u) { return -gamma1 * u; });
    add(tau2, [&](double u) { return -gamma2 * u; });
    add(2.0 * tau1, [&](double u) { return -gamma1 * u + 0.5 * gamma1 * gamma1 * u * u; });
    add(2.0 * tau2, [&](double u) { return -gamma2 * u + 0.5 * gamma2 * gamma2 * u * u; });
    add(tau1 + tau2, [&](double u) { return gamma1 * gamma2 * u * u; });

    const double window = std::min({3.0 * tau1, 3.0 * tau2, 2.0 * tau1 + tau2, tau1 + 2.0 * tau2});
    return {a, terms, t < window};
}

// Continuum band population 1 − e^{−γt}.
inline double pb_constant(double gamma, double t) {
    detail::require_positive(gamma, "pb_constant: gamma");
    detail::require_time(t);
    return -std::expm1(-gamma * t);
}

// ------------------------------ model dispatch ------------------------------

// Which closed form describes a model, with its parameters.
struct SeriesPlan {
    enum class Kind { constant, twoband, harmonic_discrete, harmonic_continuum } kind{Kind::constant};
    double gamma1{0.0};
    double gamma2{0.0};
    double tau1{0.0};
    double tau2{0.0};
    int order{0};
    std::string description;
};

// Supported: one constant band, two constant bands, or one harmonic band.
// The formulas assume the embedded state is resonant with the level at zero.
inline SeriesPlan plan_series(const ModelSpec& model) {
    model.validate();
    if (model.detuning != 0.0) {
        throw UnsupportedProfile("series: closed forms assume detuning 0 (state resonant with the central level)");
    }
    SeriesPlan plan;
    const auto& bands = model.bands;
    auto constant_beta = [](const BandSpec& b) -> const ConstantCoupling* {
        return std::get_if<ConstantCoupling>(&b.profile);
    };
    if (bands.size() == 1 && constant_beta(bands[0]) != nullptr) {
        const double beta = constant_beta(bands[0])->beta;
        plan.kind = SeriesPlan::Kind::constant;
        plan.gamma1 = numeric::two_pi * beta * beta / bands[0].delta;
        plan.tau1 = numeric::two_pi / bands[0].delta;
        plan.description = "constant_series";
    } else if (bands.size() == 2 && constant_beta(bands[0]) != nullptr && constant_beta(bands[1]) != nullptr) {
        plan.kind = SeriesPlan::Kind::twoband;
        for (int i = 0; i < 2; ++i) {
            const double beta = constant_beta(bands[i])->beta;
            (i == 0 ? plan.gamma1 : plan.gamma2) = numeric::two_pi * beta * beta / bands[i].delta;
            (i == 0 ? plan.tau1 : plan.tau2) = numeric::two_pi / bands[i].delta;
        }
        plan.description = "twoband_series";
    } else if (bands.size() == 1 && std::holds_alternative<HarmonicCoupling>(bands[0].profile)) {
        const auto& h = std::get<HarmonicCoupling>(bands[0].profile);
        const auto order = harmonic_order(bands[0].delta, h.period);
        if (!order) throw UnsupportedProfile("series: harmonic period is not a whole number of level spacings");
        plan.order = *order;
        plan.gamma1 = numeric::two_pi * h.beta * h.beta / bands[0].delta;
        plan.tau1 = h.period;
        if (*order <= 4) {
            plan.kind = SeriesPlan::Kind::harmonic_discrete;
            plan.description = "harmonic_discrete_series M=" + std::to_string(*order);
        } else {
            plan.kind = SeriesPlan::Kind::harmonic_continuum;
            plan.description = "harmonic_continuum";
        }
    } else {
        throw UnsupportedProfile("series: no closed form for this band combination");
    }
    if (plan.gamma1 <= 0.0 || (plan.kind == SeriesPlan::Kind::twoband && plan.gamma2 <= 0.0)) {
        throw UnsupportedProfile("series: closed forms need nonzero coupling");
    }
    return plan;
}

inline SeriesResult evaluate(const SeriesPlan& plan, double t) {
    switch (plan.kind) {
    case SeriesPlan::Kind::constant: return constant_series(plan.gamma1, plan.tau1, t);
    case SeriesPlan::Kind::twoband: return twoband_series(plan.gamma1, plan.gamma2, plan.tau1, plan.tau2, t);
    case SeriesPlan::Kind::harmonic_discrete: return harmonic_discrete_series(plan.order, plan.gamma1, plan.tau1, t);
    case SeriesPlan::Kind::harmonic_continuum: return harmonic_continuum(plan.gamma1, plan.tau1, t);
    }
    return {};
}

struct SeriesTimeSeries {
    TimeSeries series;
    SeriesPlan plan;
    double first_invalid_time{-1.0};  // < 0 when every sample is inside the window
};

// a(t) on a grid. Band populations are only known in closed form for a single
// constant band before the first revival, so none are attached.
inline SeriesTimeSeries series_time_series(const ModelSpec& model, std::span<const double> times) {
    SeriesTimeSeries out;
    out.plan = plan_series(model);
    out.series.source = "series";
    out.series.times.assign(times.begin(), times.end());
    out.series.amplitude.resize(times.size());
    for (double t : times) detail::require_time(t);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(times.size()); ++i) {
        out.series.amplitude[i] = evaluate(out.plan, times[i]).value;
    }
    for (double t : times) {
        if (!evaluate(out.plan, t).valid) {
            out.first_invalid_time = t;
            break;
        }
    }
    return out;
}

} // namespace rcdecay
