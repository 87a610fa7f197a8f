// numeric.hpp — small numerical kernels: reduced trigonometry and Laguerre recurrences

#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace rcdecay::numeric {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// sin(πx) and cos(πx) with the argument reduced to [-1/2, 1/2] first, so that
// values near integer x keep full relative precision.
inline double sin_pi(double x) {
    const double n = std::nearbyint(x);
    const double r = x - n;
    const double s = std::sin(pi * r);
    return std::fmod(n, 2.0) == 0.0 ? s : -s;
}

inline double cos_pi(double x) {
    const double n = std::nearbyint(x);
    const double r = x - n;
    const double c = std::cos(pi * r);
    return std::fmod(n, 2.0) == 0.0 ? c : -c;
}

// cot(πx), period 1.
inline double cot_pi(double x) {
    const double r = x - std::nearbyint(x);
    return std::cos(pi * r) / std::sin(pi * r);
}

// tan(πx), period 1.
inline double tan_pi(double x) {
    const double r = x - std::nearbyint(x);
    return std::sin(pi * r) / std::cos(pi * r);
}

// Generalized Laguerre polynomial L_n^{(alpha)}(x), plain three-term recurrence.
inline double laguerre(int n, double alpha, double x) {
    if (n < 0) return 0.0;
    double prev = 1.0;
    if (n == 0) return prev;
    double cur = 1.0 + alpha - x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

// L_n^{(alpha)}(x) as sign · exp(log_abs). The recurrence is rescaled whenever
// the iterates grow past 1e150 so large n and x neither overflow nor lose the
// magnitude that a subsequent exp(-x/2) factor has to cancel.
struct ScaledValue {
    double sign{1.0};
    double log_abs{0.0};
};

inline ScaledValue laguerre_scaled(int n, double alpha, double x) {
    constexpr double big = 1e150;
    const double log_big = std::log(big);
    double shift = 0.0;
    double prev = 1.0;
    double cur = (n == 0) ? 1.0 : 1.0 + alpha - x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
        if (std::abs(cur) > big) {
            cur /= big;
            prev /= big;
            shift += log_big;
        }
    }
    if (cur == 0.0) return {0.0, -std::numeric_limits<double>::infinity()};
    return {cur < 0.0 ? -1.0 : 1.0, shift + std::log(std::abs(cur))};
}

} // namespace rcdecay::numeric
