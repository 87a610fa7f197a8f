// eigensolver.hpp — secular equation of the arrowhead Hamiltonian, overlap
// weights and the eigen-sum evaluation of a(t) and b_n(t).
//
// For an embedded state at ω coupled to levels ε_j with strengths β_j the
// eigenvalues solve
//
//     E − ω = Σ_j |β_j|² / (E − ε_j),
//
// with exactly one root in every gap between consecutive distinct levels and
// one root beyond each end of the band. Each root is stored as a pole index b
// plus an offset δ = E − ε_b so differences E − ε_j keep full precision even
// deep inside a wide band. The overlap weight of a root is
// |⟨a|v⟩|² = 1/x², x² = 1 + Σ_j |β_j|²/(E − ε_j)².

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "rcdecay/errors.hpp"
#include "rcdecay/model.hpp"
#include "rcdecay/numeric.hpp"
#include "rcdecay/time_series.hpp"

namespace rcdecay {

enum class SecularMode { direct, closed_form };
enum class WeightRoute { direct, closed_form };

// ------------------------------- secular sums -------------------------------

// Truncated sum Σ_j |β_j|²/(E − ε_j) over the levels of `sys`.
inline double secular_rhs(double energy, const ArrowheadSystem& sys) {
    const double guard = 1e-12 * sys.min_delta;
    double s = 0.0;
    for (std::size_t j = 0; j < sys.size(); ++j) {
        const double d = energy - sys.energies[j];
        if (std::abs(d) < guard) {
            std::ostringstream msg;
            msg << "secular_rhs: E = " << energy << " is within 1e-12*delta of the level " << sys.energies[j];
            throw PoleProximity(msg.str());
        }
        s += std::norm(sys.couplings[j]) / d;
    }
    return s;
}

namespace detail {

inline bool harmonic_level_coupled(int n, double delta, double period) {
    return std::abs(numeric::cos_pi(n * delta * period / numeric::two_pi)) >= coupling_zero_threshold;
}

// Infinite-band sum for one band: (β²/Δ)·g(z) with z = E/Δ.
inline double closed_form_band_sum(double energy, const BandSpec& band) {
    const double z = energy / band.delta;
    const double n_near = std::nearbyint(z);
    const bool near_level = std::abs(z - n_near) < 1e-12;

    if (const auto* c = std::get_if<ConstantCoupling>(&band.profile)) {
        if (c->beta == 0.0) return 0.0;
        if (near_level) throw PoleProximity("secular_rhs: E is within 1e-12*delta of a band level");
        return c->beta * c->beta / band.delta * numeric::pi * numeric::cot_pi(z);
    }
    if (const auto* h = std::get_if<HarmonicCoupling>(&band.profile)) {
        if (h->beta == 0.0) return 0.0;
        const auto order = harmonic_order(band.delta, h->period);
        if (!order || *order > 4) {
            throw UnsupportedProfile("secular_rhs: closed form exists only for harmonic bands with M = 2π/(ΔT) in {1,2,3,4}");
        }
        if (near_level && harmonic_level_coupled(static_cast<int>(n_near), band.delta, h->period)) {
            throw PoleProximity("secular_rhs: E is within 1e-12*delta of a coupled band level");
        }
        const double pi = numeric::pi;
        double g = 0.0;
        switch (*order) {
            case 1: g = pi * numeric::cot_pi(z); break;
            case 2: g = pi / 2.0 * numeric::cot_pi(z / 2.0); break;
            case 3:
                g = pi / 3.0 * numeric::cot_pi(z / 3.0) -
                    pi / 3.0 * numeric::sin_pi(2.0 * z / 3.0) / (1.0 + 2.0 * numeric::cos_pi(2.0 * z / 3.0));
                break;
            default:
                g = pi / 4.0 * numeric::cot_pi(z / 4.0) - pi / 4.0 * numeric::tan_pi(z / 2.0);
                break;
        }
        return h->beta * h->beta / band.delta * g;
    }
    throw UnsupportedProfile("secular_rhs: no closed form for explicit coupling lists");
}

} // namespace detail

// Σ_n |β_n|²/(E − ε_n): `direct` sums the truncated model, `closed_form` uses
// the infinite-band expressions (constant coupling, harmonic M = 1..4).
inline double secular_rhs(double energy, const ModelSpec& model, SecularMode mode) {
    if (mode == SecularMode::direct) return secular_rhs(energy, assemble(model));
    model.validate();
    double s = 0.0;
    for (const auto& band : model.bands) s += detail::closed_form_band_sum(energy, band);
    return s;
}

// -------------------------------- eigensystem --------------------------------

struct SolveOptions {
    double weight_floor{1e-14};      // roots with smaller weight are skipped in amplitude sums
    double merge_tolerance{1e-10};   // levels closer than this·Δ_min share one pole
};

struct EigenSystem {
    ArrowheadSystem system;
    std::vector<double> poles;             // distinct coupled level energies, ascending
    std::vector<double> residues;          // Σ|β|² of the levels sharing each pole
    std::vector<std::size_t> level_pole;   // pole index of each system level
    std::vector<double> eigenvalues;       // ascending
    std::vector<double> weights;           // |⟨a|v_m⟩|²
    std::vector<double> delta_shifts;      // E_m − poles[base[m]] (negative for the lowest root)
    std::vector<std::size_t> base;
    double weight_floor{1e-14};
    double dropped_weight{0.0};            // Σ of weights below the floor

    [[nodiscard]] std::size_t size() const { return eigenvalues.size(); }

    [[nodiscard]] double weight_sum() const {
        return std::accumulate(weights.begin(), weights.end(), 0.0);
    }

    // E_m − ε_j for system level j, without cancellation.
    [[nodiscard]] double gap(std::size_t m, std::size_t level) const {
        return (poles[base[m]] - poles[level_pole[level]]) + delta_shifts[m];
    }
};

namespace detail {

struct SecularValue {
    double f;   // E − ω − Σ r_j/(E − p_j)
    double df;  // 1 + Σ r_j/(E − p_j)² = x²
};

// A band whose coupled levels are exactly nΔ, n = −N..N, all with the same
// |β|². Its share of the secular sum has the closed form
//   (r/Δ)[π cot(πz) + ψ(N+1+z) − ψ(N+1−z)],  z = E/Δ,
// which costs O(1) instead of O(N) per evaluation.
struct LatticeBand {
    double delta{1.0};
    int n_half{0};
    double residue{0.0};
    std::vector<double> energies;  // fallback outside |z| <= N + 1/2
};

// Evaluates the secular function at E = poles[b] + offset. Lattice bands use
// the closed form, every other level is summed directly.
class SecularEvaluator {
public:
    static constexpr std::size_t lattice_min_levels = 64;

    SecularEvaluator(std::span<const double> poles, const ArrowheadSystem& sys, double detuning)
        : poles_(poles), detuning_(detuning) {
        std::vector<std::vector<std::size_t>> members(sys.band_count);
        for (std::size_t j = 0; j < sys.size(); ++j) members[sys.band_of[j]].push_back(j);
        for (const auto& idx : members) {
            LatticeBand lb;
            if (detect_lattice(sys, idx, lb)) {
                lattice_.push_back(std::move(lb));
            } else {
                for (std::size_t j : idx) {
                    direct_poles_.push_back(sys.energies[j]);
                    direct_res_.push_back(std::norm(sys.couplings[j]));
                }
            }
        }
    }

    [[nodiscard]] std::span<const double> poles() const { return poles_; }
    [[nodiscard]] std::size_t lattice_bands() const { return lattice_.size(); }

    [[nodiscard]] SecularValue operator()(std::size_t b, double offset) const {
        const double pb = poles_[b];
        double s = 0.0;
        double ds = 0.0;
        direct_sum(direct_poles_, direct_res_.data(), 0.0, pb, offset, s, ds);
        for (const auto& lb : lattice_) {
            const double n0 = std::nearbyint(pb / lb.delta);
            const double frac = ((pb - n0 * lb.delta) + offset) / lb.delta;
            const double z = n0 + frac;
            if (std::abs(z) > lb.n_half + 0.5) {
                direct_sum(lb.energies, nullptr, lb.residue, pb, offset, s, ds);
                continue;
            }
            const double n1 = lb.n_half + 1.0;
            const double sn = numeric::sin_pi(frac);
            const double scale = lb.residue / lb.delta;
            s += scale * (numeric::pi * numeric::cot_pi(frac) + boost::math::digamma(n1 + z) -
                          boost::math::digamma(n1 - z));
            ds += scale / lb.delta *
                  (numeric::pi * numeric::pi / (sn * sn) - boost::math::trigamma(n1 + z) -
                   boost::math::trigamma(n1 - z));
        }
        return {pb + offset - detuning_ - s, 1.0 + ds};
    }

private:
    static void direct_sum(const std::vector<double>& p, const double* r, double r_const, double pb, double offset,
                           double& s, double& ds) {
        const std::size_t n = p.size();
        const double* pp = p.data();
        double a = 0.0;
        double da = 0.0;
        if (r != nullptr) {
#pragma omp simd reduction(+ : a, da)
            for (std::size_t j = 0; j < n; ++j) {
                const double d = (pb - pp[j]) + offset;
                const double q = r[j] / d;
                a += q;
                da += q / d;
            }
        } else {
#pragma omp simd reduction(+ : a, da)
            for (std::size_t j = 0; j < n; ++j) {
                const double inv = 1.0 / ((pb - pp[j]) + offset);
                a += inv;
                da += inv * inv;
            }
            a *= r_const;
            da *= r_const;
        }
        s += a;
        ds += da;
    }

    static bool detect_lattice(const ArrowheadSystem& sys, const std::vector<std::size_t>& idx, LatticeBand& lb) {
        if (idx.size() < lattice_min_levels || idx.size() % 2 == 0) return false;
        std::vector<double> e;
        e.reserve(idx.size());
        const double r0 = std::norm(sys.couplings[idx.front()]);
        for (std::size_t j : idx) {
            if (std::norm(sys.couplings[j]) != r0) return false;
            e.push_back(sys.energies[j]);
        }
        std::sort(e.begin(), e.end());
        const int n_half = static_cast<int>(e.size() / 2);
        // Levels are built as n·Δ, so e[N+1] is Δ exactly and n·Δ reproduces
        // every level bit for bit.
        const double delta = e[static_cast<std::size_t>(n_half) + 1];
        if (e[static_cast<std::size_t>(n_half)] != 0.0 || !(delta > 0.0)) return false;
        for (std::size_t i = 0; i < e.size(); ++i) {
            const double expected = (static_cast<double>(i) - n_half) * delta;
            if (e[i] != expected) return false;
        }
        lb.delta = delta;
        lb.n_half = n_half;
        lb.residue = r0;
        lb.energies = std::move(e);
        return true;
    }

    std::span<const double> poles_;
    double detuning_;
    std::vector<double> direct_poles_;
    std::vector<double> direct_res_;
    std::vector<LatticeBand> lattice_;
};

struct RootResult {
    double offset;
    double weight;
};

[[noreturn]] inline void bracket_failure(double lo, double hi, const std::string& why) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "solve_eigenvalues: " << why << " in interval (" << lo << ", " << hi << ")";
    throw NumericalFailure(msg.str());
}

// Safeguarded Newton on the increasing secular function inside (lo, hi),
// offsets measured from pole b.
inline RootResult newton_in_bracket(const SecularEvaluator& ev, std::size_t b, double lo, double hi, double x,
                                    double tol) {
    const auto poles = ev.poles();
    const double lo0 = lo;
    const double hi0 = hi;
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const auto v = ev(b, x);
        if (!std::isfinite(v.f) || !std::isfinite(v.df)) {
            bracket_failure(poles[b] + lo0, poles[b] + hi0, "non-finite secular function");
        }
        if (v.f == 0.0) return {x, 1.0 / v.df};
        if (v.f < 0.0) lo = x; else hi = x;
        double next = x - v.f / v.df;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= tol || hi - lo <= tol ||
            std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) {
            const auto fin = ev(b, next);
            return {next, 1.0 / fin.df};
        }
        x = next;
    }
    const auto f_lo = ev(b, lo0 + (hi0 - lo0) * 1e-12).f;
    const auto f_hi = ev(b, hi0 - (hi0 - lo0) * 1e-12).f;
    if (!(f_lo < 0.0 && f_hi > 0.0)) {
        bracket_failure(poles[b] + lo0, poles[b] + hi0, "secular function does not change sign");
    }
    bracket_failure(poles[b] + lo0, poles[b] + hi0, "root iteration did not converge");
}

// Root between poles b and b+1.
inline RootResult solve_interior(const SecularEvaluator& ev, std::span<const double> residues, std::size_t b) {
    const auto poles = ev.poles();
    const double w = poles[b + 1] - poles[b];
    const double ra = residues[b];
    const double rb = residues[b + 1];
    // Two-pole model with the remaining terms frozen at the midpoint:
    //   C − ra/δ + rb/(w − δ) = 0.
    const double mid = 0.5 * w;
    const auto v = ev(b, mid);
    const double c = v.f - ra / mid + rb / mid;
    double guess = mid;
    if (c == 0.0) {
        guess = ra * w / (ra + rb);
    } else {
        const double bq = c * w + ra + rb;
        const double disc = std::sqrt(std::max(0.0, bq * bq - 4.0 * c * ra * w));
        const double q = 0.5 * (bq + std::copysign(disc, bq));
        const double r1 = q / c;
        const double r2 = (q != 0.0) ? ra * w / q : mid;
        guess = (r1 > 0.0 && r1 < w) ? r1 : r2;
    }
    double lo = 0.0;
    double hi = w;
    if (v.f < 0.0) lo = mid; else hi = mid;
    return newton_in_bracket(ev, b, lo, hi, guess, 1e-13 * w);
}

// Root below the lowest pole (upper = false) or above the highest.
inline RootResult solve_edge(const SecularEvaluator& ev, bool upper, double step) {
    const auto poles = ev.poles();
    const std::size_t b = upper ? poles.size() - 1 : 0;
    const double sign = upper ? 1.0 : -1.0;
    double h = step;
    for (int i = 0; i < 2000; ++i) {
        const double f = ev(b, sign * h).f;
        if (!std::isfinite(f)) break;
        if (upper ? f > 0.0 : f < 0.0) {
            const double lo = upper ? 0.0 : -h;
            const double hi = upper ? h : 0.0;
            return newton_in_bracket(ev, b, lo, hi, 0.5 * (lo + hi), 1e-13 * step);
        }
        h *= 2.0;
    }
    bracket_failure(upper ? poles[b] : poles[b] - h, upper ? poles[b] + h : poles[b],
                    "edge bracket did not find a sign change");
}

} // namespace detail

inline EigenSystem solve_eigenvalues(const ArrowheadSystem& sys, const SolveOptions& opts = {}) {
    EigenSystem eig;
    eig.system = sys;
    eig.weight_floor = opts.weight_floor;

    // Distinct poles with merged residues.
    std::vector<std::size_t> order(sys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sys.energies[i] < sys.energies[j]; });
    eig.level_pole.assign(sys.size(), 0);
    const double merge = opts.merge_tolerance * sys.min_delta;
    for (std::size_t idx : order) {
        const double e = sys.energies[idx];
        const double r = std::norm(sys.couplings[idx]);
        if (!eig.poles.empty() && e - eig.poles.back() <= merge) {
            eig.residues.back() += r;
        } else {
            eig.poles.push_back(e);
            eig.residues.push_back(r);
        }
        eig.level_pole[idx] = eig.poles.size() - 1;
    }

    if (eig.poles.empty()) {
        // Nothing couples: the embedded state is itself an eigenstate.
        eig.poles.push_back(sys.detuning);
        eig.residues.push_back(0.0);
        eig.eigenvalues = {sys.detuning};
        eig.weights = {1.0};
        eig.delta_shifts = {0.0};
        eig.base = {0};
        return eig;
    }

    const std::size_t k = eig.poles.size();
    const std::size_t roots = k + 1;
    eig.eigenvalues.resize(roots);
    eig.weights.resize(roots);
    eig.delta_shifts.resize(roots);
    eig.base.resize(roots);

    double total_residue = 0.0;
    for (double r : eig.residues) total_residue += r;
    const double edge_step = std::max(sys.min_delta, std::sqrt(total_residue));

    std::exception_ptr failure;
    const std::span<const double> poles(eig.poles);
    const std::span<const double> residues(eig.residues);
    const detail::SecularEvaluator evaluator(poles, sys, sys.detuning);
#pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t mi = 0; mi < static_cast<std::ptrdiff_t>(roots); ++mi) {
        const auto m = static_cast<std::size_t>(mi);
        try {
            detail::RootResult res{};
            std::size_t b = 0;
            if (m == 0) {
                res = detail::solve_edge(evaluator, false, edge_step);
                b = 0;
            } else if (m == roots - 1) {
                res = detail::solve_edge(evaluator, true, edge_step);
                b = k - 1;
            } else {
                b = m - 1;
                res = detail::solve_interior(evaluator, residues, b);
            }
            eig.base[m] = b;
            eig.delta_shifts[m] = res.offset;
            eig.eigenvalues[m] = eig.poles[b] + res.offset;
            eig.weights[m] = res.weight;
        } catch (...) {
#pragma omp critical(rcdecay_solve_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (double w : eig.weights) {
        if (w < eig.weight_floor) eig.dropped_weight += w;
    }
    return eig;
}

inline EigenSystem solve_eigenvalues(const ModelSpec& model, const SolveOptions& opts = {}) {
    return solve_eigenvalues(assemble(model), opts);
}

// Overlap weight 1/x² of an eigenvalue E. `direct` sums the truncated model;
// `closed_form` applies to a single constant-coupling band and uses
// x² = [β² + (πβ²/Δ)² + (E − ω)²]/β². Throws InvalidArgument if E does not
// solve the corresponding secular equation.
inline double eigen_weights(double energy, const ModelSpec& model, WeightRoute route) {
    model.validate();
    if (route == WeightRoute::direct) {
        const auto sys = assemble(model);
        double s = 0.0;
        double ds = 0.0;
        for (std::size_t j = 0; j < sys.size(); ++j) {
            const double d = energy - sys.energies[j];
            const double q = std::norm(sys.couplings[j]) / d;
            s += q;
            ds += q / d;
        }
        const double f = energy - sys.detuning - s;
        const double df = 1.0 + ds;
        if (!(std::abs(f) / df <= 1e-8 * sys.min_delta)) {
            throw InvalidArgument("eigen_weights: energy is not an eigenvalue of the model");
        }
        return 1.0 / df;
    }
    if (model.bands.size() != 1 || !std::holds_alternative<ConstantCoupling>(model.bands.front().profile)) {
        throw UnsupportedProfile("eigen_weights: closed form needs a single constant-coupling band");
    }
    const double beta = std::get<ConstantCoupling>(model.bands.front().profile).beta;
    const double delta = model.bands.front().delta;
    const double shifted = energy - model.detuning;
    if (beta == 0.0) {
        if (shifted != 0.0) throw InvalidArgument("eigen_weights: energy is not an eigenvalue of the model");
        return 1.0;
    }
    const double z = energy / delta;
    const double f = shifted - numeric::pi * beta * beta / delta * numeric::cot_pi(z);
    const double csc = numeric::pi * beta / (delta * numeric::sin_pi(z));
    const double df = 1.0 + csc * csc;
    if (!(std::abs(f) / df <= 1e-8 * delta)) {
        throw InvalidArgument("eigen_weights: energy is not an eigenvalue of the model");
    }
    const double g = numeric::pi * beta * beta / delta;
    return beta * beta / (beta * beta + g * g + shifted * shifted);
}

// ---------------------------------- dynamics ---------------------------------

// a(t) = Σ_m w_m e^{−iE_m t}, skipping roots below the weight floor.
inline TimeSeries survival_amplitude(const EigenSystem& eig, std::span<const double> times) {
    std::vector<double> energies;
    std::vector<double> weights;
    for (std::size_t m = 0; m < eig.size(); ++m) {
        if (eig.weights[m] >= eig.weight_floor) {
            energies.push_back(eig.eigenvalues[m]);
            weights.push_back(eig.weights[m]);
        }
    }
    for (double t : times) {
        if (t < 0.0) throw InvalidArgument("survival_amplitude: times must be >= 0");
    }
    TimeSeries ts;
    ts.source = "eigen";
    ts.times.assign(times.begin(), times.end());
    ts.amplitude.resize(times.size());
    const std::size_t n = energies.size();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(times.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double t = times[i];
        double re = 0.0;
        double im = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double ph = energies[m] * t;
            re += weights[m] * std::cos(ph);
            im -= weights[m] * std::sin(ph);
        }
        ts.amplitude[i] = {re, im};
    }
    return ts;
}

// b_j(t) = β_j* Σ_m w_m e^{−iE_m t}/(E_m − ε_j) for every coupled level of the
// system, in system order.
inline std::vector<std::complex<double>> band_amplitudes(const EigenSystem& eig, double t) {
    const auto& sys = eig.system;
    std::vector<std::complex<double>> out(sys.size());
    std::vector<std::size_t> kept;
    std::vector<std::complex<double>> phases;
    for (std::size_t m = 0; m < eig.size(); ++m) {
        if (eig.weights[m] >= eig.weight_floor) {
            kept.push_back(m);
            phases.push_back(eig.weights[m] * std::polar(1.0, -eig.eigenvalues[m] * t));
        }
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < static_cast<std::ptrdiff_t>(sys.size()); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t k = 0; k < kept.size(); ++k) acc += phases[k] / eig.gap(kept[k], j);
        out[j] = std::conj(sys.couplings[j]) * acc;
    }
    return out;
}

// P_i(t) = Σ_{j in band i} |b_j(t)|², evaluated as blocked dense products
// (levels × roots) · (roots × times).
inline std::vector<std::vector<double>> band_populations(const EigenSystem& eig,
                                                         std::span<const double> times) {
    const auto& sys = eig.system;
    std::vector<std::vector<double>> pops(sys.band_count, std::vector<double>(times.size(), 0.0));
    if (sys.size() == 0) return pops;

    std::vector<std::size_t> kept;
    for (std::size_t m = 0; m < eig.size(); ++m) {
        if (eig.weights[m] >= eig.weight_floor) kept.push_back(m);
    }
    const auto nk = static_cast<Eigen::Index>(kept.size());
    // gap(m, j) = (root_pole[k] − level_pole[j]) + root_shift[k], laid out for a contiguous inner loop
    std::vector<double> root_pole(kept.size()), root_shift(kept.size()), lvl(sys.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        root_pole[k] = eig.poles[eig.base[kept[k]]];
        root_shift[k] = eig.delta_shifts[kept[k]];
    }
    for (std::size_t j = 0; j < sys.size(); ++j) lvl[j] = eig.poles[eig.level_pole[j]];

    if (times.size() <= 16) {
        // Few times: one row of 1/gap per level, reused for every time by dot
        // products. Avoids materializing level blocks that would only feed
        // a handful of columns.
        Eigen::MatrixXd cre(nk, static_cast<Eigen::Index>(times.size()));
        Eigen::MatrixXd cim(nk, static_cast<Eigen::Index>(times.size()));
        for (Eigen::Index k = 0; k < nk; ++k) {
            const std::size_t m = kept[static_cast<std::size_t>(k)];
            for (std::size_t c = 0; c < times.size(); ++c) {
                const double ph = eig.eigenvalues[m] * times[c];
                cre(k, static_cast<Eigen::Index>(c)) = eig.weights[m] * std::cos(ph);
                cim(k, static_cast<Eigen::Index>(c)) = -eig.weights[m] * std::sin(ph);
            }
        }
        const Eigen::Map<const Eigen::VectorXd> rp(root_pole.data(), nk);
        const Eigen::Map<const Eigen::VectorXd> rs(root_shift.data(), nk);
        Eigen::VectorXd row(nk);
        for (std::size_t j = 0; j < sys.size(); ++j) {
            row = ((rp.array() - lvl[j]) + rs.array()).inverse().matrix();
            const double c2 = std::norm(sys.couplings[j]);
            auto& pop = pops[sys.band_of[j]];
            for (std::size_t c = 0; c < times.size(); ++c) {
                const auto ci = static_cast<Eigen::Index>(c);
                const double re = row.dot(cre.col(ci));
                const double im = row.dot(cim.col(ci));
                pop[c] += c2 * (re * re + im * im);
            }
        }
        return pops;
    }

    constexpr std::size_t time_block = 256;
    constexpr std::size_t level_block = 256;

    for (std::size_t t0 = 0; t0 < times.size(); t0 += time_block) {
        const std::size_t nt = std::min(time_block, times.size() - t0);
        Eigen::MatrixXd cre(nk, static_cast<Eigen::Index>(nt));
        Eigen::MatrixXd cim(nk, static_cast<Eigen::Index>(nt));
        for (Eigen::Index k = 0; k < nk; ++k) {
            const std::size_t m = kept[static_cast<std::size_t>(k)];
            for (std::size_t c = 0; c < nt; ++c) {
                const double ph = eig.eigenvalues[m] * times[t0 + c];
                cre(k, static_cast<Eigen::Index>(c)) = eig.weights[m] * std::cos(ph);
                cim(k, static_cast<Eigen::Index>(c)) = -eig.weights[m] * std::sin(ph);
            }
        }
        for (std::size_t l0 = 0; l0 < sys.size(); l0 += level_block) {
            const std::size_t nl = std::min(level_block, sys.size() - l0);
            Eigen::MatrixXd kernel(static_cast<Eigen::Index>(nl), nk);
            for (Eigen::Index k = 0; k < nk; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                double* col = kernel.col(k).data();
                for (std::size_t r = 0; r < nl; ++r) col[r] = 1.0 / ((root_pole[ku] - lvl[l0 + r]) + root_shift[ku]);
            }
            const Eigen::MatrixXd bre = kernel * cre;
            const Eigen::MatrixXd bim = kernel * cim;
            for (std::size_t r = 0; r < nl; ++r) {
                const std::size_t j = l0 + r;
                const double c2 = std::norm(sys.couplings[j]);
                auto& pop = pops[sys.band_of[j]];
                for (std::size_t c = 0; c < nt; ++c) {
                    const auto ri = static_cast<Eigen::Index>(r);
                    const auto ci = static_cast<Eigen::Index>(c);
                    pop[t0 + c] += c2 * (bre(ri, ci) * bre(ri, ci) + bim(ri, ci) * bim(ri, ci));
                }
            }
        }
    }
    return pops;
}

// Amplitude plus (optionally) band populations on the given grid.
inline TimeSeries eigen_time_series(const EigenSystem& eig, std::span<const double> times,
                                    bool with_populations = true) {
    auto ts = survival_amplitude(eig, times);
    if (with_populations) {
        ts.populations = band_populations(eig, times);
        ts.update_norm_drift();
    }
    return ts;
}

} // namespace rcdecay
