// model.hpp — band specifications, discretization, derived rates and the
// structural transformations (k-densification, harmonic → parallel bands).
//
// All energies and times are in atomic units. A band with spacing Δ and
// half-width N holds the levels ε_n = nΔ for n = -N..N; the embedded state
// sits at the detuning ω_ab and couples to level n with strength β_n.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rcdecay/errors.hpp"
#include "rcdecay/numeric.hpp"

namespace rcdecay {

// --------------------------------- profiles ---------------------------------

struct ConstantCoupling {
    double beta{0.0};
};

// β_n = β cos(nΔT/2)
struct HarmonicCoupling {
    double beta{0.0};
    double period{1.0};
};

// One value per level, ordered n = -N..N.
struct ExplicitCoupling {
    std::vector<double> values;
};

using CouplingProfile = std::variant<ConstantCoupling, HarmonicCoupling, ExplicitCoupling>;

// Couplings below this fraction of the profile scale are treated as exact zeros.
inline constexpr double coupling_zero_threshold = 1e-12;

struct BandSpec {
    double delta{1.0};
    CouplingProfile profile{ConstantCoupling{}};
    int n_half{1};

    [[nodiscard]] std::size_t level_count() const { return 2 * static_cast<std::size_t>(n_half) + 1; }

    void validate() const {
        if (!(delta > 0.0) || !std::isfinite(delta)) {
            throw InvalidSpec("band spacing delta must be positive and finite");
        }
        if (n_half < 1) {
            throw InvalidSpec("band half-width n_half must be >= 1");
        }
        if (const auto* c = std::get_if<ConstantCoupling>(&profile)) {
            if (!(c->beta >= 0.0) || !std::isfinite(c->beta)) {
                throw InvalidSpec("constant coupling beta must be finite and >= 0");
            }
        } else if (const auto* h = std::get_if<HarmonicCoupling>(&profile)) {
            if (!(h->beta >= 0.0) || !std::isfinite(h->beta)) {
                throw InvalidSpec("harmonic coupling beta must be finite and >= 0");
            }
            if (!(h->period > 0.0) || !std::isfinite(h->period)) {
                throw InvalidSpec("harmonic modulation period T must be positive");
            }
        } else {
            const auto& e = std::get<ExplicitCoupling>(profile);
            if (e.values.size() != level_count()) {
                throw InvalidSpec("explicit coupling list has " + std::to_string(e.values.size()) +
                                  " entries, expected 2*n_half+1 = " + std::to_string(level_count()));
            }
            for (double v : e.values) {
                if (!std::isfinite(v)) throw InvalidSpec("explicit coupling values must be finite");
            }
        }
    }
};

struct DiscretizedBand {
    double delta{1.0};
    int n_half{0};
    std::vector<double> energies;
    std::vector<double> couplings;

    [[nodiscard]] std::size_t size() const { return energies.size(); }

    // True when every level carries the same coupling.
    [[nodiscard]] bool constant_coupling() const {
        if (couplings.empty()) return true;
        const double c0 = couplings.front();
        return std::all_of(couplings.begin(), couplings.end(),
                           [c0](double c) { return c == c0; });
    }

    void validate() const {
        if (energies.size() != couplings.size()) {
            throw InvalidSpec("discretized band: energies and couplings differ in length");
        }
        if (energies.size() != 2 * static_cast<std::size_t>(n_half) + 1) {
            throw InvalidSpec("discretized band: level count does not match n_half");
        }
        const double scale = std::max(1.0, static_cast<double>(n_half));
        for (std::size_t i = 0; i < energies.size(); ++i) {
            const double expected = (static_cast<double>(i) - n_half) * delta;
            if (std::abs(energies[i] - expected) > 1e-12 * scale * delta) {
                throw InvalidSpec("discretized band: energies are not uniformly spaced");
            }
            const std::size_t mirror = energies.size() - 1 - i;
            if (energies[i] != -energies[mirror]) {
                throw InvalidSpec("discretized band: energies are not symmetric about 0");
            }
        }
    }
};

struct ModelSpec {
    double detuning{0.0};
    std::vector<BandSpec> bands;
    std::string label;

    void validate() const {
        if (!std::isfinite(detuning)) throw InvalidSpec("detuning must be finite");
        if (bands.empty()) throw InvalidSpec("model needs at least one band");
        for (const auto& b : bands) b.validate();
    }
};

struct DerivedParams {
    std::vector<double> gamma;      // γ_i = 2π⟨|β_i|²⟩/Δ_i
    std::vector<double> tau;        // τ_i = 2π/Δ_i
    std::vector<double> ell;        // ℓ_i = π/Δ_i
    std::vector<double> tau_pairs;  // τ_i + τ_j for i < j, row-major
    double gamma_total{0.0};
};

// ------------------------------- discretization ------------------------------

// Modulation order M = 2π/(ΔT) of a harmonic band when it is an integer.
inline std::optional<int> harmonic_order(double delta, double period) {
    const double m = numeric::two_pi / (delta * period);
    const double r = std::nearbyint(m);
    if (r >= 1.0 && std::abs(m - r) <= 1e-9 * r) return static_cast<int>(r);
    return std::nullopt;
}

inline DiscretizedBand build_band(const BandSpec& spec) {
    spec.validate();
    DiscretizedBand band;
    band.delta = spec.delta;
    band.n_half = spec.n_half;
    const std::size_t count = spec.level_count();
    band.energies.resize(count);
    band.couplings.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int n = static_cast<int>(i) - spec.n_half;
        band.energies[i] = n * spec.delta;
    }
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantCoupling>) {
                std::fill(band.couplings.begin(), band.couplings.end(), p.beta);
            } else if constexpr (std::is_same_v<P, HarmonicCoupling>) {
                // cos(nΔT/2) = cos(π·x) with x = nΔT/(2π)
                const double x_step = spec.delta * p.period / numeric::two_pi;
                for (std::size_t i = 0; i < count; ++i) {
                    const int n = static_cast<int>(i) - spec.n_half;
                    double c = numeric::cos_pi(n * x_step);
                    if (std::abs(c) < coupling_zero_threshold) c = 0.0;
                    band.couplings[i] = p.beta * c;
                }
            } else {
                band.couplings = p.values;
            }
        },
        spec.profile);
    return band;
}

// Mean of |β_n|² over the smallest period of the coupling pattern (or over the
// whole band if the pattern is not periodic). For constant and harmonic
// profiles this is the exact infinite-band density of coupling strength.
inline double mean_coupling_square(const DiscretizedBand& band) {
    const std::size_t count = band.couplings.size();
    if (count == 0) return 0.0;
    std::vector<double> sq(count);
    double peak = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        sq[i] = band.couplings[i] * band.couplings[i];
        peak = std::max(peak, sq[i]);
    }
    if (peak == 0.0) return 0.0;
    const double tol = 1e-12 * peak;
    for (std::size_t p = 1; 2 * p <= count; ++p) {
        bool periodic = true;
        for (std::size_t i = 0; i + p < count && periodic; ++i) {
            periodic = std::abs(sq[i] - sq[i + p]) <= tol;
        }
        if (periodic) {
            double s = 0.0;
            for (std::size_t i = 0; i < p; ++i) s += sq[i];
            return s / static_cast<double>(p);
        }
    }
    double s = 0.0;
    for (double v : sq) s += v;
    return s / static_cast<double>(count);
}

// Rate 2π⟨|β|²⟩/Δ of any band profile; used for truncation defaults.
inline double effective_rate(const BandSpec& spec) {
    if (const auto* c = std::get_if<ConstantCoupling>(&spec.profile)) {
        return numeric::two_pi * c->beta * c->beta / spec.delta;
    }
    if (const auto* h = std::get_if<HarmonicCoupling>(&spec.profile)) {
        // Average cos² over one modulation period; 1/2 unless the pattern
        // has period 1 or 2 in n.
        double mean = 0.5;
        if (auto m = harmonic_order(spec.delta, h->period)) {
            double s = 0.0;
            for (int n = 0; n < *m; ++n) {
                const double c = numeric::cos_pi(static_cast<double>(n) / *m);
                s += std::abs(c) < coupling_zero_threshold ? 0.0 : c * c;
            }
            mean = s / *m;
        }
        return numeric::two_pi * h->beta * h->beta * mean / spec.delta;
    }
    return numeric::two_pi * mean_coupling_square(build_band(spec)) / spec.delta;
}

// Half-width giving NΔ >= max(40·γ_total, 100·Δ).
inline int default_n_half(double delta, double gamma_total) {
    const double half_width = std::max(40.0 * gamma_total, 100.0 * delta);
    return std::max(1, static_cast<int>(std::ceil(half_width / delta - 1e-9)));
}

inline DerivedParams derived_params(const ModelSpec& model) {
    model.validate();
    DerivedParams d;
    for (const auto& band : model.bands) {
        double g = 0.0;
        if (const auto* c = std::get_if<ConstantCoupling>(&band.profile)) {
            g = numeric::two_pi * c->beta * c->beta / band.delta;
        } else if (std::holds_alternative<HarmonicCoupling>(band.profile)) {
            throw UnsupportedProfile(
                "derived_params: harmonic band; map it with harmonic_as_parallel_bands first");
        } else {
            g = numeric::two_pi * mean_coupling_square(build_band(band)) / band.delta;
        }
        d.gamma.push_back(g);
        d.tau.push_back(numeric::two_pi / band.delta);
        d.ell.push_back(numeric::pi / band.delta);
        d.gamma_total += g;
    }
    for (std::size_t i = 0; i < d.tau.size(); ++i) {
        for (std::size_t j = i + 1; j < d.tau.size(); ++j) d.tau_pairs.push_back(d.tau[i] + d.tau[j]);
    }
    return d;
}

// ------------------------------- transformations -----------------------------

// Replace (β, Δ) by (β/√k, Δ/k) over the same energy range.
inline DiscretizedBand refine_band(const DiscretizedBand& band, int k) {
    if (k < 1) throw InvalidArgument("refine_band: k must be >= 1");
    if (!band.constant_coupling()) {
        throw UnsupportedProfile("refine_band: band does not have constant coupling");
    }
    if (k == 1) return band;
    const double beta = band.couplings.empty() ? 0.0 : band.couplings.front();
    DiscretizedBand out;
    out.delta = band.delta / k;
    out.n_half = band.n_half * k;
    const std::size_t count = 2 * static_cast<std::size_t>(out.n_half) + 1;
    out.energies.resize(count);
    out.couplings.assign(count, beta / std::sqrt(static_cast<double>(k)));
    for (std::size_t i = 0; i < count; ++i) {
        const int n = static_cast<int>(i) - out.n_half;
        out.energies[i] = n * out.delta;
    }
    return out;
}

inline BandSpec refine_band(const BandSpec& spec, int k) {
    spec.validate();
    if (k < 1) throw InvalidArgument("refine_band: k must be >= 1");
    const auto* c = std::get_if<ConstantCoupling>(&spec.profile);
    if (c == nullptr) throw UnsupportedProfile("refine_band: band does not have constant coupling");
    return BandSpec{spec.delta / k, ConstantCoupling{c->beta / std::sqrt(static_cast<double>(k))},
                    spec.n_half * k};
}

// The harmonic band β cos(nΔT/2), Δ = 2π/(M·T), rewritten as constant-coupling
// bands whose secular sums reproduce the harmonic one term by term:
//   M = 2: (β, 2Δ)
//   M = 3: (β, 3Δ) and β/2 on the levels n ≢ 0 (mod 3) of the Δ lattice
//   M = 4: (β, 4Δ) and β/√2 on the odd levels of the Δ lattice
// n_half is the half-width of the harmonic lattice being replaced.
inline ModelSpec harmonic_as_parallel_bands(double beta, double period, int order, int n_half) {
    if (order < 2 || order > 4) {
        throw UnsupportedProfile("harmonic_as_parallel_bands: only M in {2,3,4} has a closed-form mapping");
    }
    if (!(beta >= 0.0) || !(period > 0.0) || n_half < order) {
        throw InvalidSpec("harmonic_as_parallel_bands: need beta >= 0, T > 0, n_half >= M");
    }
    const double delta = numeric::two_pi / (order * period);
    ModelSpec model;
    model.label = "harmonic M=" + std::to_string(order) + " as parallel bands";
    model.bands.push_back(BandSpec{order * delta, ConstantCoupling{beta}, n_half / order});
    if (order == 2) return model;

    ExplicitCoupling sub;
    sub.values.resize(2 * static_cast<std::size_t>(n_half) + 1);
    for (std::size_t i = 0; i < sub.values.size(); ++i) {
        const int n = static_cast<int>(i) - n_half;
        const int r = ((n % order) + order) % order;
        if (order == 3) {
            sub.values[i] = r == 0 ? 0.0 : beta / 2.0;
        } else {
            sub.values[i] = (r % 2 == 1) ? beta / std::sqrt(2.0) : 0.0;
        }
    }
    model.bands.push_back(BandSpec{delta, std::move(sub), n_half});
    return model;
}

// ------------------------------ arrowhead system -----------------------------

// Flattened Hamiltonian: embedded state at `detuning`, coupled to every level
// with a nonzero coupling. Zero-coupling levels never leave their initial
// (empty) state and are omitted.
struct ArrowheadSystem {
    double detuning{0.0};
    std::vector<double> energies;
    std::vector<std::complex<double>> couplings;
    std::vector<std::size_t> band_of;
    std::size_t band_count{0};
    double min_delta{1.0};

    [[nodiscard]] std::size_t size() const { return energies.size(); }

    [[nodiscard]] double max_abs_energy() const {
        double m = std::abs(detuning);
        for (double e : energies) m = std::max(m, std::abs(e));
        return m;
    }
};

inline ArrowheadSystem assemble(double detuning, std::span<const DiscretizedBand> bands) {
    if (bands.empty()) throw InvalidSpec("model needs at least one band");
    ArrowheadSystem sys;
    sys.detuning = detuning;
    sys.band_count = bands.size();
    sys.min_delta = bands.front().delta;
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const auto& band = bands[b];
        sys.min_delta = std::min(sys.min_delta, band.delta);
        double scale = 0.0;
        for (double c : band.couplings) scale = std::max(scale, std::abs(c));
        for (std::size_t i = 0; i < band.size(); ++i) {
            if (band.couplings[i] == 0.0 || std::abs(band.couplings[i]) < coupling_zero_threshold * scale) continue;
            sys.energies.push_back(band.energies[i]);
            sys.couplings.emplace_back(band.couplings[i], 0.0);
            sys.band_of.push_back(b);
        }
    }
    return sys;
}

inline ArrowheadSystem assemble(const ModelSpec& model) {
    model.validate();
    std::vector<DiscretizedBand> bands;
    bands.reserve(model.bands.size());
    for (const auto& b : model.bands) bands.push_back(build_band(b));
    return assemble(model.detuning, bands);
}

// Multiply every coupling by e^{iφ}.
inline ArrowheadSystem with_coupling_phase(ArrowheadSystem sys, double phi) {
    const auto phase = std::polar(1.0, phi);
    for (auto& c : sys.couplings) c *= phase;
    return sys;
}

} // namespace rcdecay
