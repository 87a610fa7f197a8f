#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rcdecay/eigensolver.hpp"

using namespace rcdecay;

namespace {

ModelSpec single_band(double beta, double delta, int n_half, double detuning = 0.0) {
    ModelSpec m;
    m.detuning = detuning;
    m.bands.push_back(BandSpec{delta, ConstantCoupling{beta}, n_half});
    return m;
}

oracle::DenseModel dense_of(const ArrowheadSystem& sys) {
    std::vector<double> c;
    for (const auto& z : sys.couplings) c.push_back(z.real());
    return oracle::DenseModel(sys.detuning, sys.energies, c);
}

// Random energy at least 5% of a spacing away from every lattice point.
double off_lattice(std::mt19937_64& rng, double delta, double span) {
    std::uniform_real_distribution<double> cell(-span, span);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    return (std::floor(cell(rng)) + frac(rng)) * delta;
}

} // namespace

TEST(SecularClosedForm, ConstantBandMatchesOracle) {
    std::mt19937_64 rng(1);
    for (double delta : {0.2048, 1.0, 0.0613}) {
        const auto m = single_band(0.31, delta, 10);
        for (int i = 0; i < 100; ++i) {
            const double e = off_lattice(rng, delta, 30.0);
            const double got = secular_rhs(e, m, SecularMode::closed_form);
            const double want = oracle::constant_band_sum(e, 0.31, delta);
            EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want))) << "delta " << delta << " E " << e;
        }
    }
}

class SecularHarmonic : public ::testing::TestWithParam<int> {};

TEST_P(SecularHarmonic, ClosedFormMatchesOracle) {
    const int order = GetParam();
    const double period = 1.7;
    const double beta = 0.45;
    const double delta = 2.0 * std::numbers::pi / (order * period);
    ModelSpec m;
    m.bands.push_back(BandSpec{delta, HarmonicCoupling{beta, period}, 8});
    std::mt19937_64 rng(100 + order);
    for (int i = 0; i < 100; ++i) {
        const double e = off_lattice(rng, delta, 25.0);
        const double got = secular_rhs(e, m, SecularMode::closed_form);
        const double want = oracle::harmonic_band_sum(e, beta, delta, order);
        EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want))) << "M " << order << " E " << e;
    }
}

INSTANTIATE_TEST_SUITE_P(Orders, SecularHarmonic, ::testing::Values(1, 2, 3, 4));

TEST(SecularClosedForm, UncoupledHarmonicLevelIsNotAPole) {
    // M = 4: levels n ≡ 2 (mod 4) carry no coupling.
    const double period = 1.0;
    const double delta = std::numbers::pi / 2.0;
    ModelSpec m;
    m.bands.push_back(BandSpec{delta, HarmonicCoupling{0.5, period}, 8});
    const double e = 2.0 * delta;
    const double got = secular_rhs(e, m, SecularMode::closed_form);
    EXPECT_NEAR(got, oracle::harmonic_band_sum(e, 0.5, delta, 4), 1e-9);
    EXPECT_THROW((void)secular_rhs(delta, m, SecularMode::closed_form), PoleProximity);
}

TEST(SecularClosedForm, RejectsUnsupportedProfiles) {
    ModelSpec m;
    m.bands.push_back(BandSpec{2.0 * std::numbers::pi / 5.0, HarmonicCoupling{0.5, 1.0}, 8});
    EXPECT_THROW((void)secular_rhs(0.1, m, SecularMode::closed_form), UnsupportedProfile);
    ModelSpec x;
    x.bands.push_back(BandSpec{1.0, ExplicitCoupling{{0.1, 0.2, 0.1}}, 1});
    EXPECT_THROW((void)secular_rhs(0.5, x, SecularMode::closed_form), UnsupportedProfile);
    EXPECT_NO_THROW((void)secular_rhs(0.5, x, SecularMode::direct));
}

TEST(SecularDirect, ConvergesToClosedFormAsBandWidens) {
    const double e = 0.37;
    const double want = oracle::constant_band_sum(e, 0.2, 1.0);
    double prev = 1.0;
    for (int n : {100, 1000, 10000}) {
        const double err = std::abs(secular_rhs(e, single_band(0.2, 1.0, n), SecularMode::direct) - want);
        // Tail of Σ 2E/(E² − k²) beyond N is about 2E/N.
        EXPECT_LT(err, 0.04 * 2.0 * e / n);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(SecularDirect, PoleProximityGuard) {
    const auto m = single_band(0.2, 0.5, 4);
    EXPECT_THROW((void)secular_rhs(1.0, m, SecularMode::direct), PoleProximity);
    EXPECT_THROW((void)secular_rhs(1.0 + 1e-14, m, SecularMode::direct), PoleProximity);
    EXPECT_NO_THROW((void)secular_rhs(1.0 + 1e-9, m, SecularMode::direct));
}

// Dense diagonalization is the reference for the eigensystem. The first case
// is small enough for the direct secular sum; the others exercise the lattice
// closed form (>= 64 levels per band), detuning, and two interleaved bands.
class EigenVsDense : public ::testing::TestWithParam<int> {
protected:
    static ModelSpec make(int i) {
        switch (i) {
        case 0: return single_band(0.3, 0.25, 12, 0.05);
        case 1: return single_band(0.25, 0.2, 90, 0.0);
        case 2: {
            ModelSpec m = single_band(0.25, 0.1024, 60, 0.013);
            m.bands.push_back(BandSpec{0.0613, ConstantCoupling{0.2}, 100});
            return m;
        }
        default: {
            ModelSpec m;
            m.detuning = -0.2;
            m.bands.push_back(BandSpec{std::numbers::pi / 10.0, HarmonicCoupling{0.6, 5.0}, 40});  // M = 4
            m.bands.push_back(BandSpec{0.05, ConstantCoupling{0.04}, 150});
            return m;
        }
        }
    }
};

TEST_P(EigenVsDense, SpectrumWeightsAndDynamics) {
    const auto model = make(GetParam());
    const auto eig = solve_eigenvalues(model);
    const auto ref = dense_of(eig.system);

    // Levels shared by several bands give dense eigenvectors orthogonal to the
    // embedded state, pinned on the shared level. The solver merges those
    // poles and has no root for them; drop them from the reference.
    const std::size_t extra = eig.system.size() - eig.poles.size();
    std::vector<Eigen::Index> keep;
    std::vector<Eigen::Index> by_weight(static_cast<std::size_t>(ref.energies.size()));
    for (Eigen::Index i = 0; i < ref.energies.size(); ++i) by_weight[static_cast<std::size_t>(i)] = i;
    std::sort(by_weight.begin(), by_weight.end(), [&](auto a, auto b) {
        return std::abs(ref.vectors(0, a)) < std::abs(ref.vectors(0, b));
    });
    for (std::size_t i = 0; i < extra; ++i) {
        const auto d = by_weight[i];
        EXPECT_LT(std::abs(ref.vectors(0, d)), 1e-10);
        const double e = ref.energies(d);
        EXPECT_TRUE(std::any_of(eig.poles.begin(), eig.poles.end(), [&](double p) { return std::abs(p - e) < 1e-12; }));
    }
    for (Eigen::Index i = 0; i < ref.energies.size(); ++i) {
        if (std::find(by_weight.begin(), by_weight.begin() + static_cast<std::ptrdiff_t>(extra), i) ==
            by_weight.begin() + static_cast<std::ptrdiff_t>(extra)) {
            keep.push_back(i);
        }
    }
    ASSERT_EQ(eig.size(), keep.size());

    double scale = 0.0;
    for (double e : eig.eigenvalues) scale = std::max(scale, std::abs(e));
    for (std::size_t m = 0; m < eig.size(); ++m) {
        const auto mi = keep[m];
        EXPECT_NEAR(eig.eigenvalues[m], ref.energies(mi), 1e-12 * std::max(1.0, scale)) << "root " << m;
        EXPECT_NEAR(eig.weights[m], ref.vectors(0, mi) * ref.vectors(0, mi), 1e-11) << "root " << m;
        EXPECT_NEAR(eig.eigenvalues[m], eig.poles[eig.base[m]] + eig.delta_shifts[m], 1e-15 * std::max(1.0, scale));
    }
    EXPECT_NEAR(eig.weight_sum(), 1.0, 1e-12);

    const std::vector<double> times{0.0, 0.7, 3.1, 17.0, 55.5};
    const auto ts = eigen_time_series(eig, times, true);
    EXPECT_EQ(ts.source, "eigen");
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto psi = ref.state(times[i]);
        EXPECT_NEAR(std::abs(ts.amplitude[i] - psi(0)), 0.0, 1e-11) << "t " << times[i];
        std::vector<double> pops(eig.system.band_count, 0.0);
        for (std::size_t j = 0; j < eig.system.size(); ++j) {
            pops[eig.system.band_of[j]] += std::norm(psi(static_cast<Eigen::Index>(j + 1)));
        }
        for (std::size_t b = 0; b < pops.size(); ++b) EXPECT_NEAR(ts.populations[b][i], pops[b], 1e-10);

        const auto amps = band_amplitudes(eig, times[i]);
        for (std::size_t j = 0; j < amps.size(); ++j) {
            ASSERT_NEAR(std::abs(amps[j] - psi(static_cast<Eigen::Index>(j + 1))), 0.0, 1e-10);
        }
    }
    EXPECT_LT(ts.norm_drift, 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Models, EigenVsDense, ::testing::Values(0, 1, 2, 3));

TEST(EigenSolver, LatticeEvaluatorIsUsedForWideBands) {
    const auto sys = assemble(single_band(0.2, 0.1, 200));
    std::vector<double> poles = sys.energies;
    const detail::SecularEvaluator ev(poles, sys, 0.0);
    EXPECT_EQ(ev.lattice_bands(), 1u);
    // Closed form against a long double sum over the exact lattice n·Δ. The
    // stored levels are n·Δ rounded to double; near a pole at large |n| that
    // rounding alone moves a double-precision direct sum by ~1e-11 relative.
    const long double dl = 0.1;
    for (double off : {0.013, 0.05, 0.0999}) {
        for (std::size_t b : {0u, 57u, 200u, 400u}) {
            const auto v = ev(b, off);
            long double s = 0.0L;
            long double ds = 0.0L;
            for (std::size_t j = 0; j < poles.size(); ++j) {
                const long double d = (static_cast<long double>(b) - static_cast<long double>(j)) * dl + off;
                s += 0.04L / d;
                ds += 0.04L / (d * d);
            }
            const double e = poles[b] + off;
            EXPECT_NEAR(v.f, static_cast<double>(e - s), 1e-13 * std::max(1.0L, std::abs(s))) << b << " " << off;
            EXPECT_NEAR(v.df, static_cast<double>(1.0L + ds), 1e-13 * static_cast<double>(1.0L + ds)) << b << " " << off;
        }
    }
    // Beyond the band edge the evaluator falls back to the direct sum.
    const auto far = ev(400, 3.0);
    double s = 0.0;
    for (double p : poles) s += 0.04 / (poles[400] + 3.0 - p);
    EXPECT_NEAR(far.f, poles[400] + 3.0 - s, 1e-12);
}

TEST(EigenSolver, PopulationPathsAgree) {
    // More than 16 times takes the blocked product, a few times the row path.
    ModelSpec m = single_band(0.25, 0.3, 40, 0.05);
    m.bands.push_back(BandSpec{0.4, ConstantCoupling{0.15}, 20});
    const auto eig = solve_eigenvalues(m);
    const auto ref = dense_of(eig.system);
    std::vector<double> many;
    for (int i = 0; i < 40; ++i) many.push_back(1.5 * i);
    const auto blocked = band_populations(eig, many);
    for (std::size_t i = 0; i < many.size(); ++i) {
        const auto psi = ref.state(many[i]);
        std::vector<double> want(2, 0.0);
        for (std::size_t j = 0; j < eig.system.size(); ++j) {
            want[eig.system.band_of[j]] += std::norm(psi(static_cast<Eigen::Index>(j + 1)));
        }
        ASSERT_NEAR(blocked[0][i], want[0], 1e-11) << many[i];
        ASSERT_NEAR(blocked[1][i], want[1], 1e-11) << many[i];
    }
    const std::vector<double> few{many[3], many[17], many[39]};
    const auto rows = band_populations(eig, few);
    for (std::size_t b = 0; b < 2; ++b) {
        EXPECT_NEAR(rows[b][0], blocked[b][3], 1e-13);
        EXPECT_NEAR(rows[b][1], blocked[b][17], 1e-13);
        EXPECT_NEAR(rows[b][2], blocked[b][39], 1e-13);
    }
}

TEST(EigenSolver, MergesCoincidentLevels) {
    // Both bands put levels on multiples of 0.2, so poles coincide.
    ModelSpec m = single_band(0.2, 0.1, 20);
    m.bands.push_back(BandSpec{0.2, ConstantCoupling{0.1}, 10});
    const auto eig = solve_eigenvalues(m);
    EXPECT_EQ(eig.poles.size(), 41u);
    EXPECT_EQ(eig.size(), 42u);
    const auto ref = dense_of(eig.system);
    // The dense spectrum also holds the decoupled combinations sitting exactly
    // on the shared levels; they have zero overlap with the embedded state.
    const auto ts = survival_amplitude(eig, std::vector<double>{0.0, 2.0, 9.0, 40.0});
    for (std::size_t i = 0; i < ts.size(); ++i) {
        EXPECT_NEAR(std::abs(ts.amplitude[i] - ref.amplitude(ts.times[i])), 0.0, 1e-11);
    }
    const auto pops = band_populations(eig, ts.times);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto psi = ref.state(ts.times[i]);
        std::vector<double> want(2, 0.0);
        for (std::size_t j = 0; j < eig.system.size(); ++j) {
            want[eig.system.band_of[j]] += std::norm(psi(static_cast<Eigen::Index>(j + 1)));
        }
        EXPECT_NEAR(pops[0][i] + pops[1][i], want[0] + want[1], 1e-10);
    }
}

TEST(EigenSolver, NoCouplingLeavesStateStationary) {
    const auto eig = solve_eigenvalues(single_band(0.0, 0.3, 5, 0.4));
    ASSERT_EQ(eig.size(), 1u);
    EXPECT_EQ(eig.eigenvalues[0], 0.4);
    EXPECT_EQ(eig.weights[0], 1.0);
    const auto ts = survival_amplitude(eig, std::vector<double>{0.0, 10.0});
    EXPECT_NEAR(std::abs(ts.amplitude[1]), 1.0, 1e-15);
    EXPECT_NEAR(std::arg(ts.amplitude[1]), std::remainder(-4.0, 2.0 * std::numbers::pi), 1e-12);
}

TEST(EigenSolver, CouplingPhaseDoesNotChangeSurvival) {
    const auto sys = assemble(single_band(0.3, 0.25, 30, 0.1));
    const auto a = solve_eigenvalues(sys);
    const auto b = solve_eigenvalues(with_coupling_phase(sys, 1.234));
    const std::vector<double> t{0.0, 1.0, 10.0, 25.0};
    const auto ta = survival_amplitude(a, t);
    const auto tb = survival_amplitude(b, t);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(std::abs(ta.amplitude[i] - tb.amplitude[i]), 0.0, 1e-13);
}

TEST(EigenSolver, NegativeTimeRejected) {
    const auto eig = solve_eigenvalues(single_band(0.3, 0.25, 5));
    EXPECT_THROW(survival_amplitude(eig, std::vector<double>{-1.0}), InvalidArgument);
}

TEST(EigenWeights, DirectRouteMatchesSolver) {
    const auto model = single_band(0.3, 0.25, 20, 0.05);
    const auto eig = solve_eigenvalues(model);
    for (std::size_t m : {0u, 7u, 20u, 41u}) {
        EXPECT_NEAR(eigen_weights(eig.eigenvalues[m], model, WeightRoute::direct), eig.weights[m], 1e-12);
    }
    EXPECT_THROW(eigen_weights(eig.eigenvalues[7] + 1e-3, model, WeightRoute::direct), InvalidArgument);
}

TEST(EigenWeights, ClosedFormMatchesInfiniteBandOracle) {
    const double beta = 0.2496;
    const double delta = 0.2048;
    const double omega = 0.03;
    const auto model = single_band(beta, delta, 10, omega);
    // Root of E − ω = S(E) in cells near the center, by bisection on the oracle.
    auto f = [&](double e) { return e - omega - oracle::constant_band_sum(e, beta, delta); };
    for (int cell : {-3, 0, 2, 9}) {
        double lo = (cell + 1e-9) * delta;
        double hi = (cell + 1 - 1e-9) * delta;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
        const double e = 0.5 * (lo + hi);
        const double h = 1e-5 * delta;
        const double dsum = (oracle::constant_band_sum(e + h, beta, delta) - oracle::constant_band_sum(e - h, beta, delta)) / (2 * h);
        const double want = 1.0 / (1.0 - dsum);  // x² = 1 − dS/dE
        EXPECT_NEAR(eigen_weights(e, model, WeightRoute::closed_form), want, 1e-7 * want) << "cell " << cell;
    }
    EXPECT_THROW(eigen_weights(0.5 * delta, model, WeightRoute::closed_form), InvalidArgument);
    ModelSpec two = model;
    two.bands.push_back(model.bands.front());
    EXPECT_THROW(eigen_weights(0.1, two, WeightRoute::closed_form), UnsupportedProfile);
}
