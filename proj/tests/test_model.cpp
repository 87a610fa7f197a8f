#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rcdecay/eigensolver.hpp"
#include "rcdecay/model.hpp"

using namespace rcdecay;

TEST(BuildBand, ConstantCouplingLevels) {
    const auto band = build_band(BandSpec{0.2048, ConstantCoupling{0.2496}, 2});
    ASSERT_EQ(band.size(), 5u);
    const std::vector<double> expected{-0.4096, -0.2048, 0.0, 0.2048, 0.4096};
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(band.energies[i], expected[i]);
        EXPECT_EQ(band.couplings[i], 0.2496);
    }
    EXPECT_NO_THROW(band.validate());
}

TEST(BuildBand, HarmonicPatternHasExactZeros) {
    // Δ = π/(2T): M = 4, pattern 1, 1/√2, 0, −1/√2, −1 from the center out.
    const double period = 1.0;
    const auto band = build_band(BandSpec{std::numbers::pi / (2.0 * period), HarmonicCoupling{1.0, period}, 4});
    const std::vector<double> mags{1.0, 1.0 / std::sqrt(2.0), 0.0, 1.0 / std::sqrt(2.0), 1.0};
    for (int n = 0; n <= 4; ++n) {
        EXPECT_NEAR(std::abs(band.couplings[static_cast<std::size_t>(4 + n)]), mags[static_cast<std::size_t>(n)], 1e-15);
        EXPECT_EQ(band.couplings[static_cast<std::size_t>(4 + n)], band.couplings[static_cast<std::size_t>(4 - n)]);
    }
    EXPECT_EQ(band.couplings[6], 0.0);
    EXPECT_EQ(band.couplings[2], 0.0);
}

TEST(BuildBand, ZeroCouplingAndValidation) {
    const auto band = build_band(BandSpec{0.3, ConstantCoupling{0.0}, 3});
    for (double c : band.couplings) EXPECT_EQ(c, 0.0);
    EXPECT_THROW(build_band(BandSpec{0.0, ConstantCoupling{0.1}, 3}), InvalidSpec);
    EXPECT_THROW(build_band(BandSpec{-1.0, ConstantCoupling{0.1}, 3}), InvalidSpec);
    EXPECT_THROW(build_band(BandSpec{0.1, ConstantCoupling{0.1}, 0}), InvalidSpec);
    EXPECT_THROW(build_band(BandSpec{0.1, ExplicitCoupling{{0.1, 0.2}}, 1}), InvalidSpec);
    EXPECT_THROW(build_band(BandSpec{0.1, ConstantCoupling{-0.1}, 1}), InvalidSpec);
    EXPECT_NO_THROW(build_band(BandSpec{0.1, ExplicitCoupling{{0.1, 0.2, 0.1}}, 1}));
}

TEST(DiscretizedBand, RejectsIrregularSpacing) {
    auto band = build_band(BandSpec{0.5, ConstantCoupling{0.1}, 3});
    band.energies[1] += 1e-6;
    EXPECT_THROW(band.validate(), InvalidSpec);
}

TEST(DerivedParams, RatesAndRevivalTimes) {
    ModelSpec m;
    m.bands.push_back(BandSpec{0.2048, ConstantCoupling{0.2496}, 10});
    const auto d = derived_params(m);
    // 2π·0.2496²/0.2048 evaluated in long double
    const long double g = 2.0L * std::numbers::pi_v<long double> * 0.2496L * 0.2496L / 0.2048L;
    EXPECT_NEAR(d.gamma[0], static_cast<double>(g), 1e-14);
    EXPECT_NEAR(d.gamma[0], 1.9114, 1e-3);
    EXPECT_DOUBLE_EQ(d.tau[0] * 0.2048, 2.0 * std::numbers::pi);
    EXPECT_DOUBLE_EQ(d.ell[0], std::numbers::pi / 0.2048);
    EXPECT_EQ(d.gamma_total, d.gamma[0]);
}

TEST(DerivedParams, TwoBandsAndPairs) {
    ModelSpec m;
    m.bands.push_back(BandSpec{0.1024, ConstantCoupling{0.2496}, 10});
    m.bands.push_back(BandSpec{0.0613, ConstantCoupling{0.2496}, 10});
    const auto d = derived_params(m);
    EXPECT_NEAR(d.tau[0], 61.36, 0.005);
    EXPECT_NEAR(d.tau[1], 102.5, 0.05);
    ASSERT_EQ(d.tau_pairs.size(), 1u);
    EXPECT_DOUBLE_EQ(d.tau_pairs[0], d.tau[0] + d.tau[1]);
    EXPECT_EQ(d.gamma_total, d.gamma[0] + d.gamma[1]);
    const double g12_half = std::numbers::pi * (0.2496 * 0.2496 / 0.1024 + 0.2496 * 0.2496 / 0.0613);
    EXPECT_NEAR(d.gamma_total / 2.0, g12_half, 1e-13);
}

TEST(DerivedParams, ZeroCouplingAndHarmonicRejected) {
    ModelSpec m;
    m.bands.push_back(BandSpec{0.5, ConstantCoupling{0.0}, 4});
    const auto d = derived_params(m);
    EXPECT_EQ(d.gamma[0], 0.0);
    EXPECT_DOUBLE_EQ(d.tau[0], 4.0 * std::numbers::pi);

    ModelSpec h;
    h.bands.push_back(BandSpec{std::numbers::pi / 2.0, HarmonicCoupling{1.0, 1.0}, 8});
    EXPECT_THROW(derived_params(h), UnsupportedProfile);
}

TEST(RefineBand, IdentityAndRateInvariance) {
    const auto band = build_band(BandSpec{0.1, ConstantCoupling{0.2}, 5});
    const auto same = refine_band(band, 1);
    EXPECT_EQ(same.energies, band.energies);
    EXPECT_EQ(same.couplings, band.couplings);

    const auto fine = refine_band(band, 4);
    EXPECT_DOUBLE_EQ(fine.delta, 0.025);
    EXPECT_DOUBLE_EQ(fine.couplings.front(), 0.1);
    EXPECT_EQ(fine.n_half, 20);
    EXPECT_DOUBLE_EQ(fine.energies.back(), band.energies.back());
    const double g0 = 2.0 * std::numbers::pi * 0.2 * 0.2 / 0.1;
    const double g1 = 2.0 * std::numbers::pi * fine.couplings[0] * fine.couplings[0] / fine.delta;
    EXPECT_NEAR(g1, g0, 1e-14 * g0);

    EXPECT_THROW(refine_band(band, 0), InvalidArgument);
    const auto harm = build_band(BandSpec{std::numbers::pi / 2.0, HarmonicCoupling{1.0, 1.0}, 8});
    EXPECT_THROW(refine_band(harm, 2), UnsupportedProfile);
    EXPECT_THROW(refine_band(BandSpec{0.1, ExplicitCoupling{{0.1, 0.2, 0.1}}, 1}, 2), UnsupportedProfile);
}

TEST(HarmonicMapping, BandStructure) {
    const double beta = 0.7;
    const double period = 2.0;
    const auto m2 = harmonic_as_parallel_bands(beta, period, 2, 40);
    ASSERT_EQ(m2.bands.size(), 1u);
    const double delta = 2.0 * std::numbers::pi / (2 * period);
    EXPECT_DOUBLE_EQ(m2.bands[0].delta, 2.0 * delta);
    // γ' = πβ²/Δ = γ/2
    const auto d2 = derived_params(m2);
    EXPECT_NEAR(d2.gamma_total, std::numbers::pi * beta * beta / delta, 1e-13);

    const auto m3 = harmonic_as_parallel_bands(beta, period, 3, 42);
    ASSERT_EQ(m3.bands.size(), 2u);
    EXPECT_EQ(std::get<ConstantCoupling>(m3.bands[0].profile).beta, beta);
    const auto m4 = harmonic_as_parallel_bands(beta, period, 4, 40);
    ASSERT_EQ(m4.bands.size(), 2u);
    EXPECT_THROW(harmonic_as_parallel_bands(beta, period, 5, 40), UnsupportedProfile);
    EXPECT_THROW(harmonic_as_parallel_bands(beta, period, 1, 40), UnsupportedProfile);
}

// On the truncated lattice the parallel-band model reproduces the harmonic
// secular sum term by term.
class HarmonicMappingSums : public ::testing::TestWithParam<int> {};

TEST_P(HarmonicMappingSums, TruncatedSumsAgree) {
    const int order = GetParam();
    const double beta = 0.9;
    const double period = 1.3;
    const double delta = 2.0 * std::numbers::pi / (order * period);
    const int n_half = 12 * order;
    ModelSpec harmonic;
    harmonic.bands.push_back(BandSpec{delta, HarmonicCoupling{beta, period}, n_half});
    const auto mapped = harmonic_as_parallel_bands(beta, period, order, n_half);

    std::mt19937_64 rng(17 + order);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int i = 0; i < 100; ++i) {
        const double e = (std::floor(20.0 * dist(rng)) + 0.5 + 0.8 * dist(rng)) * delta;
        const double a = secular_rhs(e, harmonic, SecularMode::direct);
        const double b = secular_rhs(e, mapped, SecularMode::direct);
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a))) << "E = " << e;
    }
}

INSTANTIATE_TEST_SUITE_P(Orders, HarmonicMappingSums, ::testing::Values(2, 3, 4));

TEST(Assemble, DropsZeroCouplingsAndKeepsBandIndex) {
    ModelSpec m;
    m.bands.push_back(BandSpec{std::numbers::pi / 2.0, HarmonicCoupling{1.0, 1.0}, 8});  // M = 4
    m.bands.push_back(BandSpec{0.3, ConstantCoupling{0.1}, 2});
    const auto sys = assemble(m);
    // 17 harmonic levels, 4 of them (n ≡ 2 mod 4) uncoupled, plus 5.
    EXPECT_EQ(sys.size(), 13u + 5u);
    EXPECT_EQ(sys.band_count, 2u);
    std::size_t second = 0;
    for (auto b : sys.band_of) second += b == 1;
    EXPECT_EQ(second, 5u);
    EXPECT_DOUBLE_EQ(sys.min_delta, 0.3);
}

TEST(DefaultTruncation, HalfWidthRule) {
    // NΔ >= max(40γ, 100Δ)
    EXPECT_EQ(default_n_half(0.2048, 1.9114), static_cast<int>(std::ceil(40.0 * 1.9114 / 0.2048)));
    EXPECT_EQ(default_n_half(1.0, 0.01), 100);
}
