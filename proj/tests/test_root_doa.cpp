#include <rootcma/array_model.hpp>
#include <rootcma/dsft.hpp>
#include <rootcma/precond.hpp>
#include <rootcma/root_doa.hpp>

#include <support/oracles.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

using namespace rootcma;

namespace {

Scenario three_source()
{
    Scenario s;
    s.sources = {{-53.2, 1.0}, {3.23, 1.0}, {20.0, 1.0}};
    s.seed = 1;
    return s;
}

const CVector& three_source_precond_weights()
{
    static const CVector u = run_preprocessor(synthesize(three_source()), GammaPolicy{}, 1000).u;
    return u;
}

CVector summed(int m, const std::vector<double>& mus)
{
    CVector v(static_cast<std::size_t>(m), cplx{0, 0});
    for (double mu : mus) {
        const auto a = oracle::steering(m, mu);
        for (int k = 0; k < m; ++k)
            v[k] += a[k];
    }
    return v;
}

std::vector<real> sorted(std::vector<real> v)
{
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST(BuildPolynomial, SteeringSumVanishesAtModes)
{
    for (int d = 1; d <= 4; ++d) {
        const auto mus = oracle::phase_related_modes(8, d, 1, 0.2);
        const auto p = build_polynomial(summed(8, mus), 8 + d - 1);
        EXPECT_EQ(p.degree(), 7);
        EXPECT_EQ(p.coefficients.back(), cplx(1.0, 0.0));
        for (double mu : mus)
            EXPECT_LT(std::abs(p(std::polar(1.0, mu))), 1e-9) << d;
    }
    const auto p1 = build_polynomial(steering_vector(8, -0.6), 8.0);
    EXPECT_LT(std::abs(p1(std::polar(1.0, -0.6))), 1e-12);
}

TEST(BuildPolynomial, CoefficientsAreConjugatedShiftedAndNormalized)
{
    const CVector v{{0.0, 0.0}, {1.0, 2.0}, {0.5, -0.5}, {2.0, 1.0}};
    const auto p = build_polynomial(v, 1.0);
    const cplx lead{2.0, -1.0};
    EXPECT_LT(std::abs(p.coefficients[0] - cplx{-1.0, 0.0} / lead), 1e-15);
    EXPECT_LT(std::abs(p.coefficients[1] - cplx{1.0, -2.0} / lead), 1e-15);
    EXPECT_LT(std::abs(p.coefficients[2] - cplx{0.5, 0.5} / lead), 1e-15);
    EXPECT_EQ(p.c_constant, 1.0);
    try {
        build_polynomial(CVector{1.0, 2.0, 1e-13}, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_polynomial);
    }
}

TEST(FindRoots, LinearAndRoundTrip)
{
    const cplx z0 = std::polar(1.0, 0.8);
    for (auto backend : {RootBackend::simultaneous, RootBackend::companion}) {
        const auto rs = find_roots(RootPolynomial{{-z0, 1.0}, 0.0}, backend);
        ASSERT_EQ(rs.size(), 1u);
        EXPECT_LT(std::abs(rs.roots[0] - z0), 1e-14);
    }
    std::mt19937_64 rng(44);
    for (int t = 0; t < 200; ++t) {
        auto c = oracle::random_vector(rng, 8);
        c.back() = 1.0;
        const RootPolynomial p{c, 0.0};
        const auto rs = find_roots(p);
        ASSERT_EQ(rs.size(), 7u);
        ASSERT_LT(reconstruction_error(p, rs.roots), 1e-8);
        const auto other = find_roots(p, RootBackend::companion);
        ASSERT_LT(pairing_distance(rs.roots, other.roots), 1e-7);
        for (std::size_t i = 0; i < rs.size(); ++i)
            ASSERT_NEAR(rs.unit_distance[i], std::abs(rs.roots[i]) - 1.0, 0.0);
    }
}

TEST(FindRoots, NoiseFreePreconditionerHasThreeUnitRoots)
{
    const auto rs = find_roots(build_polynomial(three_source_precond_weights(), 1.0));
    ASSERT_EQ(rs.size(), 7u);
    int on = 0;
    for (real d : rs.unit_distance)
        on += std::abs(d) < 1e-6;
    EXPECT_EQ(on, 3);
}

TEST(FindRoots, SteeringSumRootsIncludeTrueModes)
{
    const auto mus = oracle::phase_related_modes(10, 3, 2, -0.9);
    const auto rs = find_roots(build_polynomial(summed(10, mus), 10 + 3 - 1));
    for (double mu : mus) {
        const cplx z = std::polar(1.0, mu);
        real best = 1e9;
        for (const auto& r : rs.roots)
            best = std::min(best, std::abs(r - z));
        EXPECT_LT(best, 1e-9);
    }
}

TEST(AnalyticRoots, CoincidentModesGiveDoubleRoot)
{
    const double mu = 0.6;
    const auto [z1, z2] = analytic_roots_two_sources(2.0 * std::polar(1.0, mu));
    EXPECT_LT(std::abs(z1 - std::polar(1.0, mu)), 1e-7);
    EXPECT_LT(std::abs(z2 - std::polar(1.0, mu)), 1e-7);
}

TEST(AnalyticRoots, CosineIdentity)
{
    const cplx v1 = std::polar(1.0, 0.3) + std::polar(1.0, 0.9);
    const double re_q0 = (v1.real() * v1.real() - v1.imag() * v1.imag()) / std::norm(v1);
    EXPECT_NEAR(re_q0, std::cos(1.2), 1e-12);
}

TEST(AnalyticRoots, MatchesNumericRootsOnRandomPairs)
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> sum(0.0, M_PI);
    std::uniform_real_distribution<double> half_gap(0.05, M_PI / 2.0);
    for (int t = 0; t < 1000; ++t) {
        const double s = sum(rng);
        const double g = half_gap(rng);
        const double mu1 = s / 2.0 - g;
        const double mu2 = s / 2.0 + g;
        const cplx z1 = std::polar(1.0, mu1);
        const cplx z2 = std::polar(1.0, mu2);
        const auto [a, b] = analytic_roots_two_sources(z1 + z2);
        // exact quadratic (z - z1)(z - z2) solved numerically
        const RootPolynomial p{{z1 * z2, -(z1 + z2), 1.0}, 0.0};
        const auto num = find_roots(p).roots;
        ASSERT_LT(pairing_distance({a, b}, num), 1e-9) << "case " << t;
        ASSERT_LT(pairing_distance({a, b}, {z1, z2}), 1e-9) << "case " << t;
    }
}

TEST(AnalyticRoots, AntipodalModesAreDegenerate)
{
    try {
        analytic_roots_two_sources(std::polar(1.0, 0.4) + std::polar(1.0, 0.4 + M_PI));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_polynomial);
    }
}

TEST(SelectRoots, BothModesAgreeOnNoiseFreeThreeSource)
{
    const auto& u = three_source_precond_weights();
    const auto rs = find_roots(build_polynomial(u, 1.0));
    const auto by_dist = select_roots(rs, u, SelectionMode::unit_distance, 1e-3);
    const auto by_beam = select_roots(rs, u, SelectionMode::beam_response, 0.5);
    EXPECT_EQ(by_dist.model_order(), 3);
    EXPECT_EQ(by_beam.model_order(), 3);
    EXPECT_EQ(by_dist.selected, by_beam.selected);
    EXPECT_EQ(by_beam.beam_score.size(), rs.size());
}

TEST(SelectRoots, SingleSourceBothModes)
{
    Scenario s;
    s.sources = {{-12.0, 1.0}};
    const auto u = run_preprocessor(synthesize(s), GammaPolicy{}, 1000).u;
    const auto rs = find_roots(build_polynomial(u, 1.0));
    EXPECT_EQ(select_roots(rs, u, SelectionMode::unit_distance, 1e-3).model_order(), 1);
    EXPECT_EQ(select_roots(rs, u, SelectionMode::beam_response, 0.5).model_order(), 1);
}

TEST(SelectRoots, EmptyModel)
{
    const auto rs = make_root_set({cplx{2.0, 0.0}, cplx{0.1, 0.1}});
    try {
        select_roots(rs, CVector{0.0, 1.0, 0.0}, SelectionMode::unit_distance, 1e-3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_model);
    }
    EXPECT_THROW(select_roots(rs, CVector(3, cplx{0, 0}), SelectionMode::beam_response, 0.5), Error);
}

TEST(DoaFromRoots, Values)
{
    const ArrayGeometry g{8, 0.5};
    auto rs = make_root_set({cplx{1.0, 0.0}, std::polar(1.0, two_pi * 0.5 * std::sin(deg_to_rad(20.0)))});
    rs.selected = {true, true};
    const auto doa = doa_from_roots(rs, g);
    ASSERT_EQ(doa.angles_deg.size(), 2u);
    EXPECT_NEAR(doa.angles_deg[0], 0.0, 1e-12);
    EXPECT_NEAR(doa.angles_deg[1], 20.0, 1e-10);

    // below half-wavelength spacing, arguments beyond 2 pi (d / lambda) are invisible
    const ArrayGeometry wide{8, 0.25};
    auto far = make_root_set({std::polar(1.0, 2.0), std::polar(1.0, 0.5)});
    far.selected = {true, true};
    const auto part = doa_from_roots(far, wide);
    EXPECT_EQ(part.angles_deg.size(), 1u);
    EXPECT_EQ(part.invisible, std::vector<std::size_t>{0});
    far.selected = {true, false};
    try {
        doa_from_roots(far, wide);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::no_valid_angle);
    }
}

TEST(DoaFromRoots, InvertsSpatialFrequency)
{
    for (real ratio : {0.5, 0.3, 0.1})
        for (real theta = -89.5; theta < 90.0; theta += 0.5) {
            const ArrayGeometry g{8, ratio};
            auto rs = make_root_set({std::polar(1.0, angular_frequency(g, theta))});
            rs.selected = {true};
            ASSERT_NEAR(doa_from_roots(rs, g).angles_deg[0], theta, 1e-10) << ratio << " " << theta;
        }
}

TEST(DoaFromRoots, NoiseFreeThreeSourcePipeline)
{
    const auto& u = three_source_precond_weights();
    const auto rs = select_roots(find_roots(build_polynomial(u, 1.0)), u, SelectionMode::beam_response, 0.5);
    const auto doa = doa_from_roots(rs, ArrayGeometry{});
    const auto got = sorted(doa.angles_deg);
    const std::vector<real> want{-53.2, 3.23, 20.0};
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i)
        EXPECT_NEAR(got[i], want[i], 0.05);
}

TEST(Reconstruct, PseudoinverseProperties)
{
    const ArrayGeometry g{8, 0.5};
    const auto est = reconstruct_and_precondition({-53.2, 3.23, 20.0}, g);
    EXPECT_EQ(est.model_order, 3);
    const auto wa = est.steering_weights.adjoint() * est.response_matrix;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_LT(std::abs(wa(i, j) - (i == j ? 1.0 : 0.0)), 1e-10);
    for (std::size_t m = 0; m < 8; ++m)
        for (std::size_t d = 0; d < 3; ++d)
            EXPECT_NEAR(std::abs(est.response_matrix(m, d)), 1.0, 1e-15);

    const auto one = reconstruct_and_precondition({17.0}, g);
    const auto a = steering_vector(g, angular_frequency(g, 17.0));
    for (std::size_t m = 0; m < 8; ++m)
        EXPECT_LT(std::abs(one.steering_weights(m, 0) - a[m] / 8.0), 1e-14);
}

TEST(Reconstruct, InitializationNullsInterferers)
{
    auto s = three_source();
    s.sources[0].amplitude = 0.6;
    s.sources[2].amplitude = 1.7;
    s.num_snapshots = 300;
    const auto truth = synthesize_with_truth(s);
    const auto est = reconstruct_and_precondition(s.angles_deg(), s.geometry);
    for (std::size_t d = 0; d < 3; ++d) {
        const auto w = est.steering_weights.column(d);
        for (std::size_t n = 0; n < 300; ++n) {
            const cplx y = inner(w, truth.snapshots.snapshot(n));
            const cplx want = s.sources[d].amplitude * std::conj(truth.signals.entries(n, d));
            ASSERT_LT(std::abs(y - want), 1e-9);
        }
    }
}

TEST(Reconstruct, MergesNearDuplicatesAndRejectsDegenerate)
{
    const ArrayGeometry g{8, 0.5};
    const auto est = reconstruct_and_precondition({10.0, 10.05, 30.0}, g);
    EXPECT_EQ(est.angles_deg, (std::vector<real>{10.0, 30.0}));
    try {
        // eight directions packed 0.11 deg apart: numerically singular Vandermonde Gram
        std::vector<real> packed;
        for (int k = 0; k < 8; ++k)
            packed.push_back(10.0 + 0.11 * k);
        reconstruct_and_precondition(packed, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ill_conditioned);
    }
    EXPECT_THROW(reconstruct_and_precondition({}, g), Error);
    EXPECT_THROW(reconstruct_and_precondition({-60, -40, -20, 0, 10, 20, 40, 60, 80}, g), Error);
}

TEST(RootSetCsv, Headers)
{
    auto rs = make_root_set({cplx{1.0, 0.0}, cplx{0.0, 2.0}});
    rs = select_roots(rs, CVector{0.0, 1.0, 0.0}, SelectionMode::unit_distance, 1e-3);
    std::ostringstream a;
    rs.write_csv(a);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "re,im,abs_minus_1,beam_score,selected");
    std::ostringstream b;
    rs.write_deviation_csv(b);
    EXPECT_EQ(b.str(), "index,abs_minus_1\n0,0\n1,1\n");
}
