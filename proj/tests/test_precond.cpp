#include <rootcma/array_model.hpp>
#include <rootcma/dsft.hpp>
#include <rootcma/precond.hpp>
#include <rootcma/root_doa.hpp>

#include <support/oracles.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace rootcma;

namespace {

Scenario three_source(real snr_db = std::numeric_limits<real>::infinity())
{
    Scenario s;
    s.sources = {{-53.2, 1.0}, {3.23, 1.0}, {20.0, 1.0}};
    s.snr_db = snr_db;
    s.seed = 1;
    return s;
}

const PrecondState& converged_three_source()
{
    static const PrecondState st = run_preprocessor(synthesize(three_source()), GammaPolicy{}, 1000);
    return st;
}

} // namespace

TEST(StepBound, Values)
{
    EXPECT_NEAR(step_bound(CVector{1.0, cplx{0.0, 1.0}}), 1.0 - 1e-6, 1e-15);
    EXPECT_LT(step_bound(CVector{1.0, cplx{0.0, 1.0}}), 1.0);
    EXPECT_NEAR(step_bound(steering_vector(8, 0.4)), 0.25 - 1e-6, 1e-15);
    EXPECT_NEAR(step_bound(steering_vector(8, 0.4), 0.0), 0.25, 1e-15);
    try {
        step_bound(CVector(4, cplx{0, 0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::undefined_bound);
    }
}

TEST(PrecondStep, ZeroSnapshotLeavesWeights)
{
    PrecondState s = PrecondState::initial(5);
    s.u = {0.0, {1, 2}, {0, -1}, {0.5, 0.5}, {3, 0}};
    const auto next = precond_step(s, CVector(5, cplx{0, 0}), 0.1);
    EXPECT_EQ(next.u, s.u);
}

TEST(PrecondStep, UpdatesOnlyTrailingWeights)
{
    std::mt19937_64 rng(3);
    PrecondState s = PrecondState::initial(6);
    for (int n = 0; n < 200; ++n) {
        const auto x = oracle::random_vector(rng, 6);
        const cplx e = x[0] - inner(s.u, x);
        const auto next = precond_step(s, x, 0.05);
        ASSERT_EQ(next.u[0], cplx(0.0, 0.0));
        for (std::size_t m = 1; m < 6; ++m)
            ASSERT_LT(std::abs(next.u[m] - (s.u[m] + 0.05 * x[m] * std::conj(e))), 1e-14);
        ASSERT_NEAR(next.mse_history.back(), std::norm(e), 1e-14);
        s = next;
    }
    EXPECT_EQ(s.iteration, 200);
    EXPECT_THROW(precond_step(s, CVector(5, cplx{1, 0}), 0.1), Error);
}

TEST(PrecondStep, DivergenceReported)
{
    PrecondState s = PrecondState::initial(3);
    const CVector x{{1e200, 0}, {1e200, 0}, {1e200, 0}};
    EXPECT_THROW(precond_step(s, x, 1e200), DivergedError);
}

TEST(RunPreprocessor, NoiseFreeConvergesWithAdaptiveStep)
{
    const auto& st = converged_three_source();
    ASSERT_EQ(st.mse_history.size(), 1000u);
    const auto conv = st.converged_iteration(1e-6);
    ASSERT_TRUE(conv.has_value());
    EXPECT_LE(*conv, 1000);
    EXPECT_EQ(st.u[0], cplx(0.0, 0.0));
    for (const auto& src : three_source().sources) {
        const cplx b = beam_response(st.u, angular_frequency(ArrayGeometry{}, src.angle_deg));
        EXPECT_LT(std::abs(b - 1.0), 1e-3) << src.angle_deg;
    }
}

TEST(RunPreprocessor, WindowedMseNonIncreasingBelowBound)
{
    const auto x = synthesize(three_source());
    const auto st = run_preprocessor(x, GammaPolicy{GammaMode::fixed, 0.05, 0.0}, 3000);
    real prev = std::numeric_limits<real>::infinity();
    for (std::size_t w = 0; w + 50 <= st.mse_history.size(); w += 50) {
        real avg = 0.0;
        for (std::size_t i = w; i < w + 50; ++i)
            avg += st.mse_history[i];
        avg /= 50.0;
        ASSERT_LE(avg, prev * (1.0 + 1e-9) + 1e-28) << "window " << w / 50;
        prev = avg;
    }
}

TEST(RunPreprocessor, ZeroIterationsAndDeterminism)
{
    const auto x = synthesize(three_source(20.0));
    const auto none = run_preprocessor(x, GammaPolicy{}, 0);
    EXPECT_EQ(none.u, CVector(8, cplx{0, 0}));
    EXPECT_TRUE(none.mse_history.empty());
    const GammaPolicy fixed{GammaMode::fixed, 1e-3, 1e-6};
    const auto a = run_preprocessor(x, fixed, 500);
    const auto b = run_preprocessor(x, fixed, 500);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.mse_history, b.mse_history);
}

TEST(RunPreprocessor, FixedPointAnnihilatesSteeringVectors)
{
    const auto& st = converged_three_source();
    const auto p = build_polynomial(st.u, 1.0);
    for (const auto& src : three_source().sources) {
        const cplx z = std::polar(1.0, angular_frequency(ArrayGeometry{}, src.angle_deg));
        EXPECT_LT(std::abs(p(z)), 1e-6) << src.angle_deg;
    }
    const auto x = synthesize(three_source());
    real worst = 0.0;
    for (std::size_t n = 0; n < 500; ++n) {
        const auto xn = x.snapshot(n);
        worst = std::max(worst, std::abs(xn[0] - inner(st.u, xn)));
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(OlsFit, NoiseFreeSingleSourceIsExact)
{
    Scenario s;
    s.sources = {{33.0, 1.0}};
    s.num_snapshots = 400;
    const auto x = synthesize(s);
    const auto w = ols_fit_min_norm(x);
    real res = 0.0;
    real ref = 0.0;
    for (std::size_t n = 0; n < x.num_snapshots(); ++n) {
        cplx pred{0.0, 0.0};
        for (std::size_t i = 0; i < w.size(); ++i)
            pred += std::conj(w[i]) * x.entries(i + 1, n);
        res += std::norm(x.entries(0, n) - pred);
        ref += std::norm(x.entries(0, n));
    }
    EXPECT_LT(std::sqrt(res), 1e-9 * std::sqrt(ref));
    // rank one Gram: the strict solver refuses it
    EXPECT_THROW(ols_fit(x), Error);
}

TEST(OlsFit, NoiseFreeThreeSourceRootsOnUnitCircle)
{
    const auto w = ols_fit_min_norm(synthesize(three_source()));
    const auto rs = find_roots(build_polynomial(pinned_weights(w), 1.0));
    int on_circle = 0;
    for (real d : rs.unit_distance)
        on_circle += std::abs(d) < 1e-6;
    EXPECT_EQ(on_circle, 3);
}

TEST(OlsFit, LmsConvergesToMinimumNormSolution)
{
    const auto w = ols_fit_min_norm(synthesize(three_source()));
    const auto& st = converged_three_source();
    real dist = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        dist += std::norm(st.u[i + 1] - w[i]);
    EXPECT_LT(std::sqrt(dist), 1e-3);
}

TEST(OlsFit, NoisyDataMatchesDirectNormalEquations)
{
    const auto x = synthesize(three_source(10.0));
    const auto w = ols_fit(x);
    const auto w2 = ols_fit_min_norm(x, 0.0);
    oracle::Dense gram(7, CVector(7, cplx{0, 0}));
    CVector rhs(7, cplx{0, 0});
    for (std::size_t n = 0; n < x.num_snapshots(); ++n)
        for (std::size_t i = 0; i < 7; ++i) {
            rhs[i] += x.entries(i + 1, n) * std::conj(x.entries(0, n));
            for (std::size_t j = 0; j < 7; ++j)
                gram[i][j] += x.entries(i + 1, n) * std::conj(x.entries(j + 1, n));
        }
    const auto inv = oracle::invert(gram);
    for (std::size_t i = 0; i < 7; ++i) {
        cplx ref{0.0, 0.0};
        for (std::size_t j = 0; j < 7; ++j)
            ref += inv[i][j] * rhs[j];
        EXPECT_LT(std::abs(w[i] - ref), 1e-10);
        EXPECT_LT(std::abs(w2[i] - ref), 1e-10);
    }
}

TEST(OlsFit, ZeroPredictorRowsAreRankDeficient)
{
    SnapshotMatrix x{ComplexMatrix(8, 200), three_source()};
    for (std::size_t n = 0; n < 200; ++n)
        x.entries(0, n) = 1.0;
    try {
        ols_fit(x);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ill_conditioned);
    }
    EXPECT_THROW(ols_fit_min_norm(x), Error);
}

TEST(MotivationProperty, OutputPowerMatchesQuadraticForm)
{
    Scenario s;
    s.sources = {{-20.0, 1.0}, {10.0, 0.6}, {45.0, 0.8}};
    s.num_snapshots = 100000;
    s.seed = 4;
    const auto r = synthesize_with_truth(s);
    std::mt19937_64 rng(2);
    const auto w = oracle::random_vector(rng, 8);
    real p = 0.0;
    for (std::size_t n = 0; n < r.snapshots.num_snapshots(); ++n)
        p += std::norm(inner(w, r.snapshots.snapshot(n)));
    p /= static_cast<real>(s.num_snapshots);
    real q = 0.0;
    for (std::size_t d = 0; d < 3; ++d)
        q += s.sources[d].amplitude * s.sources[d].amplitude * std::norm(inner(w, r.steering.column(d)));
    EXPECT_NEAR(p, q, 0.05 * q);
}

TEST(PrecondCsv, Headers)
{
    std::ostringstream a;
    write_mse_csv(a, {0.5, 0.25});
    EXPECT_EQ(a.str(), "iteration,mse\n0,0.5\n1,0.25\n");
    std::ostringstream b;
    write_weights_csv(b, {0.0, cplx{1.5, -2}});
    EXPECT_EQ(b.str(), "index,re,im\n0,0,0\n1,1.5,-2\n");
}
