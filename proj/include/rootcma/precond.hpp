#ifndef ROOTCMA_PRECOND_HPP
#define ROOTCMA_PRECOND_HPP

// Adaptive preprocessor: an LMS predictor of the first-element signal from
// the remaining M-1 elements. The first weight is pinned to zero so the
// filter cannot settle on the all-pass response.

#include <rootcma/array_model.hpp>
#include <rootcma/core.hpp>
#include <rootcma/numerics.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

namespace rootcma {

struct PrecondState {
    CVector u;
    long iteration = 0;
    std::vector<real> mse_history; // |e(n)|^2 per update

    static PrecondState initial(int num_elements)
    {
        PrecondState s;
        s.u.assign(static_cast<std::size_t>(num_elements), cplx{0.0, 0.0});
        return s;
    }

    /// First iteration from which the squared error stays below `threshold`
    /// for the rest of the run.
    std::optional<long> converged_iteration(real threshold = 1e-6) const
    {
        std::optional<long> start;
        for (std::size_t i = 0; i < mse_history.size(); ++i) {
            if (mse_history[i] < threshold) {
                if (!start)
                    start = static_cast<long>(i);
            } else {
                start.reset();
            }
        }
        return start;
    }
};

inline constexpr real default_step_epsilon = 1e-6;

/// 2 / ||x||^2 - epsilon, the largest step that keeps the update stable.
inline real step_bound(const CVector& x, real epsilon = default_step_epsilon)
{
    const real energy = norm_squared(x);
    if (!(energy > 0.0))
        throw Error(ErrorCode::undefined_bound, "step bound is undefined for a zero snapshot");
    return 2.0 / energy - epsilon;
}

inline PrecondState precond_step(const PrecondState& state, const CVector& x, real gamma)
{
    if (x.size() != state.u.size())
        throw Error(ErrorCode::dimension_mismatch, "snapshot length does not match preprocessor");
    const cplx y = inner(state.u, x);
    const cplx e = x[0] - y;
    const cplx e_conj = std::conj(e);
    PrecondState next = state;
    for (std::size_t m = 1; m < x.size(); ++m)
        next.u[m] += gamma * x[m] * e_conj;
    next.u[0] = 0.0;
    if (!all_finite(next.u))
        throw DivergedError("preprocessor update produced a non-finite state", state.u, state.iteration);
    next.mse_history.push_back(std::norm(e));
    ++next.iteration;
    return next;
}

enum class GammaMode { fixed, adaptive };

struct GammaPolicy {
    GammaMode mode = GammaMode::adaptive;
    real gamma = 1e-3;                      // used in fixed mode
    real epsilon = default_step_epsilon;    // used in adaptive mode

    real step_for(const CVector& x) const
    {
        return mode == GammaMode::fixed ? gamma : step_bound(x, epsilon);
    }
};

/// Runs `iterations` updates, consuming snapshots in column order and
/// cycling when iterations exceed N.
inline PrecondState run_preprocessor(const SnapshotMatrix& x, const GammaPolicy& policy, long iterations)
{
    PrecondState state = PrecondState::initial(static_cast<int>(x.num_elements()));
    if (iterations <= 0)
        return state;
    if (x.num_snapshots() == 0)
        throw Error(ErrorCode::invalid_scenario, "no snapshots");
    state.mse_history.reserve(static_cast<std::size_t>(iterations));
    for (long n = 0; n < iterations; ++n) {
        const CVector xn = x.snapshot(static_cast<std::size_t>(n) % x.num_snapshots());
        if (norm_squared(xn) == 0.0)
            continue;
        state = precond_step(state, xn, policy.step_for(xn));
    }
    return state;
}

inline constexpr real max_condition = 1e12;

namespace detail {

struct NormalEquations {
    ComplexMatrix gram; // X1 X1^H
    CVector rhs;        // X1 x0^H
};

inline NormalEquations ols_normal_equations(const SnapshotMatrix& x)
{
    const std::size_t m = x.num_elements();
    const std::size_t n = x.num_snapshots();
    if (m < 2)
        throw Error(ErrorCode::dimension_mismatch, "need at least two elements");
    const std::size_t p = m - 1;
    if (n < p)
        throw Error(ErrorCode::ill_conditioned, "rank-deficient: fewer snapshots than predictor taps");
    const auto& e = x.entries;
    NormalEquations ne{ComplexMatrix(p, p), CVector(p, cplx{0.0, 0.0})};
    for (std::size_t t = 0; t < n; ++t) {
        const cplx x0c = std::conj(e(0, t));
        for (std::size_t i = 0; i < p; ++i) {
            const cplx xi = e(i + 1, t);
            ne.rhs[i] += xi * x0c;
            for (std::size_t j = 0; j < p; ++j)
                ne.gram(i, j) += xi * std::conj(e(j + 1, t));
        }
    }
    return ne;
}

} // namespace detail

/// Least-squares predictor of row 0 from rows 1..M-1:
/// w = (X1 X1^H)^{-1} X1 x0^H. Refuses a Gram matrix whose condition
/// number exceeds max_condition.
inline CVector ols_fit(const SnapshotMatrix& x)
{
    const auto ne = detail::ols_normal_equations(x);
    if (!(hpd_condition(ne.gram) <= max_condition))
        throw Error(ErrorCode::ill_conditioned, "rank-deficient Gram matrix in OLS fit");
    return hpd_solve(ne.gram, ne.rhs);
}

/// Minimum-norm least-squares predictor. Noise-free data with D < M-1
/// sources has a Gram matrix of rank D; this is the solution the LMS
/// preprocessor converges to from u = 0.
inline CVector ols_fit_min_norm(const SnapshotMatrix& x, real rcond = 1e-10)
{
    const auto ne = detail::ols_normal_equations(x);
    return psd_pinv_solve(ne.gram, ne.rhs, rcond);
}

/// Full-length weight vector [0, w_1, ..., w_{M-1}] for an OLS predictor.
inline CVector pinned_weights(const CVector& predictor)
{
    CVector u(predictor.size() + 1, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < predictor.size(); ++i)
        u[i + 1] = predictor[i];
    return u;
}

/// Learning curve: iteration, mse.
inline void write_mse_csv(std::ostream& os, const std::vector<real>& mse)
{
    os << "iteration,mse\n";
    char buf[96];
    for (std::size_t i = 0; i < mse.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, mse[i]);
        os << buf;
    }
}

/// Weights as complex pairs: index, re, im.
inline void write_weights_csv(std::ostream& os, const CVector& w)
{
    os << "index,re,im\n";
    char buf[96];
    for (std::size_t i = 0; i < w.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, w[i].real(), w[i].imag());
        os << buf;
    }
}

} // namespace rootcma

#endif // ROOTCMA_PRECOND_HPP
