#ifndef ROOTCMA_CMA_HPP
#define ROOTCMA_CMA_HPP

// Constant-modulus spatial filter: instantaneous cost, error and gradient,
// stochastic gradient descent/ascent, the RLS-orthogonalized step, and the
// two experiment runners (normalized ascent, soft-equalizer descent).

#include <rootcma/array_model.hpp>
#include <rootcma/core.hpp>
#include <rootcma/numerics.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

namespace rootcma {

enum class Direction { descent, ascent };

struct CmaState {
    CVector weights;
    real step_gamma = 1e-3;
    long iteration = 0;

    /// w = e_1, the all-pass response.
    static CmaState all_pass(int num_elements, real gamma)
    {
        CmaState s;
        s.weights.assign(static_cast<std::size_t>(num_elements), cplx{0.0, 0.0});
        s.weights[0] = 1.0;
        s.step_gamma = gamma;
        return s;
    }
};

inline constexpr real divergence_modulus = 1e6;

/// y = w^H x
inline cplx cma_output(const CVector& weights, const CVector& x)
{
    if (weights.size() != x.size())
        throw Error(ErrorCode::dimension_mismatch, "weights and snapshot lengths differ");
    return inner(weights, x);
}

inline cplx cma_output(const CmaState& state, const CVector& x) { return cma_output(state.weights, x); }

inline real cma_cost_instant(cplx y) noexcept
{
    const real dev = std::norm(y) - 1.0;
    return 0.25 * dev * dev;
}

/// e = (1 - |y|^2) y
inline cplx cma_error(cplx y) noexcept { return (1.0 - std::norm(y)) * y; }

/// Instantaneous gradient (|y|^2 - 1) x y^*, i.e. dJ/dRe(w) + i dJ/dIm(w)
/// for J = (|w^H x|^2 - 1)^2 / 4.
inline CVector cma_gradient(const CVector& weights, const CVector& x)
{
    const cplx y = cma_output(weights, x);
    const cplx scale = (std::norm(y) - 1.0) * std::conj(y);
    CVector g(x.size());
    for (std::size_t m = 0; m < x.size(); ++m)
        g[m] = x[m] * scale;
    return g;
}

namespace detail {

inline void check_not_zero(const CVector& w)
{
    if (norm_squared(w) == 0.0)
        throw Error(ErrorCode::domain, "CMA weights must not be all-zero");
}

inline void guard_divergence(const CVector& next, cplx y, const CVector& previous, long iteration)
{
    if (!all_finite(next) || !(std::abs(y) <= divergence_modulus))
        throw DivergedError("CMA update produced a non-finite or runaway state", previous, iteration);
}

} // namespace detail

/// Descent: w + gamma x e^*. Ascent flips the sign of the update.
inline CmaState cma_step(const CmaState& state, const CVector& x, Direction direction)
{
    const cplx y = cma_output(state, x);
    const cplx e_conj = std::conj(cma_error(y));
    const real sign = direction == Direction::descent ? 1.0 : -1.0;
    CmaState next = state;
    for (std::size_t m = 0; m < x.size(); ++m)
        next.weights[m] += sign * state.step_gamma * x[m] * e_conj;
    detail::guard_divergence(next.weights, y, state.weights, state.iteration);
    ++next.iteration;
    return next;
}

// ---------------------------------------------------------------------------
// RLS step-size orthogonalization

struct RlsState {
    ComplexMatrix p;     // inverse of the exponentially weighted correlation
    real alpha = 0.99;   // forgetting factor

    /// R(n0) = sigma2 I, so P(n0) = I / sigma2.
    static RlsState initial(int num_elements, real sigma2 = 1.0, real alpha = 0.99)
    {
        if (!(sigma2 > 0.0))
            throw Error(ErrorCode::domain, "RLS initial sigma^2 must be positive");
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw Error(ErrorCode::domain, "forgetting factor must lie in (0, 1]");
        RlsState s;
        s.p = ComplexMatrix::identity(static_cast<std::size_t>(num_elements));
        for (int i = 0; i < num_elements; ++i)
            s.p(i, i) = 1.0 / sigma2;
        s.alpha = alpha;
        return s;
    }
};

struct RlsGain {
    ComplexMatrix gain; // P(n-1) / (alpha + x^H P(n-1) x)
    RlsState updated;
};

inline RlsGain rls_gain(const RlsState& rls, const CVector& x)
{
    const std::size_t m = rls.p.rows();
    if (x.size() != m)
        throw Error(ErrorCode::dimension_mismatch, "snapshot length does not match RLS state");
    const CVector px = rls.p * x;
    const cplx quad = inner(x, px);
    const real denom = rls.alpha + quad.real();
    if (!(denom > 0.0) || !std::isfinite(denom))
        throw Error(ErrorCode::not_positive_definite, "RLS inverse correlation lost positive definiteness; re-initialize");

    RlsGain out{ComplexMatrix(m, m), RlsState{ComplexMatrix(m, m), rls.alpha}};
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            out.gain(i, j) = rls.p(i, j) / denom;
            out.updated.p(i, j) = (rls.p(i, j) - px[i] * std::conj(px[j]) / denom) / rls.alpha;
        }
    for (std::size_t i = 0; i < m; ++i)
        if (!(out.updated.p(i, i).real() > 0.0))
            throw Error(ErrorCode::not_positive_definite, "RLS inverse correlation lost positive definiteness; re-initialize");
    return out;
}

/// CMA update with the matrix-valued RLS step in place of the scalar gamma.
inline std::pair<CmaState, RlsState> cma_step_rls(const CmaState& state, const RlsState& rls, const CVector& x,
                                                   Direction direction)
{
    const cplx y = cma_output(state, x);
    const cplx e_conj = std::conj(cma_error(y));
    auto [gain, updated] = rls_gain(rls, x);
    const CVector gx = gain * x;
    const real sign = direction == Direction::descent ? 1.0 : -1.0;
    CmaState next = state;
    for (std::size_t m = 0; m < x.size(); ++m)
        next.weights[m] += sign * gx[m] * e_conj;
    detail::guard_divergence(next.weights, y, state.weights, state.iteration);
    ++next.iteration;
    return {std::move(next), std::move(updated)};
}

// ---------------------------------------------------------------------------
// Experiment runners

struct AscentRunResult {
    CVector v;                          // rescaled so ||v||^2 = D^2 + D(M-1)
    std::vector<real> modulus_history;  // |y(n)|
    std::optional<long> converged_iteration;
};

/// Target norm^2 of a sum of D phase-related steering vectors.
inline real steering_sum_norm_squared(int num_sources, int num_elements)
{
    const auto d = static_cast<real>(num_sources);
    return d * d + d * static_cast<real>(num_elements - 1);
}

/// Checkpoint spacing and movement threshold for the ascent convergence marker.
inline constexpr long ascent_checkpoint = 100;
inline constexpr real ascent_settle_distance = 0.05;

/// Gradient ascent on the CMA cost with the weights renormalized to unit
/// norm after every update. Starts from the all-pass response unless
/// `init` is given. Snapshots are reused cyclically.
inline AscentRunResult run_ascent_normalized(const SnapshotMatrix& x, int num_sources, real gamma, long iterations,
                                             std::optional<CVector> init = std::nullopt)
{
    const auto m = static_cast<int>(x.num_elements());
    if (num_sources < 1 || num_sources > m - 1)
        throw Error(ErrorCode::invalid_scenario, "number of sources must be in [1, M-1]");
    if (x.num_snapshots() == 0)
        throw Error(ErrorCode::invalid_scenario, "no snapshots");

    CmaState state = CmaState::all_pass(m, gamma);
    if (init) {
        if (init->size() != static_cast<std::size_t>(m))
            throw Error(ErrorCode::dimension_mismatch, "initial weights have the wrong length");
        detail::check_not_zero(*init);
        state.weights = *init;
    }
    {
        const real n0 = norm2(state.weights);
        for (auto& w : state.weights)
            w /= n0;
    }

    AscentRunResult result;
    result.modulus_history.reserve(static_cast<std::size_t>(std::max<long>(iterations, 0)));
    CVector checkpoint = state.weights;
    for (long n = 0; n < iterations; ++n) {
        const CVector xn = x.snapshot(static_cast<std::size_t>(n) % x.num_snapshots());
        result.modulus_history.push_back(std::abs(cma_output(state, xn)));
        state = cma_step(state, xn, Direction::ascent);
        const real len = norm2(state.weights);
        if (!(len > 0.0) || !std::isfinite(len))
            throw DivergedError("normalized ascent collapsed", checkpoint, n);
        for (auto& w : state.weights)
            w /= len;
        if ((n + 1) % ascent_checkpoint == 0) {
            real moved = 0.0;
            for (std::size_t i = 0; i < checkpoint.size(); ++i)
                moved += std::norm(state.weights[i] - checkpoint[i]);
            if (std::sqrt(moved) < ascent_settle_distance) {
                if (!result.converged_iteration)
                    result.converged_iteration = n + 1;
            } else {
                result.converged_iteration.reset();
            }
            checkpoint = state.weights;
        }
    }
    const real scale = std::sqrt(steering_sum_norm_squared(num_sources, m));
    result.v = state.weights;
    for (auto& w : result.v)
        w *= scale;
    return result;
}

struct EqualizerRunResult {
    CVector weights;
    real avg_output_modulus = 0.0; // mean |y| over the final quarter of iterations
    real avg_cost = 0.0;           // mean instantaneous cost over the same window
    std::vector<real> modulus_history;
    std::vector<real> cost_history;
};

/// Plain CMA descent. The averaging window covers the last
/// ceil(iterations / 4) iterations.
inline EqualizerRunResult run_descent_equalizer(const SnapshotMatrix& x, real gamma, long iterations,
                                                const CVector& init)
{
    if (init.size() != x.num_elements())
        throw Error(ErrorCode::dimension_mismatch, "initial weights have the wrong length");
    detail::check_not_zero(init);
    if (!(gamma >= 0.0))
        throw Error(ErrorCode::domain, "step size must be non-negative");
    if (x.num_snapshots() == 0)
        throw Error(ErrorCode::invalid_scenario, "no snapshots");

    CmaState state{init, gamma, 0};
    EqualizerRunResult result;
    const auto count = static_cast<std::size_t>(std::max<long>(iterations, 0));
    result.modulus_history.reserve(count);
    result.cost_history.reserve(count);
    for (long n = 0; n < iterations; ++n) {
        const CVector xn = x.snapshot(static_cast<std::size_t>(n) % x.num_snapshots());
        const cplx y = cma_output(state, xn);
        result.modulus_history.push_back(std::abs(y));
        result.cost_history.push_back(cma_cost_instant(y));
        state = cma_step(state, xn, Direction::descent);
    }
    result.weights = state.weights;
    if (count > 0) {
        const std::size_t window = (count + 3) / 4;
        real mod = 0.0;
        real cost = 0.0;
        for (std::size_t i = count - window; i < count; ++i) {
            mod += result.modulus_history[i];
            cost += result.cost_history[i];
        }
        result.avg_output_modulus = mod / static_cast<real>(window);
        result.avg_cost = cost / static_cast<real>(window);
    }
    return result;
}

/// Learning curve: iteration, abs_y, cost.
inline void write_cma_learning_csv(std::ostream& os, const std::vector<real>& modulus,
                                   const std::vector<real>& cost)
{
    os << "iteration,abs_y,cost\n";
    char buf[128];
    for (std::size_t i = 0; i < modulus.size(); ++i) {
        const real c = i < cost.size() ? cost[i] : cma_cost_instant(modulus[i]);
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, modulus[i], c);
        os << buf;
    }
}

} // namespace rootcma

#endif // ROOTCMA_CMA_HPP
