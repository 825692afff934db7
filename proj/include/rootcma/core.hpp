#ifndef ROOTCMA_CORE_HPP
#define ROOTCMA_CORE_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rootcma {

using real = double;
using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr real pi = std::numbers::pi;
inline constexpr real two_pi = 2.0 * std::numbers::pi;

enum class ErrorCode {
    domain,              // argument outside its mathematical domain
    invalid_scenario,    // scenario / mode-set invariant violated
    dimension_mismatch,
    diverged,            // adaptive filter produced a non-finite or runaway state
    not_positive_definite,
    ill_conditioned,     // condition estimate above the configured guard
    degenerate_polynomial,
    numeric_failure,     // iteration cap exceeded
    empty_model,         // no roots selected
    no_valid_angle,      // every root outside the visible region
    undefined_bound,     // step bound requested for a zero snapshot
    config,              // configuration parse / validation problem
    stage_not_run,
};

inline const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::invalid_scenario: return "invalid_scenario";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::diverged: return "diverged";
    case ErrorCode::not_positive_definite: return "not_positive_definite";
    case ErrorCode::ill_conditioned: return "ill_conditioned";
    case ErrorCode::degenerate_polynomial: return "degenerate_polynomial";
    case ErrorCode::numeric_failure: return "numeric_failure";
    case ErrorCode::empty_model: return "empty_model";
    case ErrorCode::no_valid_angle: return "no_valid_angle";
    case ErrorCode::undefined_bound: return "undefined_bound";
    case ErrorCode::config: return "config";
    case ErrorCode::stage_not_run: return "stage_not_run";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by the adaptive filters. Carries the last weight vector that was
/// still finite so callers can inspect or restart from it.
class DivergedError : public Error {
public:
    DivergedError(const std::string& what, CVector last_finite, long iteration)
        : Error(ErrorCode::diverged, what), last_finite_(std::move(last_finite)), iteration_(iteration)
    {
    }

    const CVector& last_finite_weights() const noexcept { return last_finite_; }
    long iteration() const noexcept { return iteration_; }

private:
    CVector last_finite_;
    long iteration_;
};

inline real deg_to_rad(real deg) noexcept { return deg * (pi / 180.0); }
inline real rad_to_deg(real rad) noexcept { return rad * (180.0 / pi); }

/// Wraps an angle into [-pi, pi).
inline real wrap_to_pi(real mu) noexcept
{
    real w = std::fmod(mu + pi, two_pi);
    if (w < 0.0)
        w += two_pi;
    return w - pi;
}

inline bool all_finite(const CVector& v) noexcept
{
    for (const auto& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            return false;
    return true;
}

inline real norm_squared(const CVector& v) noexcept
{
    real acc = 0.0;
    for (const auto& z : v)
        acc += std::norm(z);
    return acc;
}

inline real norm2(const CVector& v) noexcept { return std::sqrt(norm_squared(v)); }

/// a^H b
inline cplx inner(const CVector& a, const CVector& b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::dimension_mismatch, "inner product of vectors with different lengths");
    cplx acc{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += std::conj(a[i]) * b[i];
    return acc;
}

} // namespace rootcma

#endif // ROOTCMA_CORE_HPP
