#ifndef ROOTCMA_ROOT_DOA_HPP
#define ROOTCMA_ROOT_DOA_HPP

// Weight vector -> root polynomial -> roots -> model order and directions of
// arrival -> reconstructed response matrix and pseudoinverse steering weights.

#include <rootcma/array_model.hpp>
#include <rootcma/core.hpp>
#include <rootcma/dsft.hpp>
#include <rootcma/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

namespace rootcma {

/// P(z) = sum_m conj(v_m) z^m - C, normalized by conj(v_{M-1}).
inline RootPolynomial build_polynomial(const CVector& v, real c_constant)
{
    if (v.size() < 2)
        throw Error(ErrorCode::degenerate_polynomial, "weight vector must have at least two entries");
    const cplx lead = std::conj(v.back());
    if (std::abs(lead) <= 1e-12)
        throw Error(ErrorCode::degenerate_polynomial, "leading coefficient vanishes; deflate the degree");
    RootPolynomial p;
    p.c_constant = c_constant;
    p.coefficients.resize(v.size());
    for (std::size_t m = 0; m < v.size(); ++m)
        p.coefficients[m] = std::conj(v[m]);
    p.coefficients[0] -= c_constant;
    for (auto& c : p.coefficients)
        c /= lead;
    p.coefficients.back() = 1.0;
    return p;
}

struct RootSet {
    CVector roots;
    std::vector<real> unit_distance; // |z| - 1
    std::vector<real> beam_score;    // Re b(arg z); filled by select_roots
    std::vector<bool> selected;

    std::size_t size() const noexcept { return roots.size(); }

    int model_order() const noexcept
    {
        return static_cast<int>(std::count(selected.begin(), selected.end(), true));
    }

    CVector selected_roots() const
    {
        CVector out;
        for (std::size_t i = 0; i < roots.size(); ++i)
            if (selected[i])
                out.push_back(roots[i]);
        return out;
    }

    /// Columns: re, im, abs_minus_1, beam_score, selected.
    void write_csv(std::ostream& os) const
    {
        os << "re,im,abs_minus_1,beam_score,selected\n";
        char buf[192];
        for (std::size_t i = 0; i < roots.size(); ++i) {
            const real score = i < beam_score.size() ? beam_score[i] : std::nan("");
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n", roots[i].real(), roots[i].imag(),
                          unit_distance[i], score, selected[i] ? 1 : 0);
            os << buf;
        }
    }

    /// Columns: index, abs_minus_1.
    void write_deviation_csv(std::ostream& os) const
    {
        os << "index,abs_minus_1\n";
        char buf[96];
        for (std::size_t i = 0; i < roots.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, unit_distance[i]);
            os << buf;
        }
    }
};

enum class RootBackend { simultaneous, companion };

inline RootSet make_root_set(CVector roots)
{
    RootSet rs;
    rs.roots = std::move(roots);
    for (const auto& z : rs.roots)
        rs.unit_distance.push_back(std::abs(z) - 1.0);
    rs.selected.assign(rs.roots.size(), false);
    return rs;
}

inline RootSet find_roots(const RootPolynomial& p, RootBackend backend = RootBackend::simultaneous)
{
    CVector roots = backend == RootBackend::simultaneous ? simultaneous_roots(p) : companion_eigenvalues(p);
    return make_root_set(std::move(roots));
}

/// Relative coefficient error of prod (z - z_m) against a monic p.
inline real reconstruction_error(const RootPolynomial& p, const CVector& roots)
{
    const auto expanded = expand_roots(roots);
    if (expanded.size() != p.coefficients.size())
        throw Error(ErrorCode::dimension_mismatch, "root count does not match degree");
    real diff = 0.0;
    for (std::size_t i = 0; i < expanded.size(); ++i)
        diff += std::norm(expanded[i] - p.coefficients[i]);
    return std::sqrt(diff) / norm2(p.coefficients);
}

/// Closed-form roots of z^2 - v1 z + q0 for two unit-circle modes, with
/// Re(q0) = (Re^2 v1 - Im^2 v1) / |v1|^2 and Im(q0) = sin(arccos Re(q0)).
/// Im(q0) is taken non-negative, which covers mu1 + mu2 in [0, pi].
inline std::pair<cplx, cplx> analytic_roots_two_sources(cplx v1)
{
    const real mag2 = std::norm(v1);
    if (!(mag2 > 1e-24))
        throw Error(ErrorCode::degenerate_polynomial, "v1 vanishes (antipodal modes)");
    const cplx q1 = -v1;
    const real re_q0 = std::clamp((v1.real() * v1.real() - v1.imag() * v1.imag()) / mag2, -1.0, 1.0);
    const real im_q0 = std::sin(std::acos(re_q0));
    const cplx q0{re_q0, im_q0};
    const cplx disc = std::sqrt(q1 * q1 / 4.0 - q0);
    return {-q1 / 2.0 + disc, -q1 / 2.0 - disc};
}

enum class SelectionMode { unit_distance, beam_response };

inline constexpr real default_beam_threshold = 0.5;
inline constexpr real default_unit_distance_threshold = 1e-3;

/// Marks signal roots. unit_distance: ||z| - 1| < threshold. beam_response:
/// Re(w^H a(arg z)) above threshold * (largest score).
inline RootSet select_roots(RootSet rs, const CVector& weights, SelectionMode mode, real threshold)
{
    rs.beam_score.clear();
    for (const auto& z : rs.roots)
        rs.beam_score.push_back(beam_response(weights, std::arg(z)).real());
    rs.selected.assign(rs.roots.size(), false);

    if (mode == SelectionMode::unit_distance) {
        for (std::size_t i = 0; i < rs.roots.size(); ++i)
            rs.selected[i] = std::abs(rs.unit_distance[i]) < threshold;
    } else {
        std::vector<std::size_t> order(rs.roots.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return rs.beam_score[a] > rs.beam_score[b]; });
        if (!order.empty() && rs.beam_score[order.front()] > 0.0) {
            const real cut = threshold * rs.beam_score[order.front()];
            for (std::size_t idx : order) {
                if (!(rs.beam_score[idx] > cut))
                    break;
                rs.selected[idx] = true;
            }
        }
    }
    if (rs.model_order() == 0)
        throw Error(ErrorCode::empty_model, "no roots selected");
    return rs;
}

struct DoaResult {
    std::vector<real> angles_deg;
    std::vector<std::size_t> root_index;   // source root for each angle
    std::vector<std::size_t> invisible;    // selected roots outside the visible region
};

/// theta = arcsin(arg z / (2 pi spacing_ratio)) for each selected root.
inline DoaResult doa_from_roots(const RootSet& rs, const ArrayGeometry& geometry)
{
    geometry.validate();
    DoaResult out;
    bool any = false;
    for (std::size_t i = 0; i < rs.roots.size(); ++i) {
        if (!rs.selected[i])
            continue;
        any = true;
        const real ratio = std::arg(rs.roots[i]) / (two_pi * geometry.spacing_ratio);
        if (ratio < -1.0 || ratio > 1.0) {
            out.invisible.push_back(i);
            continue;
        }
        out.angles_deg.push_back(rad_to_deg(std::asin(ratio)));
        out.root_index.push_back(i);
    }
    if (!any)
        throw Error(ErrorCode::empty_model, "no roots selected");
    if (out.angles_deg.empty())
        throw Error(ErrorCode::no_valid_angle, "every selected root lies outside the visible region");
    return out;
}

struct DoaEstimate {
    std::vector<real> angles_deg;
    int model_order = 0;
    ComplexMatrix response_matrix;  // M x D steering vectors
    ComplexMatrix steering_weights; // W = A (A^H A)^{-1}, so W^H A = I
};

inline constexpr real merge_angle_deg = 0.1;

/// Merges angles closer than 0.1 degrees (keeping the first), rebuilds A and
/// forms the pseudoinverse steering weights.
inline DoaEstimate reconstruct_and_precondition(const std::vector<real>& angles_deg, const ArrayGeometry& geometry)
{
    geometry.validate();
    std::vector<real> kept;
    for (real a : angles_deg) {
        const bool close = std::any_of(kept.begin(), kept.end(),
                                       [&](real k) { return std::abs(k - a) < merge_angle_deg; });
        if (!close)
            kept.push_back(a);
    }
    if (kept.empty())
        throw Error(ErrorCode::empty_model, "no angles to reconstruct");
    if (kept.size() > static_cast<std::size_t>(geometry.num_elements))
        throw Error(ErrorCode::ill_conditioned, "more directions than array elements");

    DoaEstimate est;
    est.angles_deg = kept;
    est.model_order = static_cast<int>(kept.size());
    est.response_matrix = steering_matrix(geometry, kept);
    const ComplexMatrix gram = est.response_matrix.adjoint() * est.response_matrix;
    if (!(hpd_condition(gram) <= 1e12))
        throw Error(ErrorCode::ill_conditioned, "reconstructed response matrix is rank-deficient");
    est.steering_weights = est.response_matrix * hpd_inverse(gram);
    return est;
}

} // namespace rootcma

#endif // ROOTCMA_ROOT_DOA_HPP
