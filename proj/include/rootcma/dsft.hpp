#ifndef ROOTCMA_DSFT_HPP
#define ROOTCMA_DSFT_HPP

// Discrete-space Fourier transform of finite weight sequences and the
// closed-form Dirichlet-kernel response of a uniform linear array.

#include <rootcma/array_model.hpp>
#include <rootcma/core.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace rootcma {

/// Distinct angular frequencies of D modes, all in [-pi, pi).
struct ModeSet {
    std::vector<real> mus;

    std::size_t size() const noexcept { return mus.size(); }

    void validate(int num_elements) const
    {
        const auto d = static_cast<int>(mus.size());
        if (d < 1 || d > num_elements - 1)
            throw Error(ErrorCode::invalid_scenario, "mode count must be in [1, M-1]");
        for (std::size_t i = 0; i < mus.size(); ++i) {
            if (!(mus[i] >= -pi && mus[i] < pi))
                throw Error(ErrorCode::invalid_scenario, "mode frequency outside [-pi, pi)");
            for (std::size_t j = 0; j < i; ++j)
                if (mus[i] == mus[j])
                    throw Error(ErrorCode::invalid_scenario, "duplicate mode frequency");
        }
    }
};

/// sum_{m=0}^{M-1} x(m) exp(-i mu m)
inline cplx dsft_eval(const CVector& sequence, real mu)
{
    cplx acc{0.0, 0.0};
    for (std::size_t m = 0; m < sequence.size(); ++m)
        acc += sequence[m] * std::polar(1.0, -mu * static_cast<real>(m));
    return acc;
}

/// Causal Dirichlet kernel: DSFT at mu of the steering vector for mu0.
/// The offset is wrapped into [-pi, pi) first, so the only removable
/// singularity left is at zero offset.
inline cplx dirichlet_response(int num_elements, real mu, real mu0)
{
    const real m = static_cast<real>(num_elements);
    const real delta = wrap_to_pi(mu - mu0);
    const cplx phase = std::polar(1.0, -delta * (m - 1.0) / 2.0);
    if (std::abs(delta) < 1e-9) {
        // sin(M x/2) / sin(x/2) = M (1 - (M^2 - 1) x^2 / 24 + O(x^4))
        return phase * (m * (1.0 - (m * m - 1.0) * delta * delta / 24.0));
    }
    return phase * (std::sin(m * delta / 2.0) / std::sin(delta / 2.0));
}

/// w^H a(mu), equivalently the conjugate of the DSFT of w.
inline cplx beam_response(const CVector& weights, real mu)
{
    return std::conj(dsft_eval(weights, mu));
}

inline cplx sum_mode_response(const ModeSet& modes, int num_elements, real mu)
{
    cplx acc{0.0, 0.0};
    for (real mud : modes.mus)
        acc += dirichlet_response(num_elements, mu, mud);
    return acc;
}

/// sum_d a(mu_d)
inline CVector steering_sum(const ModeSet& modes, int num_elements)
{
    CVector a(static_cast<std::size_t>(num_elements), cplx{0.0, 0.0});
    for (real mud : modes.mus) {
        const auto ad = steering_vector(num_elements, mud);
        for (std::size_t m = 0; m < a.size(); ++m)
            a[m] += ad[m];
    }
    return a;
}

/// ||sum_d a_d||^2 by the explicit double sum over mode pairs.
inline real sum_norm_squared(const ModeSet& modes, int num_elements)
{
    real acc = 0.0;
    for (int m = 0; m < num_elements; ++m)
        for (real mui : modes.mus)
            for (real mud : modes.mus)
                acc += std::cos((mui - mud) * static_cast<real>(m));
    return acc;
}

/// D |A(e^{i mu_i})| / ||a||^2 - 1; zero when the phase relation holds.
inline real impact_factor(const ModeSet& modes, int num_elements, std::size_t i)
{
    if (i >= modes.size())
        throw Error(ErrorCode::domain, "mode index out of range");
    const auto d = static_cast<real>(modes.size());
    const real peak = std::abs(sum_mode_response(modes, num_elements, modes.mus[i]));
    return d * peak / norm_squared(steering_sum(modes, num_elements)) - 1.0;
}

enum class Branch { plus, minus };

struct PhaseRelatedAngles {
    std::vector<real> angles_deg;
    bool dropped_out_of_domain = false;
};

/// arcsin(sin theta_i +- k / ((spacing/wavelength) (M - 1))) for each k.
inline PhaseRelatedAngles phase_related_angles(real theta_i_deg, const ArrayGeometry& geometry,
                                               const std::vector<int>& k_list, Branch branch)
{
    geometry.validate();
    PhaseRelatedAngles out;
    const real step = 1.0 / (geometry.spacing_ratio * static_cast<real>(geometry.num_elements - 1));
    const real sign = branch == Branch::plus ? 1.0 : -1.0;
    const real base = std::sin(deg_to_rad(theta_i_deg));
    for (int k : k_list) {
        const real s = base + sign * static_cast<real>(k) * step;
        if (s < -1.0 || s > 1.0) {
            out.dropped_out_of_domain = true;
            continue;
        }
        out.angles_deg.push_back(rad_to_deg(std::asin(s)));
    }
    if (out.angles_deg.empty())
        throw Error(ErrorCode::domain, "every phase-related angle falls outside the visible region");
    return out;
}

/// Uniform grid over [-pi, pi), endpoint excluded.
inline std::vector<real> uniform_mu_grid(std::size_t points = 1024)
{
    std::vector<real> grid(points);
    for (std::size_t k = 0; k < points; ++k)
        grid[k] = -pi + two_pi * static_cast<real>(k) / static_cast<real>(points);
    return grid;
}

struct BeamResponseGrid {
    std::vector<real> mu_values;
    CVector response;
    CVector weights;
    real spacing_ratio = 0.5;

    static BeamResponseGrid evaluate(const CVector& weights, real spacing_ratio, std::size_t points = 1024)
    {
        BeamResponseGrid g;
        g.mu_values = uniform_mu_grid(points);
        g.weights = weights;
        g.spacing_ratio = spacing_ratio;
        g.response.reserve(points);
        for (real mu : g.mu_values)
            g.response.push_back(beam_response(weights, mu));
        return g;
    }

    /// Columns: mu, theta_deg, re, im, abs. theta_deg is empty where the
    /// frequency lies outside the visible region.
    void write_csv(std::ostream& os) const
    {
        os << "mu,theta_deg,re,im,abs\n";
        char buf[256];
        for (std::size_t k = 0; k < mu_values.size(); ++k) {
            const real s = mu_values[k] / (two_pi * spacing_ratio);
            std::string theta;
            if (s >= -1.0 && s <= 1.0) {
                std::snprintf(buf, sizeof buf, "%.10g", rad_to_deg(std::asin(s)));
                theta = buf;
            }
            std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g\n", mu_values[k], theta.c_str(),
                          response[k].real(), response[k].imag(), std::abs(response[k]));
            os << buf;
        }
    }
};

} // namespace rootcma

#endif // ROOTCMA_DSFT_HPP
