#ifndef ROOTCMA_ARRAY_MODEL_HPP
#define ROOTCMA_ARRAY_MODEL_HPP

// Uniform linear array measurement model X = A diag(c) S^H + N with
// unit-modulus QPSK sources and circular complex Gaussian noise. The first
// element is the phase reference.

#include <rootcma/core.hpp>
#include <rootcma/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace rootcma {

struct ArrayGeometry {
    int num_elements = 8;
    real spacing_ratio = 0.5; // element spacing over wavelength

    void validate() const
    {
        if (num_elements < 2)
            throw Error(ErrorCode::invalid_scenario, "num_elements must be at least 2");
        if (!std::isfinite(spacing_ratio) || spacing_ratio <= 0.0)
            throw Error(ErrorCode::invalid_scenario, "spacing_ratio must be finite and positive");
    }
};

struct SourceConfig {
    real angle_deg = 0.0;
    real amplitude = 1.0;
};

struct Scenario {
    ArrayGeometry geometry;
    std::vector<SourceConfig> sources;
    real snr_db = std::numeric_limits<real>::infinity(); // +inf disables noise
    int num_snapshots = 8000;
    std::uint64_t seed = 1;

    bool noise_free() const noexcept { return std::isinf(snr_db) && snr_db > 0.0; }
    int num_sources() const noexcept { return static_cast<int>(sources.size()); }

    std::vector<real> angles_deg() const
    {
        std::vector<real> out;
        out.reserve(sources.size());
        for (const auto& s : sources)
            out.push_back(s.angle_deg);
        return out;
    }

    real max_amplitude() const noexcept
    {
        real best = 0.0;
        for (const auto& s : sources)
            best = std::max(best, s.amplitude);
        return best;
    }

    /// Noise variance per element, referenced to the strongest source.
    real noise_variance() const noexcept
    {
        if (noise_free())
            return 0.0;
        const real cmax = max_amplitude();
        return cmax * cmax / std::pow(10.0, snr_db / 10.0);
    }

    void validate() const
    {
        geometry.validate();
        const int d = num_sources();
        if (d < 1 || d > geometry.num_elements - 1)
            throw Error(ErrorCode::invalid_scenario,
                        "number of sources must be in [1, M-1], got " + std::to_string(d));
        for (std::size_t i = 0; i < sources.size(); ++i) {
            const auto& s = sources[i];
            if (!(std::abs(s.angle_deg) < 90.0))
                throw Error(ErrorCode::invalid_scenario,
                            "source " + std::to_string(i) + " angle must lie in (-90, 90) degrees");
            if (!(s.amplitude > 0.0) || !std::isfinite(s.amplitude))
                throw Error(ErrorCode::invalid_scenario,
                            "source " + std::to_string(i) + " amplitude must be positive");
            for (std::size_t j = 0; j < i; ++j)
                if (sources[j].angle_deg == s.angle_deg)
                    throw Error(ErrorCode::invalid_scenario,
                                "duplicate source angle " + std::to_string(s.angle_deg));
        }
        if (num_snapshots < 10 * geometry.num_elements)
            throw Error(ErrorCode::invalid_scenario, "num_snapshots must be at least 10*M");
        if (std::isnan(snr_db) || (std::isinf(snr_db) && snr_db < 0.0))
            throw Error(ErrorCode::invalid_scenario, "snr_db must be a number or +inf");
    }
};

/// M x N measurements plus the scenario that produced them.
struct SnapshotMatrix {
    ComplexMatrix entries;
    Scenario scenario;

    std::size_t num_elements() const noexcept { return entries.rows(); }
    std::size_t num_snapshots() const noexcept { return entries.cols(); }
    CVector snapshot(std::size_t n) const { return entries.column(n); }
};

/// N x D unit-modulus source symbols.
struct SignalMatrix {
    ComplexMatrix entries;
};

/// Normalized spatial frequency (spacing/wavelength) * sin(theta).
inline real spatial_frequency(const ArrayGeometry& geometry, real angle_deg)
{
    if (!(std::abs(angle_deg) < 90.0))
        throw Error(ErrorCode::domain, "angle must lie in (-90, 90) degrees");
    return geometry.spacing_ratio * std::sin(deg_to_rad(angle_deg));
}

inline real angular_frequency(const ArrayGeometry& geometry, real angle_deg)
{
    return two_pi * spatial_frequency(geometry, angle_deg);
}

/// a_m = exp(i mu m), m = 0..M-1.
inline CVector steering_vector(int num_elements, real mu)
{
    CVector a(static_cast<std::size_t>(num_elements));
    for (int m = 0; m < num_elements; ++m)
        a[m] = std::polar(1.0, mu * m);
    return a;
}

inline CVector steering_vector(const ArrayGeometry& geometry, real mu)
{
    return steering_vector(geometry.num_elements, mu);
}

inline ComplexMatrix steering_matrix(const ArrayGeometry& geometry, const std::vector<real>& angles_deg)
{
    for (std::size_t i = 0; i < angles_deg.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (angles_deg[i] == angles_deg[j])
                throw Error(ErrorCode::invalid_scenario, "duplicate steering angles");
    ComplexMatrix a(static_cast<std::size_t>(geometry.num_elements), angles_deg.size());
    for (std::size_t d = 0; d < angles_deg.size(); ++d)
        a.set_column(d, steering_vector(geometry, angular_frequency(geometry, angles_deg[d])));
    return a;
}

/// Independent RNG stream for (seed, trial, purpose).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

/// i.i.d. QPSK symbols (+-1 +-i)/sqrt(2), two raw engine bits per symbol.
inline SignalMatrix generate_cm_signals(int num_sources, int num_snapshots, std::mt19937_64& rng)
{
    if (num_snapshots < 1 || num_sources < 1)
        throw Error(ErrorCode::invalid_scenario, "signal matrix needs N >= 1 and D >= 1");
    const real h = 1.0 / std::sqrt(2.0);
    SignalMatrix s{ComplexMatrix(static_cast<std::size_t>(num_snapshots), static_cast<std::size_t>(num_sources))};
    for (int n = 0; n < num_snapshots; ++n)
        for (int d = 0; d < num_sources; ++d) {
            const std::uint64_t bits = rng();
            const real re = (bits >> 63) ? h : -h;
            const real im = ((bits >> 62) & 1u) ? h : -h;
            s.entries(n, d) = cplx{re, im};
        }
    return s;
}

inline SignalMatrix generate_cm_signals(int num_sources, int num_snapshots, std::uint64_t seed)
{
    auto rng = make_stream(seed, 0, 0);
    return generate_cm_signals(num_sources, num_snapshots, rng);
}

/// X = A diag(c) S^H (no noise).
inline ComplexMatrix mix_sources(const ComplexMatrix& steering, const std::vector<real>& amplitudes,
                                 const SignalMatrix& signals)
{
    const std::size_t m = steering.rows();
    const std::size_t d = steering.cols();
    const std::size_t n = signals.entries.rows();
    if (amplitudes.size() != d || signals.entries.cols() != d)
        throw Error(ErrorCode::dimension_mismatch, "steering, amplitudes and signals disagree on D");
    ComplexMatrix x(m, n);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t t = 0; t < n; ++t) {
            const cplx sym = amplitudes[k] * std::conj(signals.entries(t, k));
            for (std::size_t r = 0; r < m; ++r)
                x(r, t) += steering(r, k) * sym;
        }
    return x;
}

struct SynthesisResult {
    SnapshotMatrix snapshots;
    SignalMatrix signals;
    ComplexMatrix steering;
};

/// Full synthesis keeping the ground truth alongside the measurements.
inline SynthesisResult synthesize_with_truth(const Scenario& scenario, std::uint64_t trial = 0)
{
    scenario.validate();
    auto sig_rng = make_stream(scenario.seed, trial, 0);
    auto noise_rng = make_stream(scenario.seed, trial, 1);

    auto signals = generate_cm_signals(scenario.num_sources(), scenario.num_snapshots, sig_rng);
    auto a = steering_matrix(scenario.geometry, scenario.angles_deg());
    std::vector<real> amps;
    for (const auto& s : scenario.sources)
        amps.push_back(s.amplitude);
    auto x = mix_sources(a, amps, signals);

    if (!scenario.noise_free()) {
        const real sd = std::sqrt(scenario.noise_variance() / 2.0);
        std::normal_distribution<real> gauss(0.0, sd);
        for (std::size_t t = 0; t < x.cols(); ++t)
            for (std::size_t r = 0; r < x.rows(); ++r) {
                const real re = gauss(noise_rng);
                const real im = gauss(noise_rng);
                x(r, t) += cplx{re, im};
            }
    }
    return {SnapshotMatrix{std::move(x), scenario}, std::move(signals), std::move(a)};
}

inline SnapshotMatrix synthesize(const Scenario& scenario, std::uint64_t trial = 0)
{
    return synthesize_with_truth(scenario, trial).snapshots;
}

} // namespace rootcma

#endif // ROOTCMA_ARRAY_MODEL_HPP
