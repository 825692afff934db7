#ifndef ROOTCMA_NUMERICS_HPP
#define ROOTCMA_NUMERICS_HPP

// Small dense complex numerics: Hermitian positive-definite solves, condition
// estimation, and two independent polynomial root finders (companion-matrix
// eigenvalues and Aberth-Ehrlich simultaneous iteration). Sizes are tiny
// (at most 16x16), so everything is plain O(n^3) code.

#include <rootcma/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace rootcma {

class ComplexMatrix {
public:
    ComplexMatrix() = default;

    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0})
    {
    }

    static ComplexMatrix identity(std::size_t n)
    {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const std::vector<cplx>& data() const noexcept { return data_; }

    cplx& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    CVector column(std::size_t c) const
    {
        CVector out(rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            out[r] = (*this)(r, c);
        return out;
    }

    void set_column(std::size_t c, const CVector& v)
    {
        if (v.size() != rows_)
            throw Error(ErrorCode::dimension_mismatch, "column length does not match matrix rows");
        for (std::size_t r = 0; r < rows_; ++r)
            (*this)(r, c) = v[r];
    }

    ComplexMatrix adjoint() const
    {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c)
                out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b)
    {
        if (a.cols_ != b.rows_)
            throw Error(ErrorCode::dimension_mismatch, "matrix product with incompatible shapes");
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                for (std::size_t j = 0; j < b.cols_; ++j)
                    out(i, j) += aik * b(k, j);
            }
        return out;
    }

    friend CVector operator*(const ComplexMatrix& a, const CVector& x)
    {
        if (a.cols_ != x.size())
            throw Error(ErrorCode::dimension_mismatch, "matrix-vector product with incompatible shapes");
        CVector out(a.rows_, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k)
                out[i] += a(i, k) * x[k];
        return out;
    }

    /// Induced 1-norm (maximum absolute column sum).
    real norm1() const noexcept
    {
        real best = 0.0;
        for (std::size_t c = 0; c < cols_; ++c) {
            real s = 0.0;
            for (std::size_t r = 0; r < rows_; ++r)
                s += std::abs((*this)(r, c));
            best = std::max(best, s);
        }
        return best;
    }

    real max_abs() const noexcept
    {
        real best = 0.0;
        for (const auto& z : data_)
            best = std::max(best, std::abs(z));
        return best;
    }

    /// Largest |G(i,j) - conj(G(j,i))|.
    real hermitian_defect() const noexcept
    {
        if (rows_ != cols_)
            return std::numeric_limits<real>::infinity();
        real worst = 0.0;
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = i; j < cols_; ++j)
                worst = std::max(worst, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
        return worst;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

// ---------------------------------------------------------------------------
// Hermitian positive-definite systems

namespace detail {

inline void require_hermitian(const ComplexMatrix& g)
{
    if (g.rows() != g.cols() || g.rows() == 0)
        throw Error(ErrorCode::dimension_mismatch, "expected a non-empty square matrix");
    if (g.hermitian_defect() > 1e-10 * std::max<real>(1.0, g.max_abs()))
        throw Error(ErrorCode::not_positive_definite, "matrix is not Hermitian");
}

// Lower-triangular L with G = L L^H.
inline ComplexMatrix cholesky(const ComplexMatrix& g)
{
    require_hermitian(g);
    const std::size_t n = g.rows();
    ComplexMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        real diag = g(j, j).real();
        for (std::size_t k = 0; k < j; ++k)
            diag -= std::norm(l(j, k));
        if (!(diag > 0.0))
            throw Error(ErrorCode::not_positive_definite,
                        "non-positive pivot at column " + std::to_string(j));
        const real ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = g(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    return l;
}

inline CVector cholesky_solve(const ComplexMatrix& l, const CVector& b)
{
    const std::size_t n = l.rows();
    if (b.size() != n)
        throw Error(ErrorCode::dimension_mismatch, "right-hand side length does not match system");
    CVector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    CVector x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        cplx s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k)
            s -= std::conj(l(k, ii)) * x[k];
        x[ii] = s / l(ii, ii).real();
    }
    return x;
}

} // namespace detail

/// Solves G x = b for Hermitian positive-definite G via Cholesky.
inline CVector hpd_solve(const ComplexMatrix& g, const CVector& b)
{
    return detail::cholesky_solve(detail::cholesky(g), b);
}

inline ComplexMatrix hpd_inverse(const ComplexMatrix& g)
{
    const auto l = detail::cholesky(g);
    const std::size_t n = g.rows();
    ComplexMatrix inv(n, n);
    CVector e(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::fill(e.begin(), e.end(), cplx{0.0, 0.0});
        e[c] = 1.0;
        inv.set_column(c, detail::cholesky_solve(l, e));
    }
    return inv;
}

/// 1-norm condition number of an HPD matrix, computed from the explicit
/// inverse. Returns +inf when G is not positive definite.
inline real hpd_condition(const ComplexMatrix& g)
{
    try {
        return g.norm1() * hpd_inverse(g).norm1();
    } catch (const Error& err) {
        if (err.code() == ErrorCode::not_positive_definite)
            return std::numeric_limits<real>::infinity();
        throw;
    }
}

struct HermitianEigen {
    std::vector<real> values; // ascending
    ComplexMatrix vectors;    // columns, matching `values`
};

/// Cyclic Jacobi for a Hermitian matrix. Each rotation first removes the
/// phase of the pivot, then applies the real symmetric rotation.
inline HermitianEigen hermitian_eigen(const ComplexMatrix& g, int max_sweeps = 60)
{
    detail::require_hermitian(g);
    const std::size_t n = g.rows();
    ComplexMatrix a = g;
    ComplexMatrix v = ComplexMatrix::identity(n);
    real total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            total += std::norm(a(i, j));

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        real off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                off += std::norm(a(i, j));
        if (off <= 1e-32 * total)
            break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const real mag = std::abs(a(p, q));
                if (mag == 0.0)
                    continue;
                const cplx ph = a(p, q) / mag;
                const real tau = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
                const real t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const real c = 1.0 / std::sqrt(1.0 + t * t);
                const real s = t * c;
                // U restricted to (p, q): [[c, s], [-s conj(ph), c conj(ph)]]
                const cplx upp = c, upq = s, uqp = -s * std::conj(ph), uqq = c * std::conj(ph);
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * upp + akq * uqp;
                    a(k, q) = akp * upq + akq * uqq;
                    const cplx vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp * upp + vkq * uqp;
                    v(k, q) = vkp * upq + vkq * uqq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx apk = a(p, k), aqk = a(q, k);
                    a(p, k) = std::conj(upp) * apk + std::conj(uqp) * aqk;
                    a(q, k) = std::conj(upq) * apk + std::conj(uqq) * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });
    HermitianEigen out{std::vector<real>(n), ComplexMatrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]).real();
        for (std::size_t i = 0; i < n; ++i)
            out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

/// Minimum-norm solution of G x = b for Hermitian positive semi-definite G.
/// Eigenvalues below rcond * max eigenvalue are treated as zero.
inline CVector psd_pinv_solve(const ComplexMatrix& g, const CVector& b, real rcond = 1e-12)
{
    if (b.size() != g.rows())
        throw Error(ErrorCode::dimension_mismatch, "right-hand side length does not match system");
    const auto eig = hermitian_eigen(g);
    const real top = eig.values.empty() ? 0.0 : eig.values.back();
    if (!(top > 0.0))
        throw Error(ErrorCode::ill_conditioned, "rank-deficient: matrix has no positive eigenvalue");
    CVector x(b.size(), cplx{0.0, 0.0});
    for (std::size_t k = 0; k < eig.values.size(); ++k) {
        if (eig.values[k] <= rcond * top)
            continue;
        cplx proj{0.0, 0.0};
        for (std::size_t i = 0; i < b.size(); ++i)
            proj += std::conj(eig.vectors(i, k)) * b[i];
        proj /= eig.values[k];
        for (std::size_t i = 0; i < b.size(); ++i)
            x[i] += eig.vectors(i, k) * proj;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Polynomials

/// Polynomial with ascending coefficients (constant term first). After
/// normalization the leading coefficient is 1. `c_constant` records the
/// target that was subtracted from the constant term when the polynomial was
/// built from a weight vector.
struct RootPolynomial {
    CVector coefficients;
    real c_constant = 0.0;

    std::size_t degree() const noexcept { return coefficients.empty() ? 0 : coefficients.size() - 1; }

    cplx operator()(cplx z) const noexcept
    {
        cplx acc{0.0, 0.0};
        for (std::size_t i = coefficients.size(); i-- > 0;)
            acc = acc * z + coefficients[i];
        return acc;
    }

    bool is_monic(real tol = 1e-14) const noexcept
    {
        return !coefficients.empty() && std::abs(coefficients.back() - cplx{1.0, 0.0}) <= tol;
    }
};

/// Expands prod (z - r_m) into ascending monic coefficients.
inline CVector expand_roots(const CVector& roots)
{
    CVector c{cplx{1.0, 0.0}};
    for (const auto& r : roots) {
        CVector next(c.size() + 1, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    return c;
}

/// Greedy nearest-neighbour pairing of two root sets; returns the largest
/// distance among the matched pairs.
inline real pairing_distance(const CVector& a, const CVector& b)
{
    if (a.size() != b.size())
        throw Error(ErrorCode::dimension_mismatch, "root sets differ in size");
    std::vector<bool> used_a(a.size(), false);
    std::vector<bool> used_b(b.size(), false);
    real worst = 0.0;
    for (std::size_t round = 0; round < a.size(); ++round) {
        real best = std::numeric_limits<real>::infinity();
        std::size_t bi = 0;
        std::size_t bj = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (used_a[i])
                continue;
            for (std::size_t j = 0; j < b.size(); ++j) {
                if (used_b[j])
                    continue;
                const real d = std::abs(a[i] - b[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        used_a[bi] = true;
        used_b[bj] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

class RootFindError : public Error {
public:
    RootFindError(const std::string& what, CVector partial)
        : Error(ErrorCode::numeric_failure, what), partial_(std::move(partial))
    {
    }

    const CVector& partial_roots() const noexcept { return partial_; }

private:
    CVector partial_;
};

namespace detail {

inline void require_monic(const RootPolynomial& p)
{
    if (p.degree() < 1)
        throw Error(ErrorCode::degenerate_polynomial, "polynomial degree must be at least 1");
    if (!p.is_monic(1e-12))
        throw Error(ErrorCode::degenerate_polynomial, "polynomial must be monic");
    if (!all_finite(p.coefficients))
        throw Error(ErrorCode::domain, "polynomial has non-finite coefficients");
}

// Parlett-Reinsch balancing with radix-2 scaling; preserves eigenvalues exactly.
inline void balance(ComplexMatrix& a)
{
    const std::size_t n = a.rows();
    constexpr real radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            real r = 0.0;
            real c = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0)
                continue;
            real g = r / radix;
            real f = 1.0;
            const real s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                for (std::size_t j = 0; j < n; ++j)
                    a(i, j) /= f;
                for (std::size_t j = 0; j < n; ++j)
                    a(j, i) *= f;
            }
        }
    }
}

// Eigenvalues of an upper Hessenberg matrix by single-shift complex QR with
// Wilkinson shifts and deflation.
inline CVector hessenberg_eigenvalues(ComplexMatrix h, int max_iterations_per_eigenvalue = 60)
{
    const std::size_t n = h.rows();
    CVector eig(n);
    constexpr real eps = std::numeric_limits<real>::epsilon();
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(n) - 1;
    int iter = 0;
    std::vector<real> cs(n);
    std::vector<cplx> sn(n);

    while (hi >= 0) {
        if (hi == 0) {
            eig[0] = h(0, 0);
            break;
        }
        std::ptrdiff_t lo = hi;
        while (lo > 0) {
            const real scale = std::abs(h(lo - 1, lo - 1)) + std::abs(h(lo, lo));
            if (std::abs(h(lo, lo - 1)) <= eps * (scale == 0.0 ? 1.0 : scale))
                break;
            --lo;
        }
        if (lo > 0)
            h(lo, lo - 1) = 0.0;
        if (lo == hi) {
            eig[hi] = h(hi, hi);
            --hi;
            iter = 0;
            continue;
        }
        if (++iter > max_iterations_per_eigenvalue) {
            CVector partial(eig.begin() + hi + 1, eig.end());
            throw RootFindError("companion QR iteration did not converge", partial);
        }

        cplx shift;
        if (iter % 11 == 0) {
            // exceptional shift to break cycles
            shift = h(hi, hi) + cplx{0.75 * std::abs(h(hi, hi - 1)), 0.4375 * std::abs(h(hi, hi - 1))};
        } else {
            const cplx a = h(hi - 1, hi - 1);
            const cplx b = h(hi - 1, hi);
            const cplx c = h(hi, hi - 1);
            const cplx d = h(hi, hi);
            const cplx half = 0.5 * (a - d);
            const cplx disc = std::sqrt(half * half + b * c);
            const cplx l1 = 0.5 * (a + d) + disc;
            const cplx l2 = 0.5 * (a + d) - disc;
            shift = std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
        }

        for (std::ptrdiff_t k = lo; k <= hi; ++k)
            h(k, k) -= shift;
        for (std::ptrdiff_t k = lo; k < hi; ++k) {
            const cplx a = h(k, k);
            const cplx b = h(k + 1, k);
            const real r = std::hypot(std::abs(a), std::abs(b));
            real c = 0.0;
            cplx s{1.0, 0.0};
            if (r != 0.0 && std::abs(a) != 0.0) {
                c = std::abs(a) / r;
                s = (a / std::abs(a)) * std::conj(b) / r;
            }
            cs[k] = c;
            sn[k] = s;
            for (std::ptrdiff_t j = k; j <= hi; ++j) {
                const cplx top = h(k, j);
                const cplx bot = h(k + 1, j);
                h(k, j) = c * top + s * bot;
                h(k + 1, j) = -std::conj(s) * top + c * bot;
            }
        }
        for (std::ptrdiff_t k = lo; k < hi; ++k) {
            const real c = cs[k];
            const cplx s = sn[k];
            const std::ptrdiff_t last = std::min(k + 2, hi);
            for (std::ptrdiff_t i = lo; i <= last; ++i) {
                const cplx left = h(i, k);
                const cplx right = h(i, k + 1);
                h(i, k) = c * left + std::conj(s) * right;
                h(i, k + 1) = -s * left + c * right;
            }
        }
        for (std::ptrdiff_t k = lo; k <= hi; ++k)
            h(k, k) += shift;
    }
    return eig;
}

} // namespace detail

/// Companion matrix of a monic polynomial: first row holds the negated
/// coefficients in descending order (c_{n-1} ... c_0), ones on the
/// subdiagonal.
inline ComplexMatrix companion_matrix(const RootPolynomial& p)
{
    detail::require_monic(p);
    const std::size_t n = p.degree();
    ComplexMatrix c(n, n);
    for (std::size_t j = 0; j < n; ++j)
        c(0, j) = -p.coefficients[n - 1 - j];
    for (std::size_t i = 1; i < n; ++i)
        c(i, i - 1) = 1.0;
    return c;
}

inline CVector companion_eigenvalues(const RootPolynomial& p)
{
    auto c = companion_matrix(p);
    if (c.rows() == 1)
        return {c(0, 0)};
    detail::balance(c);
    return detail::hessenberg_eigenvalues(std::move(c));
}

struct AberthOptions {
    real tolerance = 1e-12;
    int max_sweeps = 200;
};

/// Aberth-Ehrlich simultaneous iteration. Initial guesses sit on a circle
/// whose radius is the Fujiwara bound, rotated off the real axis.
inline CVector simultaneous_roots(const RootPolynomial& p, const AberthOptions& opt = {})
{
    detail::require_monic(p);
    const std::size_t n = p.degree();
    const auto& a = p.coefficients;
    if (n == 1)
        return {-a[0]};

    real radius = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        real mag = std::abs(a[n - k]);
        if (k == n)
            mag *= 0.5;
        radius = std::max(radius, std::pow(mag, 1.0 / static_cast<real>(k)));
    }
    radius = 2.0 * radius;
    if (radius == 0.0)
        return CVector(n, cplx{0.0, 0.0});

    CVector z(n);
    for (std::size_t k = 0; k < n; ++k) {
        const real phase = two_pi * static_cast<real>(k) / static_cast<real>(n) + 0.4;
        z[k] = std::polar(radius, phase);
    }

    std::vector<real> abs_coeff(n + 1);
    for (std::size_t i = 0; i <= n; ++i)
        abs_coeff[i] = std::abs(a[i]);

    constexpr real eps = std::numeric_limits<real>::epsilon();
    std::vector<bool> done(n, false);
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        bool all_done = true;
        for (std::size_t k = 0; k < n; ++k) {
            if (done[k])
                continue;
            cplx val = a[n];
            cplx der{0.0, 0.0};
            real bound = abs_coeff[n];
            const real az = std::abs(z[k]);
            for (std::size_t i = n; i-- > 0;) {
                der = der * z[k] + val;
                val = val * z[k] + a[i];
                bound = bound * az + abs_coeff[i];
            }
            if (std::abs(val) <= 4.0 * static_cast<real>(n) * eps * bound) {
                done[k] = true;
                continue;
            }
            cplx repulsion{0.0, 0.0};
            for (std::size_t j = 0; j < n; ++j)
                if (j != k)
                    repulsion += 1.0 / (z[k] - z[j]);
            cplx step;
            if (der == cplx{0.0, 0.0}) {
                step = cplx{1e-8 * (1.0 + az), 1e-8 * (1.0 + az)};
            } else {
                const cplx newton = val / der;
                step = newton / (1.0 - newton * repulsion);
            }
            z[k] -= step;
            if (std::abs(step) <= opt.tolerance * std::max<real>(1.0, std::abs(z[k])))
                done[k] = true;
            else
                all_done = false;
        }
        if (all_done && std::all_of(done.begin(), done.end(), [](bool b) { return b; }))
            return z;
    }
    throw RootFindError("Aberth-Ehrlich iteration did not converge", z);
}

} // namespace rootcma

#endif // ROOTCMA_NUMERICS_HPP
