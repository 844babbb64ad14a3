#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "nmmb/errors.hpp"

namespace nmmb {

/// Symmetric tridiagonal matrix. off[i] couples rows i and i+1.
struct SymTridiag {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const { return diag.size(); }
};

/// y = A x for symmetric tridiagonal A.
template <typename Scalar>
void tridiag_apply(const SymTridiag& a, const std::vector<Scalar>& x, std::vector<Scalar>& y) {
    const std::size_t n = a.size();
    y.assign(n, Scalar{});
    for (std::size_t i = 0; i < n; ++i) {
        Scalar acc = x[i] * a.diag[i];
        if (i > 0) acc += x[i - 1] * a.off[i - 1];
        if (i + 1 < n) acc += x[i + 1] * a.off[i];
        y[i] = acc;
    }
}

/// <x, A y> for symmetric tridiagonal A (real A, possibly complex vectors).
template <typename Scalar>
Scalar tridiag_inner(const SymTridiag& a, const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
    const std::size_t n = a.size();
    Scalar acc{};
    for (std::size_t i = 0; i < n; ++i) {
        Scalar row = y[i] * a.diag[i];
        if (i > 0) row += y[i - 1] * a.off[i - 1];
        if (i + 1 < n) row += y[i + 1] * a.off[i];
        if constexpr (std::is_same_v<Scalar, std::complex<double>>) {
            acc += std::conj(x[i]) * row;
        } else {
            acc += x[i] * row;
        }
    }
    return acc;
}

namespace detail {

inline constexpr double kPivotFloor = 1e-290;

/// splitmix64; used to seed deterministic start vectors for inverse iteration.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double uniform_pm_half(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
}

} // namespace detail

/// True when the matrix is positive definite (all Cholesky pivots > 0).
inline bool tridiag_is_spd(const SymTridiag& m) {
    const std::size_t n = m.size();
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = m.diag[i];
        if (i > 0) d -= m.off[i - 1] * m.off[i - 1] / prev;
        if (!(d > 0.0)) return false;
        prev = d;
    }
    return true;
}

/// Number of pencil eigenvalues of (K, M) strictly below lambda, by the
/// inertia of the LDL^T factorization of K - lambda M (Sylvester congruence;
/// this is the bisection count of the implicitly Cholesky-reduced problem).
inline std::size_t pencil_count_below(const SymTridiag& k, const SymTridiag& m, double lambda) {
    const std::size_t n = k.size();
    std::size_t count = 0;
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = k.diag[i] - lambda * m.diag[i];
        if (i > 0) {
            const double e = k.off[i - 1] - lambda * m.off[i - 1];
            d -= e * e / q;
        }
        if (d == 0.0) d = -detail::kPivotFloor;
        if (d < 0.0) ++count;
        q = d;
    }
    return count;
}

/// Crude upper bound on all pencil eigenvalues, from Gershgorin row sums and
/// the diagonal dominance of the mass matrix.
inline double pencil_upper_bound(const SymTridiag& k, const SymTridiag& m) {
    const std::size_t n = k.size();
    double bound = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double ksum = std::abs(k.diag[i]);
        double mmin = m.diag[i];
        if (i > 0) {
            ksum += std::abs(k.off[i - 1]);
            mmin -= std::abs(m.off[i - 1]);
        }
        if (i + 1 < n) {
            ksum += std::abs(k.off[i]);
            mmin -= std::abs(m.off[i]);
        }
        if (!(mmin > 0.0)) throw internal_error("pencil_upper_bound: mass matrix not diagonally dominant");
        bound = std::max(bound, ksum / mmin);
    }
    return bound * 1.01 + 1.0;
}

/// Bisection for the index-th (1-based) pencil eigenvalue inside (lo, hi],
/// where pencil_count_below(lo) < index <= pencil_count_below(hi).
inline double pencil_bisect(const SymTridiag& k, const SymTridiag& m, std::size_t index, double lo,
                            double hi) {
    const double tol_floor = 1e-13 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    for (int it = 0; it < 220; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= tol_floor * 1e-2 + 4.0 * 2.22e-16 * std::max(std::abs(lo), std::abs(hi)))
            break;
        if (mid <= lo || mid >= hi) break;
        if (pencil_count_below(k, m, mid) >= index)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

/// Tridiagonal LU factorization with partial pivoting (two superdiagonals of
/// fill), long double throughout; used by inverse iteration near-singular
/// shifts.
struct TriLU {
    std::vector<long double> d, u1, u2, mult;
    std::vector<unsigned char> swapped;

    void factor(const SymTridiag& k, const SymTridiag& m, long double sigma) {
        const std::size_t n = k.size();
        d.resize(n);
        u1.assign(n > 0 ? n - 1 : 0, 0.0L);
        u2.assign(n > 1 ? n - 2 : 0, 0.0L);
        mult.assign(n > 0 ? n - 1 : 0, 0.0L);
        swapped.assign(n > 0 ? n - 1 : 0, 0);
        std::vector<long double> sub(n > 0 ? n - 1 : 0);
        for (std::size_t i = 0; i < n; ++i) d[i] = (long double)k.diag[i] - sigma * (long double)m.diag[i];
        for (std::size_t i = 0; i + 1 < n; ++i) {
            u1[i] = (long double)k.off[i] - sigma * (long double)m.off[i];
            sub[i] = u1[i];
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::abs(d[i]) >= std::abs(sub[i])) {
                if (d[i] == 0.0L) d[i] = kPivotFloor;
                const long double w = sub[i] / d[i];
                mult[i] = w;
                swapped[i] = 0;
                d[i + 1] -= w * u1[i];
                // u2[i] stays zero
            } else {
                const long double w = d[i] / sub[i];
                mult[i] = w;
                swapped[i] = 1;
                const long double old_u1_i = u1[i];
                d[i] = sub[i];
                u1[i] = d[i + 1];
                if (i + 2 < n) {
                    u2[i] = u1[i + 1];
                    d[i + 1] = old_u1_i - w * u1[i];
                    u1[i + 1] = -w * u2[i];
                    sub[i + 1] = (long double)k.off[i + 1] - sigma * (long double)m.off[i + 1];
                } else {
                    d[i + 1] = old_u1_i - w * u1[i];
                }
            }
        }
        if (n > 0 && d[n - 1] == 0.0L) d[n - 1] = kPivotFloor;
    }

    void solve(std::vector<long double>& b) const {
        const std::size_t n = d.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (swapped[i]) std::swap(b[i], b[i + 1]);
            b[i + 1] -= mult[i] * b[i];
        }
        for (std::size_t ii = n; ii-- > 0;) {
            long double acc = b[ii];
            if (ii + 1 < n) acc -= u1[ii] * b[ii + 1];
            if (ii + 2 < n) acc -= u2[ii] * b[ii + 2];
            b[ii] = acc / d[ii];
        }
    }
};

} // namespace detail

/// One eigenvector of the pencil (K, M) for the isolated shift sigma, by
/// inverse iteration in extended precision. Returns the M-normalized vector.
inline std::vector<double> pencil_inverse_iteration(const SymTridiag& k, const SymTridiag& m,
                                                    double sigma, std::uint64_t seed) {
    const std::size_t n = k.size();
    detail::TriLU lu;
    lu.factor(k, m, (long double)sigma);

    std::uint64_t state = 0x8f3c9d1be74a52c1ull ^ (seed * 0x100000001b3ull);
    std::vector<long double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = detail::uniform_pm_half(state);

    std::vector<long double> b(n);
    auto m_normalize = [&](std::vector<long double>& v) {
        long double nrm2 = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            long double row = v[i] * (long double)m.diag[i];
            if (i > 0) row += v[i - 1] * (long double)m.off[i - 1];
            if (i + 1 < n) row += v[i + 1] * (long double)m.off[i];
            nrm2 += v[i] * row;
        }
        const long double s = 1.0L / std::sqrt(nrm2);
        for (auto& vi : v) vi *= s;
    };

    m_normalize(x);
    for (int it = 0; it < 3; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            long double row = x[i] * (long double)m.diag[i];
            if (i > 0) row += x[i - 1] * (long double)m.off[i - 1];
            if (i + 1 < n) row += x[i + 1] * (long double)m.off[i];
            b[i] = row;
        }
        lu.solve(b);
        x = b;
        m_normalize(x);
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(x[i]);
    return out;
}

} // namespace nmmb
