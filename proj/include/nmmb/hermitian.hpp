#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "nmmb/errors.hpp"

namespace nmmb {

/// Minimal dense complex matrix, row-major.
struct CMatrix {
    std::size_t n = 0;
    std::vector<std::complex<double>> a;

    CMatrix() = default;
    explicit CMatrix(std::size_t dim) : n(dim), a(dim * dim) {}

    std::complex<double>& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    const std::complex<double>& operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static CMatrix identity(std::size_t dim) {
        CMatrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline CMatrix operator-(const CMatrix& x, const CMatrix& y) {
    CMatrix z(x.n);
    for (std::size_t i = 0; i < x.a.size(); ++i) z.a[i] = x.a[i] - y.a[i];
    return z;
}

inline CMatrix operator+(const CMatrix& x, const CMatrix& y) {
    CMatrix z(x.n);
    for (std::size_t i = 0; i < x.a.size(); ++i) z.a[i] = x.a[i] + y.a[i];
    return z;
}

inline CMatrix operator*(double s, const CMatrix& x) {
    CMatrix z(x.n);
    for (std::size_t i = 0; i < x.a.size(); ++i) z.a[i] = s * x.a[i];
    return z;
}

inline std::complex<double> trace(const CMatrix& m) {
    std::complex<double> t{};
    for (std::size_t i = 0; i < m.n; ++i) t += m(i, i);
    return t;
}

inline double hermiticity_defect(const CMatrix& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = i; j < m.n; ++j)
            worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
    return worst;
}

inline void symmetrize_hermitian(CMatrix& m) {
    for (std::size_t i = 0; i < m.n; ++i) {
        m(i, i) = std::real(m(i, i));
        for (std::size_t j = i + 1; j < m.n; ++j) {
            const auto avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
            m(i, j) = avg;
            m(j, i) = std::conj(avg);
        }
    }
}

namespace detail {

/// Householder tridiagonalization of a real symmetric matrix (values only).
/// Plain rank-2 updates; dimensions here are small.
inline void sym_tridiagonalize(std::vector<double>& a, std::size_t n, std::vector<double>& d,
                               std::vector<double>& e) {
    d.assign(n, 0.0);
    e.assign(n > 0 ? n - 1 : 0, 0.0);
    std::vector<double> v(n), p(n), q(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double norm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) norm2 += a[i * n + k] * a[i * n + k];
        const double x0 = a[(k + 1) * n + k];
        const double alpha = (x0 >= 0.0) ? -std::sqrt(norm2) : std::sqrt(norm2);
        const double beta = norm2 - x0 * alpha;  // = v^T v / 2 with v = x - alpha e1
        e[k] = alpha;
        if (beta == 0.0) continue;
        v.assign(n, 0.0);
        v[k + 1] = x0 - alpha;
        for (std::size_t i = k + 2; i < n; ++i) v[i] = a[i * n + k];
        // p = A v / beta over the trailing block
        for (std::size_t i = k + 1; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) acc += a[i * n + j] * v[j];
            p[i] = acc / beta;
        }
        double vp = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) vp += v[i] * p[i];
        const double kk = vp / (2.0 * beta);
        for (std::size_t i = k + 1; i < n; ++i) q[i] = p[i] - kk * v[i];
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= v[i] * q[j] + q[i] * v[j];
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i * n + i];
    if (n >= 2) e[n - 2] = a[(n - 1) * n + (n - 2)];
}

/// Implicit-shift QL iteration for a symmetric tridiagonal matrix (values
/// only). d = diagonal, e = subdiagonal (e[i] couples i and i+1). Deflation
/// uses a scale-aware absolute floor so that structurally zero submatrices
/// (rank-deficient blocks) terminate.
inline void tridiag_ql_eigenvalues(std::vector<double>& d, std::vector<double>& e) {
    const int n = static_cast<int>(d.size());
    if (n == 0) return;
    double anorm = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = std::abs(d[i]);
        if (i > 0) row += std::abs(e[i - 1]);
        if (i < n - 1) row += std::abs(e[i]);
        anorm = std::max(anorm, row);
    }
    const double floor_abs = 1e-17 * anorm + 1e-300;
    e.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 2.22e-16 * dd + floor_abs) break;
            }
            if (m != l) {
                if (iter++ == 100) throw internal_error("tridiag_ql_eigenvalues: not converging");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    e.pop_back();
    std::sort(d.begin(), d.end());
}

} // namespace detail

/// Eigenvalues of a real symmetric matrix (ascending). Householder reduction
/// to tridiagonal form followed by implicit-shift QL.
inline std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
    std::vector<double> d, e;
    detail::sym_tridiagonalize(a, n, d, e);
    detail::tridiag_ql_eigenvalues(d, e);
    return d;
}

/// Eigenvalues of a complex Hermitian matrix (ascending), via the real
/// symmetric embedding [[Re, -Im], [Im, Re]], whose spectrum is that of the
/// input with every eigenvalue doubled.
inline std::vector<double> hermitian_eigenvalues(const CMatrix& m) {
    const std::size_t n = m.n;
    std::vector<double> b(4 * n * n);
    const std::size_t nn = 2 * n;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double re = std::real(m(i, j));
            const double im = std::imag(m(i, j));
            b[i * nn + j] = re;
            b[(i + n) * nn + (j + n)] = re;
            b[i * nn + (j + n)] = -im;
            b[(i + n) * nn + j] = im;
        }
    }
    auto dd = symmetric_eigenvalues(std::move(b), nn);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (dd[2 * i] + dd[2 * i + 1]);
    return out;
}

} // namespace nmmb
