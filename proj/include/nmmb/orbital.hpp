#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/fem.hpp"
#include "nmmb/spectral.hpp"

namespace nmmb {

using cdouble = std::complex<double>;

/// A single-particle state: spectral coefficients plus an internal-label
/// index. Evolution is a pure phase rotation, so the state is stored as its
/// t = 0 coefficients plus a timestamp; coefficients at the current time are
/// materialized on demand. This makes the phase semigroup exact.
struct Orbital {
    std::vector<cdouble> base;  ///< coefficients at t = 0
    double time = 0.0;
    int internal_label = 0;
};

/// Coefficients a_j(t) = exp(-i E_j t) a_j(0).
inline std::vector<cdouble> orbital_coefficients(const Orbital& orb, const SpectralBasis& basis) {
    if (orb.base.size() != basis.mode_count())
        throw domain_error("orbital_coefficients: orbital and basis mode counts differ");
    std::vector<cdouble> c(orb.base.size());
    for (std::size_t j = 0; j < c.size(); ++j)
        c[j] = orb.base[j] * std::polar(1.0, -basis.energies[j] * orb.time);
    return c;
}

struct ExpandResult {
    Orbital orbital;
    double defect = 0.0;  ///< completeness defect 1 - sum |a_j|^2 before renormalization
};

/// Projection coefficients <mode_j | M | x> of a nodal vector.
inline std::vector<double> project_coefficients(const SpectralBasis& basis, const std::vector<double>& x) {
    const auto& fem = *basis.fem;
    if (x.size() != fem.size()) throw domain_error("project_coefficients: vector not on the basis mesh");
    std::vector<double> mx;
    tridiag_apply(fem.mass, x, mx);
    std::vector<double> a(basis.mode_count());
    for (std::size_t j = 0; j < a.size(); ++j) {
        auto m = basis.mode(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) acc += m[i] * mx[i];
        a[j] = acc;
    }
    return a;
}

/// Expand an initial nodal vector in the spectral basis. The completeness
/// defect 1 - sum |a_j|^2 is reported; the orbital is renormalized only when
/// the defect is at most eps_complete, otherwise the cutoff is too low.
inline ExpandResult expand(const std::vector<double>& initial, const SpectralBasis& basis,
                           double eps_complete = 1e-8, int internal_label = 0) {
    const auto& fem = *basis.fem;
    const double nrm2 = tridiag_inner(fem.mass, initial, initial);
    if (!(nrm2 > 1e-24)) throw domain_error("expand: zero vector is not a state");
    const double scale = 1.0 / std::sqrt(nrm2);

    auto a = project_coefficients(basis, initial);
    double captured = 0.0;
    for (auto& aj : a) {
        aj *= scale;
        captured += aj * aj;
    }
    const double defect = 1.0 - captured;
    if (!(defect <= eps_complete))
        throw cutoff_error("expand: completeness defect " + std::to_string(defect) +
                           " exceeds eps_complete = " + std::to_string(eps_complete) +
                           "; raise e_cut");

    ExpandResult res;
    res.defect = defect;
    res.orbital.time = 0.0;
    res.orbital.internal_label = internal_label;
    res.orbital.base.resize(a.size());
    const double renorm = 1.0 / std::sqrt(captured);
    for (std::size_t j = 0; j < a.size(); ++j) res.orbital.base[j] = a[j] * renorm;
    return res;
}

inline ExpandResult expand(const WellEigenstate& well, const SpectralBasis& basis,
                           double eps_complete = 1e-8, int internal_label = 0) {
    return expand(well.coefficients, basis, eps_complete, internal_label);
}

/// Phase evolution by an additional time step t >= 0.
inline Orbital evolve(const Orbital& orb, double t) {
    if (t < 0.0) throw domain_error("evolve: t must be >= 0");
    Orbital out = orb;
    out.time = orb.time + t;
    return out;
}

/// Nodal reconstruction psi(x_i) = sum_j a_j(t) mode_j(x_i).
inline std::vector<cdouble> reconstruct(const Orbital& orb, const SpectralBasis& basis) {
    const auto c = orbital_coefficients(orb, basis);
    const std::size_t n = basis.node_count();
    std::vector<cdouble> psi(n, cdouble{});
    for (std::size_t j = 0; j < c.size(); ++j) {
        auto m = basis.mode(j);
        const cdouble cj = c[j];
        for (std::size_t i = 0; i < n; ++i) psi[i] += cj * m[i];
    }
    return psi;
}

/// Reconstruct several orbitals in one sweep over the mode matrix.
inline std::vector<std::vector<cdouble>> reconstruct_many(std::span<const Orbital> orbitals,
                                                          const SpectralBasis& basis) {
    const std::size_t n = basis.node_count();
    const std::size_t no = orbitals.size();
    std::vector<std::vector<cdouble>> coeffs(no);
    std::vector<std::vector<cdouble>> psi(no, std::vector<cdouble>(n, cdouble{}));
    for (std::size_t o = 0; o < no; ++o) coeffs[o] = orbital_coefficients(orbitals[o], basis);
    for (std::size_t j = 0; j < basis.mode_count(); ++j) {
        auto m = basis.mode(j);
        for (std::size_t o = 0; o < no; ++o) {
            const cdouble cj = coeffs[o][j];
            auto& po = psi[o];
            for (std::size_t i = 0; i < n; ++i) po[i] += cj * m[i];
        }
    }
    return psi;
}

/// System/environment split of a single-particle state. Both parts keep the
/// value at the cut node; the quadratic forms mass_system / mass_env assign
/// the element integrals on each side of x = l exactly.
struct SplitOrbital {
    std::vector<cdouble> s_part;  ///< nodal vector, zero beyond the cut node
    std::vector<cdouble> e_part;  ///< nodal vector, zero before the cut node
    double p1 = 0.0;              ///< weight of s_part
};

inline SplitOrbital split_nodal(const FemSystem& fem, const std::vector<cdouble>& psi) {
    if (psi.size() != fem.size()) throw domain_error("split_nodal: vector not on the mesh");
    SplitOrbital sp;
    sp.s_part.assign(psi.size(), cdouble{});
    sp.e_part.assign(psi.size(), cdouble{});
    for (std::size_t i = 0; i <= fem.cut; ++i) sp.s_part[i] = psi[i];
    for (std::size_t i = fem.cut; i < psi.size(); ++i) sp.e_part[i] = psi[i];
    sp.p1 = std::clamp(std::real(tridiag_inner(fem.mass_system, psi, psi)), 0.0, 1.0);
    return sp;
}

inline SplitOrbital split_system(const Orbital& orb, const SpectralBasis& basis) {
    return split_nodal(*basis.fem, reconstruct(orb, basis));
}

/// Mass inner product <reference | orbital(t)>; its squared modulus is the
/// population of the reference well state.
inline cdouble correlation(const Orbital& orb, const SpectralBasis& basis, const WellEigenstate& ref) {
    if (ref.coefficients.size() != basis.node_count())
        throw domain_error("correlation: reference not on the basis mesh");
    const auto rows = project_coefficients(basis, ref.coefficients);
    const auto c = orbital_coefficients(orb, basis);
    cdouble acc{};
    for (std::size_t j = 0; j < c.size(); ++j) acc += rows[j] * c[j];
    return acc;
}

} // namespace nmmb
