#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/potential.hpp"
#include "nmmb/tridiag.hpp"

namespace nmmb {

/// Linear-element discretization of H = -d^2/dx^2 + V(x) on (0, l+b+r) with
/// hard (Dirichlet) walls: no degrees of freedom at x = 0 and x = l+b+r.
///
/// The mesh is uniform with spacing h, and the potential breakpoints x = l and
/// x = l+b fall exactly on nodes, so all element integrals of the piecewise
/// constant potential are exact.
struct FemSystem {
    PotentialSpec spec;
    double h = 0.0;
    std::vector<double> nodes;  ///< interior node coordinates, strictly increasing
    SymTridiag hamiltonian;     ///< stiffness + potential (Dirichlet rows removed)
    SymTridiag mass;            ///< element overlap matrix, SPD
    std::size_t cut = 0;        ///< interior index of the node at x = l

    /// Mass form restricted to elements inside [0, l]. The element straddling
    /// nothing: l is a node, so every element lies wholly in one region and the
    /// split of the quadratic form at x = l is exact.
    SymTridiag mass_system;
    /// Mass form restricted to elements inside [l, l+b+r].
    SymTridiag mass_env;

    std::size_t size() const { return nodes.size(); }
};

namespace detail {

inline std::size_t require_integral_multiple(double len, double h, const std::string& name) {
    const double q = len / h;
    const auto k = static_cast<std::size_t>(std::llround(q));
    if (std::abs(q - static_cast<double>(k)) > 1e-9 * std::max(1.0, q))
        throw config_error("assemble_fem: " + name + "/h is not an integer; potential breakpoints fall off-mesh");
    return k;
}

} // namespace detail

/// Assemble the hat-element discretization. Interior stencils are
/// (-1/h, 2/h, -1/h) for the kinetic part and (h/6, 2h/3, h/6) for the mass,
/// plus exact element integrals of the piecewise-constant potential.
inline FemSystem assemble_fem(const PotentialSpec& spec, double h) {
    spec.validate();
    if (!(h > 0.0)) throw config_error("assemble_fem: h must be > 0");
    if (h > spec.l / 10.0)
        throw config_error("assemble_fem: h too coarse; need h <= l/10 to resolve the left well");

    const std::size_t kl = detail::require_integral_multiple(spec.l, h, "l");
    const std::size_t kb = detail::require_integral_multiple(spec.b, h, "b");
    const std::size_t kr = detail::require_integral_multiple(spec.r, h, "r");
    const std::size_t ne = kl + kb + kr;  // element count
    const std::size_t n = ne - 1;         // interior nodes

    FemSystem fem;
    fem.spec = spec;
    fem.h = h;
    fem.cut = kl - 1;
    fem.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) fem.nodes[i] = h * static_cast<double>(i + 1);

    fem.hamiltonian.diag.assign(n, 0.0);
    fem.hamiltonian.off.assign(n - 1, 0.0);
    fem.mass.diag.assign(n, 0.0);
    fem.mass.off.assign(n - 1, 0.0);
    fem.mass_system.diag.assign(n, 0.0);
    fem.mass_system.off.assign(n - 1, 0.0);
    fem.mass_env.diag.assign(n, 0.0);
    fem.mass_env.off.assign(n - 1, 0.0);

    for (std::size_t e = 0; e < ne; ++e) {
        const double ve = potential_value(spec, (static_cast<double>(e) + 0.5) * h);
        const bool in_system = e < kl;
        // interior indices of the element's endpoints; SIZE_MAX marks a wall
        const std::size_t left = (e == 0) ? static_cast<std::size_t>(-1) : e - 1;
        const std::size_t right = (e == ne - 1) ? static_cast<std::size_t>(-1) : e;

        const double kin_d = 1.0 / h;
        const double mass_d = h / 3.0;
        const double mass_o = h / 6.0;

        if (left != static_cast<std::size_t>(-1)) {
            fem.hamiltonian.diag[left] += kin_d + ve * mass_d;
            fem.mass.diag[left] += mass_d;
            (in_system ? fem.mass_system : fem.mass_env).diag[left] += mass_d;
        }
        if (right != static_cast<std::size_t>(-1)) {
            fem.hamiltonian.diag[right] += kin_d + ve * mass_d;
            fem.mass.diag[right] += mass_d;
            (in_system ? fem.mass_system : fem.mass_env).diag[right] += mass_d;
        }
        if (left != static_cast<std::size_t>(-1) && right != static_cast<std::size_t>(-1)) {
            fem.hamiltonian.off[left] += -kin_d + ve * mass_o;
            fem.mass.off[left] += mass_o;
            (in_system ? fem.mass_system : fem.mass_env).off[left] += mass_o;
        }
    }
    return fem;
}

/// <u, v> in the mass inner product.
template <typename Scalar>
Scalar mass_inner(const FemSystem& fem, const std::vector<Scalar>& u, const std::vector<Scalar>& v) {
    return tridiag_inner(fem.mass, u, v);
}

/// Rayleigh quotient v^T K v / v^T M v evaluated element-by-element, which
/// keeps both quadratic forms as sums of nonnegative element contributions and
/// avoids the cancellation a matrix-level evaluation suffers for small
/// eigenvalues.
inline double elementwise_rayleigh_quotient(const FemSystem& fem, const std::vector<double>& v) {
    const std::size_t n = fem.size();
    const std::size_t ne = n + 1;
    const double h = fem.h;
    long double num = 0.0L, den = 0.0L;
    for (std::size_t e = 0; e < ne; ++e) {
        const long double vl = (e == 0) ? 0.0L : (long double)v[e - 1];
        const long double vr = (e == ne - 1) ? 0.0L : (long double)v[e];
        const long double dv = vr - vl;
        const long double melem = (long double)h / 6.0L * (vl * vl + vr * vr + (vl + vr) * (vl + vr));
        const double ve = potential_value(fem.spec, (static_cast<double>(e) + 0.5) * h);
        num += dv * dv / (long double)h + (long double)ve * melem;
        den += melem;
    }
    return static_cast<double>(num / den);
}

} // namespace nmmb
