#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/fem.hpp"
#include "nmmb/tridiag.hpp"

namespace nmmb {

/// Eigenstate of the isolated left well (hard wall at x = l), zero-extended to
/// the full interior mesh. n is the 1-based quantum number.
struct WellEigenstate {
    int n = 0;
    double energy = 0.0;
    std::vector<double> coefficients;  ///< full-mesh nodal vector, zero on [l, l+b+r]
};

/// Energy-sorted, mass-orthonormal eigenpairs of the full-domain Hamiltonian
/// below the cutoff. Immutable once built; safe to share across readers.
struct SpectralBasis {
    std::vector<double> energies;  ///< strictly ascending
    std::vector<double> modes;     ///< flat, mode-major: modes[j * n + i]
    double e_cut = 0.0;
    std::shared_ptr<const FemSystem> fem;

    std::size_t mode_count() const { return energies.size(); }
    std::size_t node_count() const { return fem ? fem->size() : 0; }
    std::span<const double> mode(std::size_t j) const {
        return {modes.data() + j * node_count(), node_count()};
    }
};

struct SolveOptions {
    std::size_t mode_cap = 4096;  ///< guard against runaway cutoffs
};

namespace detail {

/// Eigenvalues (by 1-based index range) and vectors of a tridiagonal pencil.
/// Bisection on Sturm counts isolates each eigenvalue; inverse iteration in
/// extended precision produces the vectors; near-degenerate clusters are
/// re-orthonormalized in the mass inner product.
struct PencilSolution {
    std::vector<double> values;
    std::vector<std::vector<double>> vectors;
};

inline PencilSolution solve_pencil_range(const SymTridiag& k, const SymTridiag& m,
                                         std::size_t first, std::size_t last, double scale_hint) {
    PencilSolution sol;
    if (last < first) return sol;
    const std::size_t count = last - first + 1;
    const double hi_all = pencil_upper_bound(k, m);
    const double lo_all = -1e-9 * hi_all;

    sol.values.resize(count);
    for (std::size_t j = 0; j < count; ++j)
        sol.values[j] = pencil_bisect(k, m, first + j, lo_all, hi_all);

    // cluster boundaries: consecutive gaps below g0 share inverse-iteration
    // reorthogonalization
    const double g0 = 1e-4 * std::max(1.0, scale_hint);
    const std::size_t n = k.size();
    sol.vectors.resize(count);

    std::vector<double> mx(n);
    std::size_t cluster_begin = 0;
    for (std::size_t j = 0; j < count; ++j) {
        if (j > 0 && sol.values[j] - sol.values[j - 1] > g0) cluster_begin = j;
        std::vector<double> v;
        for (std::uint64_t attempt = 0; attempt < 4; ++attempt) {
            v = pencil_inverse_iteration(k, m, sol.values[j], (first + j) * 8191 + attempt);
            // orthogonalize against previous members of the cluster (M inner product)
            for (std::size_t p = cluster_begin; p < j; ++p) {
                tridiag_apply(m, sol.vectors[p], mx);
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += mx[i] * v[i];
                for (std::size_t i = 0; i < n; ++i) v[i] -= proj * sol.vectors[p][i];
            }
            const double nrm2 = tridiag_inner(m, v, v);
            if (nrm2 > 0.25) {
                const double s = 1.0 / std::sqrt(nrm2);
                for (auto& vi : v) vi *= s;
                break;
            }
            v.clear();  // collapsed onto the span of earlier cluster members
        }
        if (v.empty())
            throw internal_error("solve_pencil_range: inverse iteration failed to find an independent vector");
        // deterministic sign: largest-magnitude entry positive
        std::size_t imax = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
        if (v[imax] < 0.0)
            for (auto& vi : v) vi = -vi;
        sol.vectors[j] = std::move(v);
    }
    return sol;
}

} // namespace detail

/// All eigenpairs of K v = E M v with E <= e_cut (to round-off), mass
/// orthonormalized, energies ascending. Eigenvalues are refined with an
/// element-wise Rayleigh quotient of the converged vectors.
inline SpectralBasis solve_modes(std::shared_ptr<const FemSystem> fem, double e_cut,
                                 const SolveOptions& opts = {}) {
    if (!fem) throw domain_error("solve_modes: null FemSystem");
    if (!(e_cut > 0.0)) throw domain_error("solve_modes: e_cut must be > 0");
    if (!tridiag_is_spd(fem->mass)) throw internal_error("solve_modes: mass matrix not SPD");

    const SymTridiag& k = fem->hamiltonian;
    const SymTridiag& m = fem->mass;
    const double bump = e_cut + 1e-12 * std::max(1.0, std::abs(e_cut));
    const std::size_t count = pencil_count_below(k, m, bump);
    if (count > opts.mode_cap)
        throw resource_error("solve_modes: " + std::to_string(count) + " modes below e_cut exceed the cap of " +
                             std::to_string(opts.mode_cap) + "; lower e_cut or raise SolveOptions::mode_cap");

    SpectralBasis basis;
    basis.e_cut = e_cut;
    basis.fem = fem;
    if (count == 0) return basis;

    auto sol = detail::solve_pencil_range(k, m, 1, count, e_cut);

    // element-wise Rayleigh quotients give eigenvalues accurate relative to
    // their own magnitude, which the bisection values are not at the very
    // bottom of large domains
    basis.energies.resize(count);
    for (std::size_t j = 0; j < count; ++j)
        basis.energies[j] = elementwise_rayleigh_quotient(*fem, sol.vectors[j]);

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return basis.energies[a] < basis.energies[b]; });

    const std::size_t n = fem->size();
    std::vector<double> sorted_e(count);
    basis.modes.resize(count * n);
    for (std::size_t j = 0; j < count; ++j) {
        sorted_e[j] = basis.energies[order[j]];
        std::copy(sol.vectors[order[j]].begin(), sol.vectors[order[j]].end(), basis.modes.begin() + j * n);
    }
    basis.energies = std::move(sorted_e);
    return basis;
}

/// Eigenstates 1..n_max of the Dirichlet problem on [0, l] alone (hard wall at
/// x = l), zero-extended to the full mesh of the double-well geometry.
inline std::vector<WellEigenstate> isolated_well_modes(const PotentialSpec& spec, double h, int n_max) {
    spec.validate();
    if (n_max < 1) throw domain_error("isolated_well_modes: n_max must be >= 1");
    if (!(h > 0.0)) throw config_error("isolated_well_modes: h must be > 0");
    const std::size_t kl = detail::require_integral_multiple(spec.l, h, "l");
    detail::require_integral_multiple(spec.b, h, "b");
    const std::size_t kr = detail::require_integral_multiple(spec.r, h, "r");
    const std::size_t kb = static_cast<std::size_t>(std::llround(spec.b / h));
    if (kl < 2) throw config_error("isolated_well_modes: mesh too coarse for the well");
    const std::size_t nw = kl - 1;  // interior nodes of the well
    if (static_cast<std::size_t>(n_max) > nw)
        throw config_error("isolated_well_modes: n_max exceeds the " + std::to_string(nw) +
                           " modes available at this mesh");

    SymTridiag kw, mw;
    kw.diag.assign(nw, 2.0 / h);
    kw.off.assign(nw - 1, -1.0 / h);
    mw.diag.assign(nw, 2.0 * h / 3.0);
    mw.off.assign(nw - 1, h / 6.0);

    auto sol = detail::solve_pencil_range(kw, mw, 1, static_cast<std::size_t>(n_max), 1.0);

    const std::size_t n_full = kl + kb + kr - 1;
    std::vector<WellEigenstate> out(static_cast<std::size_t>(n_max));
    for (std::size_t j = 0; j < out.size(); ++j) {
        auto& st = out[j];
        st.n = static_cast<int>(j + 1);
        st.coefficients.assign(n_full, 0.0);
        std::copy(sol.vectors[j].begin(), sol.vectors[j].end(), st.coefficients.begin());
        // Rayleigh quotient on the well-only elements (pure box, V = 0)
        long double num = 0.0L, den = 0.0L;
        for (std::size_t e = 0; e < kl; ++e) {
            const long double vl = (e == 0) ? 0.0L : (long double)sol.vectors[j][e - 1];
            const long double vr = (e == kl - 1) ? 0.0L : (long double)sol.vectors[j][e];
            const long double dv = vr - vl;
            num += dv * dv / (long double)h;
            den += (long double)h / 6.0L * (vl * vl + vr * vr + (vl + vr) * (vl + vr));
        }
        st.energy = static_cast<double>(num / den);
    }
    return out;
}

} // namespace nmmb
