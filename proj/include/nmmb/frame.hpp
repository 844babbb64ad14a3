#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/fem.hpp"
#include "nmmb/orbital.hpp"

namespace nmmb {

/// Inner product on the vector representation the frame is built from
/// (mass form on nodal vectors, plain dot on synthetic coordinates).
using DotFn = std::function<cdouble(const std::vector<cdouble>&, const std::vector<cdouble>&)>;

/// Low-rank orthonormal realization of the system/environment split restricted
/// to the span of the active orbitals: orthonormal s- and e-frame vectors plus
/// the coordinates of every orbital's split parts in those frames.
struct EffectiveFrame {
    std::size_t m_s = 0;
    std::size_t m_e = 0;
    std::size_t d_int = 1;

    std::vector<std::vector<cdouble>> s_modes;  ///< orthonormal, span of the s-parts
    std::vector<std::vector<cdouble>> e_modes;  ///< orthonormal, span of the e-parts

    std::vector<std::vector<cdouble>> s_coords;  ///< per orbital, length m_s
    std::vector<std::vector<cdouble>> e_coords;  ///< per orbital, length m_e
    std::vector<int> labels;                     ///< per orbital internal label

    std::size_t orbital_count() const { return s_coords.size(); }
    std::size_t factor_dim() const { return (m_s + m_e) * d_int; }
};

namespace detail {

/// Modified Gram-Schmidt with one re-orthogonalization pass. Vectors whose
/// residual drops below the threshold contribute no new direction.
inline std::vector<std::vector<cdouble>> mgs_orthonormalize(
    const std::vector<std::vector<cdouble>>& parts, const DotFn& dot, double threshold) {
    std::vector<std::vector<cdouble>> frame;
    for (const auto& v : parts) {
        std::vector<cdouble> w = v;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& f : frame) {
                const cdouble proj = dot(f, w);
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= proj * f[i];
            }
        }
        const double nrm = std::sqrt(std::real(dot(w, w)));
        if (nrm < threshold) continue;
        for (auto& wi : w) wi /= nrm;
        frame.push_back(std::move(w));
    }
    return frame;
}

} // namespace detail

/// Build the effective frame from already-split orbital parts.
inline EffectiveFrame build_frame_from_parts(const std::vector<std::vector<cdouble>>& s_parts,
                                             const std::vector<std::vector<cdouble>>& e_parts,
                                             const std::vector<int>& labels, std::size_t d_int,
                                             const DotFn& dot_s, const DotFn& dot_e,
                                             double rank_threshold = 1e-10) {
    if (s_parts.size() != e_parts.size() || s_parts.size() != labels.size())
        throw domain_error("build_frame_from_parts: inconsistent input sizes");
    EffectiveFrame fr;
    fr.d_int = d_int;
    fr.labels = labels;
    fr.s_modes = detail::mgs_orthonormalize(s_parts, dot_s, rank_threshold);
    fr.e_modes = detail::mgs_orthonormalize(e_parts, dot_e, rank_threshold);
    fr.m_s = fr.s_modes.size();
    fr.m_e = fr.e_modes.size();

    const std::size_t no = s_parts.size();
    fr.s_coords.resize(no);
    fr.e_coords.resize(no);
    for (std::size_t o = 0; o < no; ++o) {
        fr.s_coords[o].resize(fr.m_s);
        for (std::size_t j = 0; j < fr.m_s; ++j) fr.s_coords[o][j] = dot_s(fr.s_modes[j], s_parts[o]);
        fr.e_coords[o].resize(fr.m_e);
        for (std::size_t j = 0; j < fr.m_e; ++j) fr.e_coords[o][j] = dot_e(fr.e_modes[j], e_parts[o]);
    }
    return fr;
}

inline DotFn make_mass_dot(const SymTridiag& form) {
    return [&form](const std::vector<cdouble>& x, const std::vector<cdouble>& y) {
        return tridiag_inner(form, x, y);
    };
}

/// Split each orbital and build the frame on the FEM mass forms.
inline EffectiveFrame build_frame(std::span<const Orbital> orbitals, const SpectralBasis& basis,
                                  std::size_t d_int, double rank_threshold = 1e-10) {
    const auto& fem = *basis.fem;
    auto psis = reconstruct_many(orbitals, basis);
    std::vector<std::vector<cdouble>> s_parts, e_parts;
    std::vector<int> labels;
    for (std::size_t o = 0; o < psis.size(); ++o) {
        auto sp = split_nodal(fem, psis[o]);
        s_parts.push_back(std::move(sp.s_part));
        e_parts.push_back(std::move(sp.e_part));
        labels.push_back(orbitals[o].internal_label);
    }
    return build_frame_from_parts(s_parts, e_parts, labels, d_int,
                                  make_mass_dot(fem.mass_system), make_mass_dot(fem.mass_env),
                                  rank_threshold);
}

/// Isometries embedding two system frames into the orthonormalized union of
/// their spans; blocks of independently reduced states are compared there.
struct FrameAlignment {
    std::size_t m_union = 0;
    /// row-major m_union x m_s isometries
    std::vector<cdouble> iso_a, iso_b;
};

inline FrameAlignment align_frames(const EffectiveFrame& a, const EffectiveFrame& b,
                                   const DotFn& dot_s, double rank_threshold = 1e-10) {
    std::vector<std::vector<cdouble>> all;
    all.reserve(a.m_s + b.m_s);
    for (const auto& f : a.s_modes) all.push_back(f);
    for (const auto& f : b.s_modes) all.push_back(f);
    auto u = detail::mgs_orthonormalize(all, dot_s, rank_threshold);

    FrameAlignment al;
    al.m_union = u.size();
    al.iso_a.assign(al.m_union * a.m_s, cdouble{});
    al.iso_b.assign(al.m_union * b.m_s, cdouble{});
    for (std::size_t k = 0; k < al.m_union; ++k) {
        for (std::size_t j = 0; j < a.m_s; ++j) al.iso_a[k * a.m_s + j] = dot_s(u[k], a.s_modes[j]);
        for (std::size_t j = 0; j < b.m_s; ++j) al.iso_b[k * b.m_s + j] = dot_s(u[k], b.s_modes[j]);
    }
    return al;
}

} // namespace nmmb
