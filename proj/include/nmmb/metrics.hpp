#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/frame.hpp"
#include "nmmb/hermitian.hpp"
#include "nmmb/manybody.hpp"

namespace nmmb {

/// Trace norm tr|M| = sum of absolute eigenvalues of a Hermitian matrix.
/// Inputs must be Hermitian within tol; the defect is symmetrized away before
/// the eigensolve.
inline double trace_norm(CMatrix m, double tol = 1e-10) {
    if (m.n == 0) return 0.0;
    const double defect = hermiticity_defect(m);
    if (defect > tol)
        throw domain_error("trace_norm: matrix not Hermitian (defect " + std::to_string(defect) + ")");
    symmetrize_hermitian(m);
    auto d = hermitian_eigenvalues(m);
    double acc = 0.0;
    for (double x : d) acc += 2.0 * std::abs(x);  // embedding halves fold back
    return 0.5 * acc;
}

namespace detail {

/// Flip the sign of a Hermitian difference so that its first nonzero entry
/// (row-major; real part first) is positive. D(rho, sigma) and D(sigma, rho)
/// then diagonalize the bit-identical matrix.
inline void canonical_orientation(CMatrix& m) {
    for (const auto& z : m.a) {
        if (std::real(z) != 0.0) {
            if (std::real(z) < 0.0)
                for (auto& w : m.a) w = -w;
            return;
        }
        if (std::imag(z) != 0.0) {
            if (std::imag(z) < 0.0)
                for (auto& w : m.a) w = -w;
            return;
        }
    }
}

} // namespace detail

/// Trace distance D(rho, sigma) = tr|rho - sigma| / 2. A metric on density
/// matrices: 0 iff rho = sigma, 1 iff the supports are orthogonal.
inline double trace_distance(const CMatrix& rho, const CMatrix& sigma, double tol = 1e-10) {
    if (rho.n != sigma.n) throw domain_error("trace_distance: dimension mismatch");
    if (hermiticity_defect(rho) > tol || hermiticity_defect(sigma) > tol)
        throw domain_error("trace_distance: input not Hermitian within tolerance");
    CMatrix delta = rho - sigma;
    symmetrize_hermitian(delta);
    detail::canonical_orientation(delta);
    return 0.5 * trace_norm(std::move(delta), 1.0);
}

namespace detail {

/// Apply a d_out x d_in matrix (given as an element functor) to one axis of a
/// flat row-major tensor.
template <typename Mel>
std::vector<cdouble> apply_axis(const std::vector<cdouble>& t, std::vector<std::size_t>& shape,
                                std::size_t ax, std::size_t d_out, Mel&& mel) {
    const std::size_t d_in = shape[ax];
    std::size_t lo = 1, hi = 1;
    for (std::size_t q = ax + 1; q < shape.size(); ++q) lo *= shape[q];
    for (std::size_t q = 0; q < ax; ++q) hi *= shape[q];
    std::vector<cdouble> out(hi * d_out * lo);
    for (std::size_t h = 0; h < hi; ++h)
        for (std::size_t a = 0; a < d_out; ++a)
            for (std::size_t l = 0; l < lo; ++l) {
                cdouble acc{};
                for (std::size_t b = 0; b < d_in; ++b) {
                    const cdouble w = mel(a, b);
                    if (w == cdouble{}) continue;
                    acc += w * t[(h * d_in + b) * lo + l];
                }
                out[(h * d_out + a) * lo + l] = acc;
            }
    shape[ax] = d_out;
    return out;
}

/// Embed a k-factor block through the per-factor spatial isometry
/// U (m_out x m_in, row-major), extended by the identity on the internal
/// labels: B' = (U (x) I_d)^{(x) k} B ((U (x) I_d)^dagger)^{(x) k}.
inline CMatrix embed_block(const CMatrix& block, std::size_t k, std::size_t m_in, std::size_t m_out,
                           std::size_t d_int, const std::vector<cdouble>& iso) {
    const std::size_t ds_in = m_in * d_int;
    const std::size_t ds_out = m_out * d_int;
    if (k == 0) return block;

    auto w = [&](std::size_t a, std::size_t b) -> cdouble {
        if (a % d_int != b % d_int) return cdouble{};
        return iso[(a / d_int) * m_in + (b / d_int)];
    };
    auto wc = [&](std::size_t a, std::size_t b) -> cdouble { return std::conj(w(a, b)); };

    std::vector<std::size_t> shape(2 * k, ds_in);
    std::vector<cdouble> data = block.a;
    for (std::size_t p = 0; p < k; ++p) data = apply_axis(data, shape, p, ds_out, w);
    for (std::size_t p = k; p < 2 * k; ++p) data = apply_axis(data, shape, p, ds_out, wc);

    CMatrix out(ipow(ds_out, k));
    out.a = std::move(data);
    return out;
}

struct MergedSector {
    double weight = 0.0;
    CMatrix block;  ///< unit trace
};

/// k-merged sectors of both states, embedded into the union frame.
inline std::map<int, std::pair<MergedSector, MergedSector>> aligned_sectors(
    const ReducedState& rho, const ReducedState& sigma, const FrameAlignment& al) {
    if (rho.d_int != sigma.d_int)
        throw domain_error("aligned_sectors: incompatible internal alphabets");
    std::map<int, std::pair<MergedSector, MergedSector>> out;
    for (const auto& [k, wb] : k_merged_sectors(rho)) {
        auto& slot = out[k].first;
        slot.weight = wb.first;
        slot.block = embed_block(wb.second, static_cast<std::size_t>(k), rho.m_s, al.m_union,
                                 rho.d_int, al.iso_a);
    }
    for (const auto& [k, wb] : k_merged_sectors(sigma)) {
        auto& slot = out[k].second;
        slot.weight = wb.first;
        slot.block = embed_block(wb.second, static_cast<std::size_t>(k), sigma.m_s, al.m_union,
                                 sigma.d_int, al.iso_b);
    }
    return out;
}

} // namespace detail

/// Blockwise trace distance D(rho_S, sigma_S) = sum_k D(w_k rho_k, v_k sigma_k)
/// on the union frame; sectors absent on one side count as zero blocks. The
/// subnormalized sector pairs are differenced as-is, with no renormalization
/// inside sectors.
inline double blockwise_distance(const ReducedState& rho, const ReducedState& sigma,
                                 const FrameAlignment& al) {
    double dist = 0.0;
    for (auto& [k, pair] : detail::aligned_sectors(rho, sigma, al)) {
        auto& [a, b] = pair;
        const std::size_t dim = detail::ipow(al.m_union * rho.d_int, static_cast<std::size_t>(k));
        CMatrix delta(dim);
        if (a.block.n) {
            for (std::size_t i = 0; i < delta.a.size(); ++i) delta.a[i] += a.weight * a.block.a[i];
        }
        if (b.block.n) {
            for (std::size_t i = 0; i < delta.a.size(); ++i) delta.a[i] -= b.weight * b.block.a[i];
        }
        symmetrize_hermitian(delta);
        detail::canonical_orientation(delta);
        dist += 0.5 * trace_norm(std::move(delta), 1.0);
    }
    return dist;
}

/// Lower estimator: half the total variation distance of the particle-number
/// distributions (the minimal trace distance within each block).
inline double p_lower(const ReducedState& rho, const ReducedState& sigma) {
    const auto pa = number_distribution(rho);
    const auto pb = number_distribution(sigma);
    const std::size_t kmax = std::max(pa.size(), pb.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) {
        const double a = k < pa.size() ? pa[k] : 0.0;
        const double b = k < pb.size() ? pb[k] : 0.0;
        acc += std::abs(a - b);
    }
    return 0.5 * acc;
}

/// Upper estimator: exact distance in the one-dimensional vacuum block plus
/// the maximal distances in all k >= 1 blocks.
inline double p_upper(const ReducedState& rho, const ReducedState& sigma) {
    const double c0 = rho.weight_of_k(0);
    const double d0 = sigma.weight_of_k(0);
    return 1.0 - 0.5 * (c0 + d0) + 0.5 * std::abs(c0 - d0);
}

/// Trace distance of the reduced single-particle density matrices on the
/// vacuum (+) one-particle space, blocks embedded in the union frame.
inline double d_1p(const Rspdm& rho, const Rspdm& sigma, const FrameAlignment& al) {
    if (rho.d_int != sigma.d_int) throw domain_error("d_1p: incompatible internal alphabets");
    const CMatrix ba = detail::embed_block(rho.one_particle_block, 1, rho.m_s, al.m_union, rho.d_int, al.iso_a);
    const CMatrix bb =
        detail::embed_block(sigma.one_particle_block, 1, sigma.m_s, al.m_union, sigma.d_int, al.iso_b);
    CMatrix delta = ba - bb;
    symmetrize_hermitian(delta);
    detail::canonical_orientation(delta);
    return 0.5 * (std::abs(rho.vacuum_weight - sigma.vacuum_weight) + trace_norm(std::move(delta), 1.0));
}

/// Trace distance of the kp-particle reduced states: the merged kp blocks
/// plus the scalar residual sector of states with fewer than kp particles.
inline double d_kp(const KpReduction& rho, const KpReduction& sigma, const FrameAlignment& al) {
    if (rho.kp != sigma.kp) throw domain_error("d_kp: mismatched kp");
    if (rho.d_int != sigma.d_int) throw domain_error("d_kp: incompatible internal alphabets");
    const auto k = static_cast<std::size_t>(rho.kp);
    const CMatrix ba = detail::embed_block(rho.merged(), k, rho.m_s, al.m_union, rho.d_int, al.iso_a);
    const CMatrix bb = detail::embed_block(sigma.merged(), k, sigma.m_s, al.m_union, sigma.d_int, al.iso_b);
    CMatrix delta = ba - bb;
    symmetrize_hermitian(delta);
    detail::canonical_orientation(delta);
    return 0.5 * (std::abs(rho.residual_weight - sigma.residual_weight) +
                  trace_norm(std::move(delta), 1.0));
}

/// Time series of the distance measures, plus detected witness pairs.
struct DistanceReport {
    std::vector<double> times;
    std::vector<double> d_full;
    std::vector<double> p_lower;
    std::vector<double> p_upper;
    std::vector<double> d_1p;
    std::map<int, std::vector<double>> d_kp;

    struct Witness {
        double t0 = 0.0;
        double t1 = 0.0;
        enum class Kind { bounds, mixed } kind = Kind::bounds;
    };
    std::vector<Witness> witnesses;
    double max_increase = 0.0;
};

struct WitnessScan {
    std::vector<DistanceReport::Witness> pairs;
    double max_increase = 0.0;
};

/// Non-Markovianity witnesses: all sample pairs t0 < t1 with
/// p_upper(t0) < p_lower(t1) ("bounds") or p_upper(t0) < d_full(t1) ("mixed"),
/// reported as maximal runs of violating t1 with the strongest violation as
/// the representative, plus the largest increase of d_full itself.
inline WitnessScan witness_scan(const DistanceReport& report) {
    const std::size_t n = report.times.size();
    if (n < 2) throw domain_error("witness_scan: need at least two samples");
    if (report.d_full.size() != n || report.p_lower.size() != n || report.p_upper.size() != n)
        throw domain_error("witness_scan: series lengths differ");

    WitnessScan out;

    // prefix minima of p_upper (and of d_full for the max-increase report)
    std::vector<double> min_pu(n), min_d(n);
    std::vector<std::size_t> argmin_pu(n);
    double m = report.p_upper[0], md = report.d_full[0];
    std::size_t am = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (report.p_upper[i] < m) {
            m = report.p_upper[i];
            am = i;
        }
        md = std::min(md, report.d_full[i]);
        min_pu[i] = m;
        argmin_pu[i] = am;
        min_d[i] = md;
        if (i > 0) out.max_increase = std::max(out.max_increase, report.d_full[i] - min_d[i - 1]);
    }

    auto collect = [&](auto value, DistanceReport::Witness::Kind kind) {
        std::size_t i = 1;
        while (i < n) {
            if (!(value(i) > min_pu[i - 1])) {
                ++i;
                continue;
            }
            // maximal run of violating t1; pick the strongest violation
            std::size_t best = i;
            double best_gap = value(i) - min_pu[i - 1];
            std::size_t j = i + 1;
            for (; j < n && value(j) > min_pu[j - 1]; ++j) {
                const double gap = value(j) - min_pu[j - 1];
                if (gap > best_gap) {
                    best_gap = gap;
                    best = j;
                }
            }
            DistanceReport::Witness w;
            w.t0 = report.times[argmin_pu[best - 1]];
            w.t1 = report.times[best];
            w.kind = kind;
            out.pairs.push_back(w);
            i = j + 1;
        }
    };
    collect([&](std::size_t i) { return report.p_lower[i]; }, DistanceReport::Witness::Kind::bounds);
    collect([&](std::size_t i) { return report.d_full[i]; }, DistanceReport::Witness::Kind::mixed);
    return out;
}

} // namespace nmmb
