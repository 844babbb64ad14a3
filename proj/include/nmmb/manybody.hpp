#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/frame.hpp"
#include "nmmb/hermitian.hpp"

namespace nmmb {

/// Exchange statistics of an N-particle state. "ordered" is the unsymmetrized
/// tensor product of the orbital list, modeling particles rendered
/// distinguishable; it is realized as the uniform mixture over the distinct
/// orderings of that list.
enum class Statistics { boson, fermion, ordered };

inline const char* to_string(Statistics s) {
    switch (s) {
        case Statistics::boson: return "boson";
        case Statistics::fermion: return "fermion";
        default: return "ordered";
    }
}

struct ManyBodyLimits {
    std::size_t max_particles = 6;
    std::size_t max_factor_dim = 12;
    std::size_t max_block_dim = 4096;
};

/// First-quantized N-particle state over the per-particle effective space
/// (frame spatial modes) x (internal label), with an S/E partition of the
/// spatial index: indices below m_s * d_int are system-type.
struct ManyBodyState {
    Statistics stats = Statistics::boson;
    std::size_t n_particles = 0;
    std::size_t m_s = 0, m_e = 0, d_int = 1;
    std::size_t dim_s = 0;                       ///< m_s * d_int
    std::size_t factor_dim = 0;                  ///< (m_s + m_e) * d_int
    std::vector<std::vector<cdouble>> factors;   ///< per-particle vectors, unit norm
    std::vector<cdouble> tensor;                 ///< factor_dim^N coefficients, unit norm
    double norm_constant = 1.0;                  ///< N! perm(G), N! det(G), or product of norms
    ManyBodyLimits limits;
};

namespace detail {

inline double factorial(std::size_t n) {
    double f = 1.0;
    for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
}

inline double binomial(std::size_t n, std::size_t k) {
    return factorial(n) / (factorial(k) * factorial(n - k));
}

inline std::size_t ipow(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    while (exp--) r *= base;
    return r;
}

/// Gram matrix of the factor vectors.
inline CMatrix factor_gram(const std::vector<std::vector<cdouble>>& factors) {
    const std::size_t n = factors.size();
    CMatrix g(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cdouble acc{};
            for (std::size_t x = 0; x < factors[i].size(); ++x)
                acc += std::conj(factors[i][x]) * factors[j][x];
            g(i, j) = acc;
        }
    return g;
}

/// Permanent by expansion over permutations; particle numbers are small.
inline cdouble permanent(const CMatrix& g) {
    const std::size_t n = g.n;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    cdouble acc{};
    do {
        cdouble term = 1.0;
        for (std::size_t i = 0; i < n; ++i) term *= g(i, perm[i]);
        acc += term;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return acc;
}

inline cdouble determinant(CMatrix g) {
    const std::size_t n = g.n;
    cdouble det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(g(i, col)) > std::abs(g(piv, col))) piv = i;
        if (std::abs(g(piv, col)) == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(g(piv, j), g(col, j));
            det = -det;
        }
        det *= g(col, col);
        for (std::size_t i = col + 1; i < n; ++i) {
            const cdouble f = g(i, col) / g(col, col);
            for (std::size_t j = col; j < n; ++j) g(i, j) -= f * g(col, j);
        }
    }
    return det;
}

/// Sum of (sign-weighted) product tensors over the distinct orderings of the
/// factor list, via depth-first prefix products. Duplicate factors (bitwise
/// equal vectors) are enumerated once.
class OrderingAccumulator {
public:
    OrderingAccumulator(const std::vector<std::vector<cdouble>>& factors, std::size_t dim, bool signed_perms)
        : factors_(factors), n_(factors.size()), dim_(dim), signed_(signed_perms) {
        buffers_.resize(n_ + 1);
        for (std::size_t d = 0; d <= n_; ++d) buffers_[d].assign(ipow(dim_, d), cdouble{});
        buffers_[0][0] = 1.0;
        out_.assign(ipow(dim_, n_), cdouble{});
        used_.assign(n_, false);
        run(0, +1);
    }

    std::vector<cdouble> take() { return std::move(out_); }
    std::size_t distinct_orderings() const { return orderings_; }

private:
    void run(std::size_t depth, int sign) {
        if (depth == n_) {
            const auto& top = buffers_[n_];
            const double s = static_cast<double>(sign);
            for (std::size_t i = 0; i < top.size(); ++i) out_[i] += s * top[i];
            ++orderings_;
            return;
        }
        std::size_t remaining_before = 0;
        for (std::size_t cand = 0; cand < n_; ++cand) {
            if (used_[cand]) continue;
            bool duplicate = false;
            for (std::size_t prev = 0; prev < cand && !duplicate; ++prev)
                if (!used_[prev] && factors_[prev] == factors_[cand]) duplicate = true;
            if (!duplicate) {
                // parity: selecting the r-th remaining element costs r transpositions
                const int next_sign = (signed_ && (remaining_before % 2 == 1)) ? -sign : sign;
                extend(depth, cand);
                used_[cand] = true;
                run(depth + 1, next_sign);
                used_[cand] = false;
            }
            ++remaining_before;
        }
    }

    void extend(std::size_t depth, std::size_t cand) {
        const auto& prefix = buffers_[depth];
        auto& next = buffers_[depth + 1];
        const auto& f = factors_[cand];
        const std::size_t np = prefix.size();
        for (std::size_t i = 0; i < np; ++i) {
            const cdouble p = prefix[i];
            for (std::size_t j = 0; j < dim_; ++j) next[i * dim_ + j] = p * f[j];
        }
    }

    const std::vector<std::vector<cdouble>>& factors_;
    std::size_t n_, dim_;
    bool signed_;
    std::vector<std::vector<cdouble>> buffers_;
    std::vector<cdouble> out_;
    std::vector<bool> used_;
    std::size_t orderings_ = 0;
};

} // namespace detail

/// Build the (anti-)symmetrized or ordered N-particle state from the frame
/// embeddings. Bosons and fermions normalize through the permanent or
/// determinant of the orbital Gram matrix; ordered states through the product
/// of norms.
inline ManyBodyState assemble_state(const EffectiveFrame& frame, Statistics stats,
                                    const ManyBodyLimits& limits = {}) {
    ManyBodyState st;
    st.stats = stats;
    st.n_particles = frame.orbital_count();
    st.m_s = frame.m_s;
    st.m_e = frame.m_e;
    st.d_int = frame.d_int;
    st.dim_s = frame.m_s * frame.d_int;
    st.factor_dim = frame.factor_dim();
    st.limits = limits;

    if (st.n_particles > limits.max_particles)
        throw resource_error("assemble_state: N = " + std::to_string(st.n_particles) +
                             " exceeds the guard of " + std::to_string(limits.max_particles));
    if (st.n_particles > 0 && st.factor_dim > limits.max_factor_dim)
        throw resource_error("assemble_state: per-factor dimension " + std::to_string(st.factor_dim) +
                             " exceeds the guard of " + std::to_string(limits.max_factor_dim));

    const std::size_t n = st.n_particles;
    const std::size_t dim = st.factor_dim;
    st.factors.resize(n);
    for (std::size_t o = 0; o < n; ++o) {
        auto& f = st.factors[o];
        f.assign(dim, cdouble{});
        const int label = frame.labels[o];
        if (label < 0 || static_cast<std::size_t>(label) >= st.d_int)
            throw domain_error("assemble_state: internal label out of range");
        for (std::size_t s = 0; s < st.m_s; ++s)
            f[s * st.d_int + static_cast<std::size_t>(label)] = frame.s_coords[o][s];
        for (std::size_t e = 0; e < st.m_e; ++e)
            f[(st.m_s + e) * st.d_int + static_cast<std::size_t>(label)] = frame.e_coords[o][e];
    }

    if (n == 0) {  // many-particle vacuum
        st.tensor.assign(1, cdouble{1.0});
        st.norm_constant = 1.0;
        return st;
    }

    const CMatrix gram = detail::factor_gram(st.factors);

    if (stats == Statistics::ordered) {
        // the ordered state itself is the given-order product
        std::vector<cdouble> prefix{cdouble{1.0}};
        for (std::size_t o = 0; o < n; ++o) {
            std::vector<cdouble> next(prefix.size() * dim);
            for (std::size_t i = 0; i < prefix.size(); ++i)
                for (std::size_t j = 0; j < dim; ++j) next[i * dim + j] = prefix[i] * st.factors[o][j];
            prefix = std::move(next);
        }
        st.tensor = std::move(prefix);
        double norms = 1.0;
        for (std::size_t o = 0; o < n; ++o) norms *= std::sqrt(std::real(gram(o, o)));
        st.norm_constant = norms;
        const double s = 1.0 / norms;
        for (auto& z : st.tensor) z *= s;
        return st;
    }

    if (stats == Statistics::fermion) {
        const double det = std::real(detail::determinant(gram));
        if (!(det > 1e-12))
            throw domain_error("assemble_state: fermionic state with (near-)linearly dependent orbitals "
                               "violates Pauli exclusion");
        st.norm_constant = detail::factorial(n) * det;
        detail::OrderingAccumulator acc(st.factors, dim, true);
        st.tensor = acc.take();
        const double s = 1.0 / std::sqrt(st.norm_constant);
        for (auto& z : st.tensor) z *= s;
        return st;
    }

    // boson: sum over distinct orderings carries a multiplicity for each
    // group of repeated orbitals
    const double perm = std::real(detail::permanent(gram));
    st.norm_constant = detail::factorial(n) * perm;
    detail::OrderingAccumulator acc(st.factors, dim, false);
    st.tensor = acc.take();
    double multiplicity = 1.0;
    {
        std::vector<bool> counted(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            if (counted[i]) continue;
            std::size_t reps = 0;
            for (std::size_t j = i; j < n; ++j)
                if (st.factors[j] == st.factors[i]) {
                    ++reps;
                    counted[j] = true;
                }
            multiplicity *= detail::factorial(reps);
        }
    }
    const double s = multiplicity / std::sqrt(st.norm_constant);
    for (auto& z : st.tensor) z *= s;
    return st;
}

/// Sector of the block-diagonal reduced system state: k particles in the
/// system, an S/E assignment pattern for ordered statistics (bit i set means
/// position i is system-type), weight |c_k|^2 and the unit-trace block.
struct Sector {
    int k = 0;
    std::uint32_t pattern = 0;
    bool has_pattern = false;
    double weight = 0.0;
    CMatrix block;  ///< dim (m_s * d_int)^k, Hermitian PSD, unit trace
};

/// Block-diagonal reduced system state tr_E |psi><psi|.
struct ReducedState {
    Statistics stats = Statistics::boson;
    std::size_t n_particles = 0;
    std::size_t m_s = 0, d_int = 1;
    std::size_t dim_s = 0;
    std::vector<Sector> sectors;  ///< ascending (k, pattern); zero-weight sectors omitted

    double weight_of_k(int k) const {
        double w = 0.0;
        for (const auto& s : sectors)
            if (s.k == k) w += s.weight;
        return w;
    }
};

namespace detail {

inline int popcount32(std::uint32_t x) {
    int c = 0;
    while (x) {
        c += static_cast<int>(x & 1u);
        x >>= 1;
    }
    return c;
}

/// Reduction of an (anti-)symmetric tensor: the Fock-space k-sector equals
/// sqrt(C(N,k)) times the sorted-pattern component (all S factors first), so
/// the block is C(N,k) times the environment trace of that component.
inline void reduce_symmetric(const ManyBodyState& st, ReducedState& out) {
    const std::size_t n = st.n_particles;
    const std::size_t ds = st.dim_s;
    const std::size_t de = st.factor_dim - ds;
    const std::size_t dim = st.factor_dim;

    for (std::size_t k = 0; k <= n; ++k) {
        const std::size_t rows = ipow(ds, k);
        const std::size_t cols = ipow(de, n - k);
        if (rows > st.limits.max_block_dim)
            throw resource_error("reduce_system: sector block dimension " + std::to_string(rows) +
                                 " exceeds the guard of " + std::to_string(st.limits.max_block_dim));
        if (ds == 0 && k > 0) continue;
        if (de == 0 && k < n) continue;

        // gather the sorted-pattern component as a rows x cols matrix
        std::vector<cdouble> a(rows * cols);
        std::vector<std::size_t> sdig(k), edig(n - k);
        for (std::size_t rw = 0; rw < rows; ++rw) {
            std::size_t tmp = rw;
            for (std::size_t p = k; p-- > 0;) {
                sdig[p] = tmp % ds;
                tmp /= ds;
            }
            for (std::size_t cl = 0; cl < cols; ++cl) {
                std::size_t t2 = cl;
                for (std::size_t p = n - k; p-- > 0;) {
                    edig[p] = t2 % de;
                    t2 /= de;
                }
                std::size_t gidx = 0;
                for (std::size_t p = 0; p < k; ++p) gidx = gidx * dim + sdig[p];
                for (std::size_t p = 0; p < n - k; ++p) gidx = gidx * dim + (ds + edig[p]);
                a[rw * cols + cl] = st.tensor[gidx];
            }
        }

        CMatrix block(rows);
        long double tr = 0.0L;
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = i; j < rows; ++j) {
                cdouble acc{};
                for (std::size_t c = 0; c < cols; ++c) acc += a[i * cols + c] * std::conj(a[j * cols + c]);
                block(i, j) = acc;
                block(j, i) = std::conj(acc);
            }
            tr += std::real(block(i, i));
        }
        const double weight = binomial(n, k) * static_cast<double>(tr);
        if (weight <= 1e-30) continue;
        const double inv = 1.0 / static_cast<double>(tr);
        for (auto& z : block.a) z *= inv;

        Sector sec;
        sec.k = static_cast<int>(k);
        sec.weight = weight;
        sec.block = std::move(block);
        out.sectors.push_back(std::move(sec));
    }
}

/// Reduction of the ordered state: uniform mixture over distinct orderings of
/// the factor list; every S/E assignment pattern is its own sector. Each
/// summand is a pure product, so a pattern block is the Kronecker product of
/// the per-position system projectors weighted by the environment norms.
inline void reduce_ordered(const ManyBodyState& st, ReducedState& out) {
    const std::size_t n = st.n_particles;
    const std::size_t ds = st.dim_s;

    // distinct orderings of the factor list
    std::vector<std::vector<std::size_t>> orderings;
    std::vector<std::size_t> current;
    std::vector<bool> used(n, false);
    auto rec = [&](auto&& self, std::size_t depth) -> void {
        if (depth == n) {
            orderings.push_back(current);
            return;
        }
        for (std::size_t cand = 0; cand < n; ++cand) {
            if (used[cand]) continue;
            bool dup = false;
            for (std::size_t prev = 0; prev < cand && !dup; ++prev)
                if (!used[prev] && st.factors[prev] == st.factors[cand]) dup = true;
            if (dup) continue;
            used[cand] = true;
            current.push_back(cand);
            self(self, depth + 1);
            current.pop_back();
            used[cand] = false;
        }
    };
    rec(rec, 0);
    const double mix = 1.0 / static_cast<double>(orderings.size());

    // per-factor system vectors, environment weights and norms
    std::vector<std::vector<cdouble>> svec(n);
    std::vector<double> ew(n), nrm2(n);
    for (std::size_t o = 0; o < n; ++o) {
        svec[o].assign(ds, cdouble{});
        double sw = 0.0;
        for (std::size_t x = 0; x < ds; ++x) {
            svec[o][x] = st.factors[o][x];
            sw += std::norm(st.factors[o][x]);
        }
        nrm2[o] = 0.0;
        for (std::size_t x = 0; x < st.factor_dim; ++x) nrm2[o] += std::norm(st.factors[o][x]);
        ew[o] = nrm2[o] - sw;
    }

    std::map<std::pair<int, std::uint32_t>, std::pair<double, CMatrix>> acc;
    const std::uint32_t npat = 1u << n;
    for (const auto& ord : orderings) {
        for (std::uint32_t pat = 0; pat < npat; ++pat) {
            const int k = popcount32(pat);
            const std::size_t bdim = ipow(ds, static_cast<std::size_t>(k));
            if (bdim > st.limits.max_block_dim)
                throw resource_error("reduce_system: sector block dimension exceeds the guard");
            double env_w = mix;
            bool dead = false;
            for (std::size_t p = 0; p < n && !dead; ++p) {
                if (!(pat >> p & 1u)) {
                    env_w *= ew[ord[p]];
                    if (env_w <= 1e-300) dead = true;
                }
            }
            if (dead || env_w <= 0.0) continue;

            // Kronecker product of the system projectors along set bits
            CMatrix block(1);
            block(0, 0) = 1.0;
            for (std::size_t p = 0; p < n; ++p) {
                if (!(pat >> p & 1u)) continue;
                const auto& v = svec[ord[p]];
                CMatrix grown(block.n * ds);
                for (std::size_t i = 0; i < block.n; ++i)
                    for (std::size_t j = 0; j < block.n; ++j)
                        for (std::size_t x = 0; x < ds; ++x)
                            for (std::size_t y = 0; y < ds; ++y)
                                grown(i * ds + x, j * ds + y) = block(i, j) * v[x] * std::conj(v[y]);
                block = std::move(grown);
            }
            const double tr = std::real(trace(block));
            const double w = env_w * tr;
            if (w <= 1e-30) continue;

            auto& slot = acc[{k, pat}];
            if (slot.second.n == 0) slot.second = CMatrix(bdim);
            slot.first += w;
            const double f = env_w;
            for (std::size_t i = 0; i < block.a.size(); ++i) slot.second.a[i] += f * block.a[i];
        }
    }

    for (auto& [key, val] : acc) {
        Sector sec;
        sec.k = key.first;
        sec.pattern = key.second;
        sec.has_pattern = true;
        sec.weight = val.first;
        const double inv = 1.0 / std::real(trace(val.second));
        sec.block = std::move(val.second);
        for (auto& z : sec.block.a) z *= inv;
        out.sectors.push_back(std::move(sec));
    }
}

} // namespace detail

/// Environment partial trace into the block-diagonal sector form. Sectors of
/// identical particles are labeled by the particle count k; ordered states
/// keep their assignment patterns.
inline ReducedState reduce_system(const ManyBodyState& st) {
    ReducedState out;
    out.stats = st.stats;
    out.n_particles = st.n_particles;
    out.m_s = st.m_s;
    out.d_int = st.d_int;
    out.dim_s = st.dim_s;
    if (st.n_particles == 0) {
        Sector vac;
        vac.k = 0;
        vac.weight = 1.0;
        vac.block = CMatrix(1);
        vac.block(0, 0) = 1.0;
        out.sectors.push_back(std::move(vac));
        return out;
    }
    if (st.stats == Statistics::ordered)
        detail::reduce_ordered(st, out);
    else
        detail::reduce_symmetric(st, out);
    std::sort(out.sectors.begin(), out.sectors.end(), [](const Sector& a, const Sector& b) {
        return std::pair{a.k, a.pattern} < std::pair{b.k, b.pattern};
    });
    return out;
}

/// Probabilities P_0..P_N to find exactly k particles in the system.
inline std::vector<double> number_distribution(const ReducedState& red) {
    std::vector<double> p(red.n_particles + 1, 0.0);
    for (const auto& s : red.sectors) p[static_cast<std::size_t>(s.k)] += s.weight;
    return p;
}

/// Sectors merged by particle count: patterns of equal k are summed on the
/// common retained-position product space. Blocks come out unit trace.
inline std::map<int, std::pair<double, CMatrix>> k_merged_sectors(const ReducedState& red) {
    std::map<int, std::pair<double, CMatrix>> out;
    for (const auto& s : red.sectors) {
        auto& slot = out[s.k];
        if (slot.second.n == 0) slot.second = CMatrix(s.block.n);
        slot.first += s.weight;
        for (std::size_t i = 0; i < s.block.a.size(); ++i) slot.second.a[i] += s.weight * s.block.a[i];
    }
    for (auto& [k, val] : out) {
        if (val.first > 0.0) {
            const double inv = 1.0 / val.first;
            for (auto& z : val.second.a) z *= inv;
        }
    }
    return out;
}

namespace detail {

/// Partial trace of a k-factor block, keeping the factor positions in
/// keep_mask (bit p = position p retained), positions in ascending order.
inline CMatrix partial_trace_keep(const CMatrix& block, std::size_t k, std::size_t ds,
                                  std::uint32_t keep_mask) {
    std::vector<std::size_t> keep, drop;
    for (std::size_t p = 0; p < k; ++p)
        ((keep_mask >> p) & 1u ? keep : drop).push_back(p);
    const std::size_t kp = keep.size();
    const std::size_t rdim = ipow(ds, kp);
    const std::size_t tdim = ipow(ds, drop.size());
    CMatrix out(rdim);

    std::vector<std::size_t> digits_r(k), digits_c(k);
    for (std::size_t r = 0; r < rdim; ++r) {
        std::size_t tmp = r;
        for (std::size_t i = kp; i-- > 0;) {
            digits_r[keep[i]] = tmp % ds;
            tmp /= ds;
        }
        for (std::size_t c = 0; c < rdim; ++c) {
            std::size_t t2 = c;
            for (std::size_t i = kp; i-- > 0;) {
                digits_c[keep[i]] = t2 % ds;
                t2 /= ds;
            }
            cdouble acc{};
            for (std::size_t t = 0; t < tdim; ++t) {
                std::size_t t3 = t;
                for (std::size_t i = drop.size(); i-- > 0;) {
                    const std::size_t dg = t3 % ds;
                    t3 /= ds;
                    digits_r[drop[i]] = dg;
                    digits_c[drop[i]] = dg;
                }
                std::size_t row = 0, col = 0;
                for (std::size_t p = 0; p < k; ++p) {
                    row = row * ds + digits_r[p];
                    col = col * ds + digits_c[p];
                }
                acc += block(row, col);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

/// Uniform average over all C(k, kp) retained subsets.
inline CMatrix subset_average_trace(const CMatrix& block, std::size_t k, std::size_t ds, std::size_t kp) {
    const std::size_t rdim = ipow(ds, kp);
    CMatrix acc(rdim);
    std::size_t count = 0;
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        if (static_cast<std::size_t>(popcount32(mask)) != kp) continue;
        const CMatrix one = partial_trace_keep(block, k, ds, mask);
        for (std::size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += one.a[i];
        ++count;
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& z : acc.a) z *= inv;
    return acc;
}

} // namespace detail

/// Reduced single-particle density matrix: the vacuum weight P_0 plus the
/// subnormalized one-particle block with trace 1 - P_0.
struct Rspdm {
    double vacuum_weight = 0.0;
    CMatrix one_particle_block;  ///< dim m_s * d_int, subnormalized
    std::size_t m_s = 0, d_int = 1;
    std::size_t dim_s = 0;
};

inline Rspdm rspdm(const ReducedState& red) {
    Rspdm out;
    out.m_s = red.m_s;
    out.d_int = red.d_int;
    out.dim_s = red.dim_s;
    out.one_particle_block = CMatrix(red.dim_s);
    for (const auto& [k, wb] : k_merged_sectors(red)) {
        if (k == 0) {
            out.vacuum_weight += wb.first;
            continue;
        }
        const CMatrix one = (k == 1) ? wb.second
                                     : detail::subset_average_trace(wb.second, static_cast<std::size_t>(k),
                                                                    red.dim_s, 1);
        for (std::size_t i = 0; i < one.a.size(); ++i)
            out.one_particle_block.a[i] += wb.first * one.a[i];
    }
    return out;
}

/// Result of tracing every sector down to kp retained factors. Sectors with
/// fewer than kp particles collapse into a residual weight so that compared
/// states remain co-normalized.
struct KpReduction {
    int kp = 0;
    std::size_t m_s = 0, d_int = 1;
    std::size_t dim_s = 0;
    double residual_weight = 0.0;
    /// per original particle count: weight and the unit-trace kp-particle block
    std::vector<std::pair<int, std::pair<double, CMatrix>>> sectors;

    /// Subnormalized kp-particle matrix, trace = 1 - residual_weight.
    CMatrix merged() const {
        CMatrix m(detail::ipow(dim_s, static_cast<std::size_t>(kp)));
        for (const auto& [k, wb] : sectors)
            for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] += wb.first * wb.second.a[i];
        return m;
    }
};

inline KpReduction reduce_k_particles(const ReducedState& red, int kp) {
    if (kp < 1 || static_cast<std::size_t>(kp) > red.n_particles)
        throw domain_error("reduce_k_particles: kp must satisfy 1 <= kp <= N");
    KpReduction out;
    out.kp = kp;
    out.m_s = red.m_s;
    out.d_int = red.d_int;
    out.dim_s = red.dim_s;
    for (const auto& [k, wb] : k_merged_sectors(red)) {
        if (k < kp) {
            out.residual_weight += wb.first;
            continue;
        }
        CMatrix reduced = (k == kp) ? wb.second
                                    : detail::subset_average_trace(wb.second, static_cast<std::size_t>(k),
                                                                   red.dim_s, static_cast<std::size_t>(kp));
        out.sectors.push_back({k, {wb.first, std::move(reduced)}});
    }
    return out;
}

} // namespace nmmb
