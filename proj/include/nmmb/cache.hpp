#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"
#include "nmmb/spectral.hpp"

namespace nmmb {

/// Spectral-basis disk cache. Binary layout:
///   magic "NMMB1"
///   h, l, b, r, v0, e_cut         six little-endian float64
///   node count, mode count        two little-endian uint64
///   energies                      mode-count float64
///   modes                         mode-count x node-count float64, row-major
///                                 (one mode's nodal vector per row)
/// The header fields are the cache key; any mismatch means recompute.
namespace cache {

static_assert(std::endian::native == std::endian::little,
              "cache serialization assumes a little-endian host");

namespace detail {

inline void put_f64(std::string& out, double v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

inline void put_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string header_bytes(const PotentialSpec& spec, double h, double e_cut) {
    std::string out;
    put_f64(out, h);
    put_f64(out, spec.l);
    put_f64(out, spec.b);
    put_f64(out, spec.r);
    put_f64(out, spec.v0);
    put_f64(out, e_cut);
    return out;
}

} // namespace detail

inline std::filesystem::path basis_path(const std::filesystem::path& dir, const PotentialSpec& spec,
                                        double h, double e_cut) {
    char name[64];
    std::snprintf(name, sizeof(name), "basis-%016llx.nmmb",
                  static_cast<unsigned long long>(detail::fnv1a(detail::header_bytes(spec, h, e_cut))));
    return dir / name;
}

inline void save_basis(const SpectralBasis& basis, const std::filesystem::path& dir) {
    const auto& fem = *basis.fem;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const auto path = basis_path(dir, fem.spec, fem.h, basis.e_cut);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cache: cannot open " + path.string() + " for writing");

    std::string head = "NMMB1";
    head += detail::header_bytes(fem.spec, fem.h, basis.e_cut);
    detail::put_u64(head, basis.node_count());
    detail::put_u64(head, basis.mode_count());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(basis.energies.data()),
              static_cast<std::streamsize>(basis.energies.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(basis.modes.data()),
              static_cast<std::streamsize>(basis.modes.size() * sizeof(double)));
    if (!out) throw io_error("cache: short write to " + path.string());
}

/// Load a basis if a cache file with the exact header exists; the FemSystem is
/// reassembled from the spec (cheap next to the eigensolve).
inline std::optional<SpectralBasis> load_basis(const std::filesystem::path& dir,
                                               const PotentialSpec& spec, double h, double e_cut) {
    const auto path = basis_path(dir, spec, h, e_cut);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;

    char magic[5];
    if (!in.read(magic, 5) || std::string(magic, 5) != "NMMB1") return std::nullopt;
    const std::string want = detail::header_bytes(spec, h, e_cut);
    std::string got(want.size(), '\0');
    if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != want)
        return std::nullopt;

    std::uint64_t nodes = 0, modes = 0;
    if (!in.read(reinterpret_cast<char*>(&nodes), 8)) return std::nullopt;
    if (!in.read(reinterpret_cast<char*>(&modes), 8)) return std::nullopt;

    SpectralBasis basis;
    basis.e_cut = e_cut;
    basis.fem = std::make_shared<const FemSystem>(assemble_fem(spec, h));
    if (basis.fem->size() != nodes) return std::nullopt;
    basis.energies.resize(modes);
    basis.modes.resize(modes * nodes);
    if (!in.read(reinterpret_cast<char*>(basis.energies.data()),
                 static_cast<std::streamsize>(modes * sizeof(double))))
        return std::nullopt;
    if (!in.read(reinterpret_cast<char*>(basis.modes.data()),
                 static_cast<std::streamsize>(modes * nodes * sizeof(double))))
        return std::nullopt;
    return basis;
}

inline std::size_t clear(const std::filesystem::path& dir) {
    std::size_t removed = 0;
    std::error_code ec;
    if (!std::filesystem::exists(dir, ec)) return 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.path().extension() == ".nmmb") {
            std::filesystem::remove(entry.path(), ec);
            if (!ec) ++removed;
        }
    }
    return removed;
}

} // namespace cache
} // namespace nmmb
