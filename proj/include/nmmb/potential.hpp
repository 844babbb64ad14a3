#pragma once

#include "nmmb/errors.hpp"

namespace nmmb {

/// Geometry and barrier height of the asymmetric double well.
///
/// Natural units throughout: hbar = 1 and mass m = 1/2, so lengths are in L,
/// energies in 1/L^2 and times in L^2. The kinetic operator is -d^2/dx^2.
struct PotentialSpec {
    double l = 50.0;    ///< left (system) well width
    double b = 2.0;     ///< barrier width
    double r = 4000.0;  ///< right (environment) well width
    double v0 = 0.1;    ///< barrier height

    double total_length() const { return l + b + r; }

    void validate() const {
        if (!(l > 0.0)) throw config_error("potential: l must be > 0");
        if (!(b >= 0.0)) throw config_error("potential: b must be >= 0");
        if (!(r > 0.0)) throw config_error("potential: r must be > 0");
        if (!(v0 >= 0.0)) throw config_error("potential: v0 must be >= 0");
    }

    bool operator==(const PotentialSpec&) const = default;
};

/// V(x) of the piecewise-constant double well: 0 on [0,l), v0 on [l,l+b),
/// 0 on [l+b, l+b+r]. The hard walls at x = 0 and x = l+b+r are encoded by
/// Dirichlet boundary conditions of the discretization, not by a value.
inline double potential_value(const PotentialSpec& spec, double x) {
    if (x < 0.0 || x > spec.total_length())
        throw domain_error("potential_value: x outside [0, l+b+r]");
    if (x < spec.l) return 0.0;
    if (x < spec.l + spec.b) return spec.v0;
    return 0.0;
}

} // namespace nmmb
