#pragma once

#include <array>

#include "amc/modem.hpp"

namespace amc {

// Fourth-order cumulant statistics. c21 and c42 are real by construction
// but kept complex for uniformity.
struct CumulantVector {
    cplx c20{};
    cplx c21{};
    cplx c40{};
    cplx c41{};
    cplx c42{};
};

// Sample statistics over the frame:
//   C20 = mean(y^2)            C21 = mean(|y|^2)
//   C40 = mean(y^4)    - 3 C20^2
//   C41 = mean(y^3 y*) - 3 C20 C21
//   C42 = mean(|y|^4)  - |C20|^2 - 2 C21^2
// Throws std::invalid_argument on an empty frame.
CumulantVector empirical_cumulants(const SymbolFrame& frame);

// Exact expectations by direct averaging over the unit-energy constellation.
CumulantVector theoretical_cumulants(ModulationScheme s);

struct HocResult {
    ModulationScheme scheme = ModulationScheme::QPSK;
    std::array<double, kSchemeCount> distances{};
};

// Nearest-theoretical-value classifier. Scale is removed by dividing C40
// and C42 by C21^2; distance is Euclidean over (Re C40, Im C40, C42).
// With phase_invariant set, Re/Im of C40 are replaced by |C40| so a phase
// rotation of the frame cannot move the feature point.
// Throws std::invalid_argument on an empty frame and std::domain_error
// when C21 == 0 (degenerate all-zero input).
HocResult classify_hoc(const SymbolFrame& frame, bool phase_invariant = false);

}  // namespace amc
