#include "amc/cumulants.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace amc {

namespace {

CumulantVector cumulants_of(const std::vector<cplx>& samples) {
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    cplx m2{}, m4{}, m31{};
    double m21 = 0.0, m42 = 0.0;
    for (const cplx& y : samples) {
        const cplx y2 = y * y;
        const double a2 = std::norm(y);  // |y|^2
        m2 += y2;
        m21 += a2;
        m4 += y2 * y2;
        m31 += y2 * y * std::conj(y);
        m42 += a2 * a2;
    }
    m2 *= inv_n;
    m21 *= inv_n;
    m4 *= inv_n;
    m31 *= inv_n;
    m42 *= inv_n;

    CumulantVector c;
    c.c20 = m2;
    c.c21 = cplx(m21, 0.0);
    c.c40 = m4 - 3.0 * m2 * m2;
    c.c41 = m31 - 3.0 * m2 * m21;
    c.c42 = cplx(m42 - std::norm(m2) - 2.0 * m21 * m21, 0.0);
    return c;
}

}  // namespace

CumulantVector empirical_cumulants(const SymbolFrame& frame) {
    if (frame.samples.empty())
        throw std::invalid_argument("empirical_cumulants: empty frame");
    return cumulants_of(frame.samples);
}

CumulantVector theoretical_cumulants(ModulationScheme s) {
    return cumulants_of(constellation(s));
}

HocResult classify_hoc(const SymbolFrame& frame, bool phase_invariant) {
    const CumulantVector emp = empirical_cumulants(frame);
    const double c21 = emp.c21.real();
    if (c21 == 0.0)
        throw std::domain_error("classify_hoc: C21 = 0, degenerate all-zero frame");
    const double inv = 1.0 / (c21 * c21);

    double f0, f1;
    if (phase_invariant) {
        f0 = std::abs(emp.c40) * inv;
        f1 = 0.0;
    } else {
        f0 = emp.c40.real() * inv;
        f1 = emp.c40.imag() * inv;
    }
    const double f2 = emp.c42.real() * inv;

    HocResult result;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        const CumulantVector theo = theoretical_cumulants(scheme);  // C21 == 1 by construction
        double t0, t1;
        if (phase_invariant) {
            t0 = std::abs(theo.c40);
            t1 = 0.0;
        } else {
            t0 = theo.c40.real();
            t1 = theo.c40.imag();
        }
        const double t2 = theo.c42.real();
        const double d = (f0 - t0) * (f0 - t0) + (f1 - t1) * (f1 - t1) + (f2 - t2) * (f2 - t2);
        result.distances[k] = std::sqrt(d);
        if (d < best) {  // strict: ties keep the earlier scheme
            best = d;
            result.scheme = scheme;
        }
    }
    return result;
}

}  // namespace amc
