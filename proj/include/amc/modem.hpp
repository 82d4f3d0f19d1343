#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "amc/rng.hpp"

namespace amc {

using cplx = std::complex<double>;

enum class ModulationScheme : std::uint8_t { QPSK = 0, PSK8 = 1, QAM16 = 2, QAM64 = 3 };

inline constexpr int kSchemeCount = 4;

const char* scheme_name(ModulationScheme s);
ModulationScheme scheme_from_name(const std::string& name);  // throws std::invalid_argument
int constellation_size(ModulationScheme s);

// Smallest rotation angle that maps the constellation onto itself
// (pi/2 for QPSK and the QAMs, pi/4 for 8PSK).
double rotational_symmetry(ModulationScheme s);

struct SymbolFrame {
    ModulationScheme scheme = ModulationScheme::QPSK;
    std::vector<cplx> samples;

    std::size_t size() const { return samples.size(); }
};

struct ChannelParams {
    double a = 1.0;        // amplitude factor, > 0
    double f0 = 0.0;       // frequency offset, cycles/sample
    double theta0 = 0.0;   // phase offset, radians
    double snr_db = 0.0;   // Es/N0 against unit signal energy
    bool noiseless = false;

    static ChannelParams clean(double a = 1.0, double f0 = 0.0, double theta0 = 0.0) {
        return ChannelParams{a, f0, theta0, 0.0, true};
    }
};

struct FadingDistribution {
    double a_min = 0.5;
    double a_max = 2.0;
    // theta0 is always uniform on [-pi, pi], f0 fixed at 0.
};

// Gray-coded standard constellation, scaled to exactly unit average energy.
const std::vector<cplx>& constellation(ModulationScheme s);

// L i.i.d. uniform draws from the constellation. Throws std::invalid_argument on L = 0.
SymbolFrame generate_frame(ModulationScheme s, std::size_t length, Rng& rng);

// y(n) = a * exp(j(2*pi*f0*n + theta0)) * s(n) + g(n), n starting at 1.
// Noise g is circular complex Gaussian with total variance 10^(-snr_db/10).
SymbolFrame apply_channel(const SymbolFrame& frame, const ChannelParams& params, Rng& rng);

// One block-fading draw: a ~ U[a_min, a_max], theta0 ~ U[-pi, pi], f0 = 0.
// snr_db is left at 0 for the caller to fill in.
ChannelParams sample_fading(const FadingDistribution& dist, Rng& rng);

// Flat binary format: u8 scheme id, u32 length (little endian), then
// 2L float64 samples interleaved I,Q.
void write_frame(std::ostream& out, const SymbolFrame& frame);
SymbolFrame read_frame(std::istream& in);  // throws std::runtime_error on malformed input
void write_frame_csv(std::ostream& out, const SymbolFrame& frame);

// Order-sensitive hash of the sample bytes plus the scheme id.
std::uint64_t frame_hash(const SymbolFrame& frame);

}  // namespace amc
