#include "amc/modem.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace amc {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<cplx> square_qam(int side, double scale) {
    std::vector<cplx> pts;
    pts.reserve(static_cast<std::size_t>(side) * side);
    for (int qi = 0; qi < side; ++qi) {
        for (int ii = 0; ii < side; ++ii) {
            const double i = static_cast<double>(2 * ii - side + 1);
            const double q = static_cast<double>(2 * qi - side + 1);
            pts.emplace_back(i / scale, q / scale);
        }
    }
    return pts;
}

std::vector<cplx> make_constellation(ModulationScheme s) {
    switch (s) {
        case ModulationScheme::QPSK: {
            const double u = std::sqrt(0.5);
            return {{u, u}, {-u, u}, {-u, -u}, {u, -u}};
        }
        case ModulationScheme::PSK8: {
            // axis and diagonal points written out so every |c| is exact
            const double u = std::sqrt(0.5);
            return {{1, 0}, {u, u}, {0, 1}, {-u, u}, {-1, 0}, {-u, -u}, {0, -1}, {u, -u}};
        }
        case ModulationScheme::QAM16:
            // {+-1,+-3}^2 has mean power 10
            return square_qam(4, std::sqrt(10.0));
        case ModulationScheme::QAM64:
            // {+-1,..,+-7}^2 has mean power 42
            return square_qam(8, std::sqrt(42.0));
    }
    throw std::invalid_argument("unknown modulation scheme");
}

}  // namespace

const char* scheme_name(ModulationScheme s) {
    switch (s) {
        case ModulationScheme::QPSK: return "QPSK";
        case ModulationScheme::PSK8: return "8PSK";
        case ModulationScheme::QAM16: return "16QAM";
        case ModulationScheme::QAM64: return "64QAM";
    }
    return "?";
}

ModulationScheme scheme_from_name(const std::string& name) {
    if (name == "QPSK") return ModulationScheme::QPSK;
    if (name == "8PSK") return ModulationScheme::PSK8;
    if (name == "16QAM") return ModulationScheme::QAM16;
    if (name == "64QAM") return ModulationScheme::QAM64;
    throw std::invalid_argument("unknown modulation scheme: " + name);
}

int constellation_size(ModulationScheme s) {
    switch (s) {
        case ModulationScheme::QPSK: return 4;
        case ModulationScheme::PSK8: return 8;
        case ModulationScheme::QAM16: return 16;
        case ModulationScheme::QAM64: return 64;
    }
    return 0;
}

double rotational_symmetry(ModulationScheme s) {
    return s == ModulationScheme::PSK8 ? kPi / 4.0 : kPi / 2.0;
}

const std::vector<cplx>& constellation(ModulationScheme s) {
    static const std::vector<cplx> tables[kSchemeCount] = {
        make_constellation(ModulationScheme::QPSK),
        make_constellation(ModulationScheme::PSK8),
        make_constellation(ModulationScheme::QAM16),
        make_constellation(ModulationScheme::QAM64),
    };
    return tables[static_cast<int>(s)];
}

SymbolFrame generate_frame(ModulationScheme s, std::size_t length, Rng& rng) {
    if (length == 0) throw std::invalid_argument("generate_frame: length must be >= 1");
    const auto& pts = constellation(s);
    SymbolFrame frame;
    frame.scheme = s;
    frame.samples.resize(length);
    for (auto& y : frame.samples) y = pts[rng.uniform_int(pts.size())];
    return frame;
}

SymbolFrame apply_channel(const SymbolFrame& frame, const ChannelParams& params, Rng& rng) {
    SymbolFrame out;
    out.scheme = frame.scheme;
    out.samples.resize(frame.size());

    const double sigma2 = params.noiseless ? 0.0 : std::pow(10.0, -params.snr_db / 10.0);
    const double per_component = std::sqrt(sigma2 / 2.0);

    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        const double phase = 2.0 * kPi * params.f0 * n + params.theta0;
        cplx y = params.a * cplx(std::cos(phase), std::sin(phase)) * frame.samples[i];
        if (!params.noiseless) {
            double g0, g1;
            rng.gaussian_pair(g0, g1);
            y += cplx(per_component * g0, per_component * g1);
        }
        out.samples[i] = y;
    }
    return out;
}

ChannelParams sample_fading(const FadingDistribution& dist, Rng& rng) {
    if (!(dist.a_min > 0.0) || !(dist.a_min <= dist.a_max))
        throw std::invalid_argument("sample_fading: need 0 < a_min <= a_max");
    ChannelParams p;
    p.a = rng.uniform(dist.a_min, dist.a_max);
    p.theta0 = rng.uniform(-kPi, kPi);
    p.f0 = 0.0;
    return p;
}

void write_frame(std::ostream& out, const SymbolFrame& frame) {
    const std::uint8_t id = static_cast<std::uint8_t>(frame.scheme);
    const std::uint32_t len = static_cast<std::uint32_t>(frame.size());
    unsigned char hdr[5];
    hdr[0] = id;
    hdr[1] = static_cast<unsigned char>(len & 0xFF);
    hdr[2] = static_cast<unsigned char>((len >> 8) & 0xFF);
    hdr[3] = static_cast<unsigned char>((len >> 16) & 0xFF);
    hdr[4] = static_cast<unsigned char>((len >> 24) & 0xFF);
    out.write(reinterpret_cast<const char*>(hdr), 5);
    for (const cplx& y : frame.samples) {
        const double iq[2] = {y.real(), y.imag()};
        out.write(reinterpret_cast<const char*>(iq), sizeof iq);
    }
}

SymbolFrame read_frame(std::istream& in) {
    unsigned char hdr[5];
    in.read(reinterpret_cast<char*>(hdr), 5);
    if (!in) throw std::runtime_error("read_frame: truncated header");
    if (hdr[0] >= kSchemeCount) throw std::runtime_error("read_frame: bad scheme id");
    const std::uint32_t len = static_cast<std::uint32_t>(hdr[1]) |
                              (static_cast<std::uint32_t>(hdr[2]) << 8) |
                              (static_cast<std::uint32_t>(hdr[3]) << 16) |
                              (static_cast<std::uint32_t>(hdr[4]) << 24);
    SymbolFrame frame;
    frame.scheme = static_cast<ModulationScheme>(hdr[0]);
    frame.samples.resize(len);
    for (auto& y : frame.samples) {
        double iq[2];
        in.read(reinterpret_cast<char*>(iq), sizeof iq);
        if (!in) throw std::runtime_error("read_frame: truncated samples");
        y = cplx(iq[0], iq[1]);
    }
    return frame;
}

void write_frame_csv(std::ostream& out, const SymbolFrame& frame) {
    out << "n,I,Q\n";
    for (std::size_t i = 0; i < frame.size(); ++i)
        out << (i + 1) << ',' << frame.samples[i].real() << ',' << frame.samples[i].imag() << '\n';
}

std::uint64_t frame_hash(const SymbolFrame& frame) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    const std::uint8_t id = static_cast<std::uint8_t>(frame.scheme);
    h = fnv1a64(&id, 1, h);
    for (const cplx& y : frame.samples) {
        const double iq[2] = {y.real(), y.imag()};
        h = fnv1a64(iq, sizeof iq, h);
    }
    return h;
}

}  // namespace amc
