#include "amc/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace amc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Bin index with half-open intervals; closed_hi additionally maps x == hi
// into the last bin (used for the theta axis, where atan2 can return +pi).
int bin_index(double x, double lo, double hi, int n, bool closed_hi) {
    if (x < lo) return -1;
    if (x >= hi) {
        if (closed_hi && x == hi) return n - 1;
        return -1;
    }
    int idx = static_cast<int>(std::floor((x - lo) / (hi - lo) * n));
    if (idx >= n) idx = n - 1;  // guards rounding at the top edge
    return idx;
}

// floor-mod for circular theta bins
int wrap_index(long long i, int n) {
    long long m = i % n;
    if (m < 0) m += n;
    return static_cast<int>(m);
}

ConstellationImage normalized_copy(ConstellationImage img) {
    normalize_by_max(img);
    return img;
}

}  // namespace

GridSpec GridSpec::polar_default(int res) {
    return GridSpec{-kPi, kPi, 0.0, 3.0, res, res};
}

GridSpec GridSpec::iq_default(int res) {
    return GridSpec{-3.5, 3.5, -3.5, 3.5, res, res};
}

GridSpec GridSpec::ccn_input_default(int res) {
    return GridSpec{-kPi, kPi, 0.0, 6.0, res, res};
}

PolarFrame to_polar(const SymbolFrame& frame) {
    PolarFrame polar;
    polar.scheme = frame.scheme;
    polar.pairs.resize(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double re = frame.samples[i].real();
        const double im = frame.samples[i].imag();
        PolarSample& p = polar.pairs[i];
        if (re == 0.0 && im == 0.0) {
            p.r = 0.0;
            p.theta = 0.0;
        } else {
            p.r = std::hypot(re, im);
            p.theta = std::atan2(im, re);
        }
    }
    return polar;
}

SymbolFrame from_polar(const PolarFrame& polar) {
    SymbolFrame frame;
    frame.scheme = polar.scheme;
    frame.samples.resize(polar.size());
    for (std::size_t i = 0; i < polar.size(); ++i) {
        const PolarSample& p = polar.pairs[i];
        frame.samples[i] = cplx(p.r * std::cos(p.theta), p.r * std::sin(p.theta));
    }
    return frame;
}

ConstellationImage histogram_polar(const PolarFrame& polar, const GridSpec& spec) {
    ConstellationImage img;
    img.spec = spec;
    img.grid.assign(spec.cells(), 0.0);
    for (const PolarSample& p : polar.pairs) {
        const int row = bin_index(p.theta, spec.lo1, spec.hi1, spec.rows, /*closed_hi=*/true);
        const int col = bin_index(p.r, spec.lo2, spec.hi2, spec.cols, /*closed_hi=*/false);
        if (row < 0 || col < 0) continue;
        img.at(row, col) += 1.0;
        ++img.in_range_count;
    }
    return img;
}

ConstellationImage histogram_iq(const SymbolFrame& frame, const GridSpec& spec) {
    ConstellationImage img;
    img.spec = spec;
    img.grid.assign(spec.cells(), 0.0);
    for (const cplx& y : frame.samples) {
        const int row = bin_index(y.imag(), spec.lo1, spec.hi1, spec.rows, false);
        const int col = bin_index(y.real(), spec.lo2, spec.hi2, spec.cols, false);
        if (row < 0 || col < 0) continue;
        img.at(row, col) += 1.0;
        ++img.in_range_count;
    }
    return img;
}

ConstellationImage rasterize_polar(const PolarFrame& polar, const GridSpec& spec) {
    return normalized_copy(histogram_polar(polar, spec));
}

ConstellationImage rasterize_iq(const SymbolFrame& frame, const GridSpec& spec) {
    return normalized_copy(histogram_iq(frame, spec));
}

SoftImage soft_rasterize_polar(const PolarFrame& polar, const GridSpec& spec, bool want_partials) {
    SoftImage soft;
    soft.image.spec = spec;
    soft.image.grid.assign(spec.cells(), 0.0);
    if (want_partials) soft.partials.assign(polar.size(), {});

    const double bin_h = spec.bin_h();
    const double bin_w = spec.bin_w();
    const int rows = spec.rows;
    const int cols = spec.cols;

    for (std::size_t k = 0; k < polar.size(); ++k) {
        const PolarSample& p = polar.pairs[k];
        if (p.r < spec.lo2 || p.r >= spec.hi2) continue;  // dropped, like the hard path
        ++soft.image.in_range_count;

        // Radius axis: fractional bin coordinate, clamped at the outer
        // centers so the full unit mass always lands on the grid.
        double u = (p.r - spec.lo2) / bin_w - 0.5;
        double du_dr = 1.0 / bin_w;
        if (u <= 0.0) { u = 0.0; du_dr = 0.0; }
        if (u >= cols - 1) { u = cols - 1; du_dr = 0.0; }
        const int i0 = std::min(static_cast<int>(std::floor(u)), cols - 2 >= 0 ? cols - 2 : 0);
        const int i1 = std::min(i0 + 1, cols - 1);
        const double fu = u - i0;

        // Theta axis: circular, bin row rows-1 is adjacent to row 0.
        const double v = (p.theta - spec.lo1) / bin_h - 0.5;
        const double fl = std::floor(v);
        const double fv = v - fl;
        const int j0 = wrap_index(static_cast<long long>(fl), rows);
        const int j1 = wrap_index(static_cast<long long>(fl) + 1, rows);
        const double dv_dtheta = 1.0 / bin_h;

        const double w00 = (1.0 - fv) * (1.0 - fu);
        const double w01 = (1.0 - fv) * fu;
        const double w10 = fv * (1.0 - fu);
        const double w11 = fv * fu;

        const std::int32_t c00 = j0 * cols + i0;
        const std::int32_t c01 = j0 * cols + i1;
        const std::int32_t c10 = j1 * cols + i0;
        const std::int32_t c11 = j1 * cols + i1;

        soft.image.grid[c00] += w00;
        soft.image.grid[c01] += w01;
        soft.image.grid[c10] += w10;
        soft.image.grid[c11] += w11;

        if (want_partials) {
            auto& e = soft.partials[k];
            e[0] = {c00, w00, -(1.0 - fv) * du_dr, -(1.0 - fu) * dv_dtheta};
            e[1] = {c01, w01, +(1.0 - fv) * du_dr, -fu * dv_dtheta};
            e[2] = {c10, w10, -fv * du_dr, +(1.0 - fu) * dv_dtheta};
            e[3] = {c11, w11, +fv * du_dr, +fu * dv_dtheta};
        }
    }
    return soft;
}

void SoftImage::backward(const std::vector<double>& upstream,
                         std::vector<double>& d_r, std::vector<double>& d_theta) const {
    if (upstream.size() != image.grid.size())
        throw std::invalid_argument("SoftImage::backward: upstream size mismatch");
    if (partials.empty() && image.in_range_count > 0)
        throw std::logic_error("SoftImage::backward: partials were not recorded");
    d_r.assign(partials.size(), 0.0);
    d_theta.assign(partials.size(), 0.0);
    for (std::size_t k = 0; k < partials.size(); ++k) {
        double gr = 0.0, gt = 0.0;
        for (const SplatEntry& e : partials[k]) {
            if (e.cell < 0) continue;
            const double up = upstream[static_cast<std::size_t>(e.cell)];
            gr += up * e.d_r;
            gt += up * e.d_theta;
        }
        d_r[k] = gr;
        d_theta[k] = gt;
    }
}

int normalize_by_max(ConstellationImage& image) {
    int argmax = -1;
    double best = 0.0;
    for (std::size_t c = 0; c < image.grid.size(); ++c) {
        if (image.grid[c] > best) {
            best = image.grid[c];
            argmax = static_cast<int>(c);
        }
    }
    if (argmax < 0) return -1;  // zero image stays zero
    const double inv = 1.0 / best;
    for (double& v : image.grid) v *= inv;
    return argmax;
}

void normalize_by_max_backward(const std::vector<double>& upstream,
                               const std::vector<double>& raw, int argmax,
                               std::vector<double>& d_raw) {
    d_raw.assign(raw.size(), 0.0);
    if (argmax < 0) return;
    const double m = raw[static_cast<std::size_t>(argmax)];
    const double inv = 1.0 / m;
    double dot = 0.0;
    for (std::size_t c = 0; c < raw.size(); ++c) {
        d_raw[c] = upstream[c] * inv;
        dot += upstream[c] * raw[c];
    }
    d_raw[static_cast<std::size_t>(argmax)] -= dot * inv * inv;
}

void write_pgm(std::ostream& out, const ConstellationImage& image) {
    out << "P5\n" << image.spec.cols << ' ' << image.spec.rows << "\n255\n";
    for (double v : image.grid) {
        const double clamped = std::clamp(v, 0.0, 1.0);
        const unsigned char byte = static_cast<unsigned char>(std::lround(clamped * 255.0));
        out.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

void write_f32_blob(std::ostream& out, const ConstellationImage& image) {
    for (double v : image.grid) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
}

}  // namespace amc
