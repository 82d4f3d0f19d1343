#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "amc/modem.hpp"

namespace amc {

struct PolarSample {
    double r = 0.0;      // radius, >= 0
    double theta = 0.0;  // four-quadrant angle in [-pi, pi]
};

struct PolarFrame {
    ModulationScheme scheme = ModulationScheme::QPSK;
    std::vector<PolarSample> pairs;

    std::size_t size() const { return pairs.size(); }
};

// 2-D binning grid. Axis 1 maps to image rows, axis 2 to columns.
// Polar images put theta on rows and r on columns; I-Q images put
// Q on rows and I on columns.
struct GridSpec {
    double lo1 = 0.0, hi1 = 1.0;  // rows
    double lo2 = 0.0, hi2 = 1.0;  // cols
    int rows = 1, cols = 1;

    static GridSpec polar_default(int res = 36);     // theta [-pi,pi] x r [0,3]
    static GridSpec iq_default(int res = 64);        // Q [-3.5,3.5] x I [-3.5,3.5]
    static GridSpec ccn_input_default(int res = 16); // theta [-pi,pi] x r [0,6]

    std::size_t cells() const { return static_cast<std::size_t>(rows) * cols; }
    double bin_h() const { return (hi1 - lo1) / rows; }
    double bin_w() const { return (hi2 - lo2) / cols; }
};

struct ConstellationImage {
    GridSpec spec;
    std::vector<double> grid;  // rows*cols, row-major, all >= 0
    std::int64_t in_range_count = 0;

    double& at(int row, int col) { return grid[static_cast<std::size_t>(row) * spec.cols + col]; }
    double at(int row, int col) const { return grid[static_cast<std::size_t>(row) * spec.cols + col]; }
};

// r = sqrt(I^2 + Q^2), theta = atan2(Q, I); theta(0,0) defined as 0.
PolarFrame to_polar(const SymbolFrame& frame);

// I = r cos(theta), Q = r sin(theta).
SymbolFrame from_polar(const PolarFrame& polar);

// Hard histograms: integer counts per cell, half-open bins [edge_i, edge_{i+1}),
// last bin closed. Out-of-range pairs are dropped and excluded from
// in_range_count. Sum of cells == in_range_count exactly.
ConstellationImage histogram_polar(const PolarFrame& polar, const GridSpec& spec);
ConstellationImage histogram_iq(const SymbolFrame& frame, const GridSpec& spec);

// Hard histogram divided by its max cell so intensities lie in [0,1];
// an all-zero histogram stays zero. in_range_count keeps the raw count.
ConstellationImage rasterize_polar(const PolarFrame& polar, const GridSpec& spec);
ConstellationImage rasterize_iq(const SymbolFrame& frame, const GridSpec& spec);

// Differentiable rasterization: each in-range pair splats mass 1 over its
// <= 4 surrounding bin centers with bilinear weights in bin-coordinate
// space. Theta is treated circularly (row H-1 adjacent to row 0); the
// radius axis clamps splat coordinates to the outermost bin centers so
// every retained pair deposits exactly mass 1. Pairs with r outside
// [lo, hi) are dropped entirely, as in the hard path.
struct SplatEntry {
    std::int32_t cell = -1;  // flat row-major index, -1 = unused slot
    double weight = 0.0;
    double d_r = 0.0;      // d weight / d r
    double d_theta = 0.0;  // d weight / d theta
};

struct SoftImage {
    ConstellationImage image;                        // raw mass, not normalized
    std::vector<std::array<SplatEntry, 4>> partials; // per input pair (empty unless requested)

    // Accumulate dL/dr and dL/dtheta per pair from an upstream gradient
    // over cells. Dropped pairs get zero.
    void backward(const std::vector<double>& upstream,
                  std::vector<double>& d_r, std::vector<double>& d_theta) const;
};

SoftImage soft_rasterize_polar(const PolarFrame& polar, const GridSpec& spec,
                               bool want_partials = false);

// y = x / max(x); zero image maps to zero. Returns the argmax cell
// (-1 for a zero image) so callers can run the exact backward pass.
int normalize_by_max(ConstellationImage& image);

// VJP of normalize_by_max: upstream is dL/dy, raw the pre-normalization
// cells, argmax as returned above. Writes dL/dx into d_raw.
void normalize_by_max_backward(const std::vector<double>& upstream,
                               const std::vector<double>& raw, int argmax,
                               std::vector<double>& d_raw);

// 8-bit PGM, row-major (theta rows / r columns for polar grids).
void write_pgm(std::ostream& out, const ConstellationImage& image);
// float32 little-endian blob, row-major.
void write_f32_blob(std::ostream& out, const ConstellationImage& image);

}  // namespace amc
