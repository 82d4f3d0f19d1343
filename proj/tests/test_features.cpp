#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "amc/features.hpp"
#include "oracles.hpp"

using namespace amc;

namespace {
constexpr double kPi = 3.14159265358979323846;

PolarFrame single_pair(double r, double theta) {
    PolarFrame f;
    f.pairs = {{r, theta}};
    return f;
}
}  // namespace

TEST_CASE("to_polar uses the four-quadrant angle") {
    SymbolFrame f;
    f.samples = {cplx(1, 0), cplx(0, 1), cplx(-1, -1), cplx(0, 0)};
    const PolarFrame p = to_polar(f);
    CHECK(p.pairs[0].r == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.pairs[0].theta == doctest::Approx(0.0));
    CHECK(p.pairs[1].r == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.pairs[1].theta == doctest::Approx(kPi / 2).epsilon(1e-15));
    CHECK(p.pairs[2].r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(p.pairs[2].theta == doctest::Approx(-3.0 * kPi / 4).epsilon(1e-15));
    CHECK(p.pairs[3].r == 0.0);
    CHECK(p.pairs[3].theta == 0.0);
}

TEST_CASE("from_polar inverts to_polar within 1e-12") {
    const SymbolFrame back = from_polar(single_pair(1.0, kPi));
    CHECK(std::abs(back.samples[0] - cplx(-1.0, 0.0)) < 1e-12);

    Rng rng(101);
    SymbolFrame f;
    f.samples.resize(500);
    for (auto& y : f.samples) y = cplx(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const SymbolFrame round = from_polar(to_polar(f));
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(round.samples[i] - f.samples[i]) < 1e-12);

    // polar -> iq -> polar on frames with r > 0
    PolarFrame p;
    for (int i = 0; i < 200; ++i)
        p.pairs.push_back({rng.uniform(0.01, 3.0), rng.uniform(-kPi, kPi)});
    const PolarFrame round2 = to_polar(from_polar(p));
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(std::abs(round2.pairs[i].r - p.pairs[i].r) < 1e-12);
        CHECK(std::abs(round2.pairs[i].theta - p.pairs[i].theta) < 1e-12);
    }
}

TEST_CASE("hard rasterization: empty, single pair, out-of-range drop") {
    const GridSpec grid = GridSpec::polar_default();

    const ConstellationImage empty = rasterize_polar(PolarFrame{}, grid);
    CHECK(empty.in_range_count == 0);
    for (double v : empty.grid) CHECK(v == 0.0);

    const ConstellationImage one = rasterize_polar(single_pair(1.5, 0.0), grid);
    CHECK(one.in_range_count == 1);
    int nonzero = 0;
    for (double v : one.grid)
        if (v != 0.0) {
            ++nonzero;
            CHECK(v == 1.0);
        }
    CHECK(nonzero == 1);

    PolarFrame out_of_range = single_pair(3.5, 0.0);
    const ConstellationImage dropped = rasterize_polar(out_of_range, grid);
    CHECK(dropped.in_range_count == 0);

    // r == hi is outside the half-open range
    CHECK(rasterize_polar(single_pair(3.0, 0.0), grid).in_range_count == 0);
}

TEST_CASE("noiseless QPSK fills exactly 4 polar cells") {
    Rng rng(5);
    const SymbolFrame f = generate_frame(ModulationScheme::QPSK, 1000, rng);
    const GridSpec grid = GridSpec::polar_default();
    const ConstellationImage img = rasterize_polar(to_polar(f), grid);
    CHECK(img.in_range_count == 1000);

    // expected bins by direct computation over the constellation points
    std::set<int> expected;
    for (const cplx& c : constellation(ModulationScheme::QPSK)) {
        const double r = std::abs(c);
        const double theta = std::atan2(c.imag(), c.real());
        const int row = static_cast<int>((theta - grid.lo1) / (grid.hi1 - grid.lo1) * grid.rows);
        const int col = static_cast<int>((r - grid.lo2) / (grid.hi2 - grid.lo2) * grid.cols);
        expected.insert(row * grid.cols + col);
    }
    CHECK(expected.size() == 4);

    std::set<int> got;
    for (std::size_t c = 0; c < img.grid.size(); ++c)
        if (img.grid[c] != 0.0) got.insert(static_cast<int>(c));
    CHECK(got == expected);
}

TEST_CASE("noiseless 16QAM fills exactly 16 iq cells at 64x64") {
    Rng rng(6);
    const SymbolFrame f = generate_frame(ModulationScheme::QAM16, 10000, rng);
    const ConstellationImage img = rasterize_iq(f, GridSpec::iq_default());
    int nonzero = 0;
    for (double v : img.grid)
        if (v != 0.0) ++nonzero;
    CHECK(nonzero == 16);
    CHECK(img.in_range_count == 10000);

    SymbolFrame outlier;
    outlier.samples = {cplx(4.0, 0.0)};
    CHECK(rasterize_iq(outlier, GridSpec::iq_default()).in_range_count == 0);
}

TEST_CASE("hard mass conservation is exact on random frames") {
    Rng rng(7);
    const GridSpec grid = GridSpec::polar_default();
    for (int trial = 0; trial < 50; ++trial) {
        PolarFrame f;
        const int n = 1 + static_cast<int>(rng.uniform_int(400));
        std::int64_t in_range = 0;
        for (int i = 0; i < n; ++i) {
            const double r = rng.uniform(0.0, 4.0);  // some beyond the grid
            f.pairs.push_back({r, rng.uniform(-kPi, kPi)});
            if (r < 3.0) ++in_range;
        }
        const ConstellationImage h = histogram_polar(f, grid);
        double sum = 0.0;
        for (double v : h.grid) sum += v;
        CHECK(sum == static_cast<double>(h.in_range_count));
        CHECK(h.in_range_count == in_range);
    }
}

TEST_CASE("rotation by whole theta bins circularly shifts the image rows") {
    Rng rng(8);
    const GridSpec grid = GridSpec::polar_default();
    PolarFrame f;
    for (int i = 0; i < 300; ++i)
        f.pairs.push_back({rng.uniform(0.05, 2.95), rng.uniform(-kPi, kPi)});

    const int k = 7;
    const double dtheta = k * (2.0 * kPi / grid.rows);
    PolarFrame shifted = f;
    for (auto& p : shifted.pairs) p.theta = std::remainder(p.theta + dtheta, 2.0 * kPi);

    const ConstellationImage a = histogram_polar(f, grid);
    const ConstellationImage b = histogram_polar(shifted, grid);
    REQUIRE(a.in_range_count == b.in_range_count);
    for (int row = 0; row < grid.rows; ++row)
        for (int col = 0; col < grid.cols; ++col)
            CHECK(b.at((row + k) % grid.rows, col) == a.at(row, col));
}

TEST_CASE("soft splat: bin centers, midpoints, mass conservation") {
    const GridSpec grid = GridSpec::polar_default();
    const double bw = grid.bin_w();
    const double bh = grid.bin_h();

    // exactly at a bin center: all mass in that bin
    const double rc = grid.lo2 + 12.5 * bw;
    const double tc = grid.lo1 + 20.5 * bh;
    SoftImage center = soft_rasterize_polar(single_pair(rc, tc), grid);
    CHECK(center.image.at(20, 12) == doctest::Approx(1.0).epsilon(1e-12));
    double sum = 0.0;
    for (double v : center.image.grid) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // midpoint between two adjacent radius bin centers: 0.5 / 0.5
    SoftImage mid = soft_rasterize_polar(single_pair(grid.lo2 + 13.0 * bw, tc), grid);
    CHECK(mid.image.at(20, 12) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mid.image.at(20, 13) == doctest::Approx(0.5).epsilon(1e-12));

    // random frame: total mass equals the in-range count
    Rng rng(9);
    PolarFrame f;
    for (int i = 0; i < 500; ++i)
        f.pairs.push_back({rng.uniform(0.0, 4.0), rng.uniform(-kPi, kPi)});
    SoftImage soft = soft_rasterize_polar(f, grid);
    sum = 0.0;
    for (double v : soft.image.grid) sum += v;
    CHECK(std::abs(sum - static_cast<double>(soft.image.in_range_count)) < 1e-9);
}

TEST_CASE("soft splat is circular across +-pi") {
    const GridSpec grid = GridSpec::polar_default();
    const double delta = 1e-9;
    SoftImage a = soft_rasterize_polar(single_pair(1.0, kPi - delta), grid);
    SoftImage b = soft_rasterize_polar(single_pair(1.0, -kPi + delta), grid);
    for (std::size_t c = 0; c < a.image.grid.size(); ++c)
        CHECK(std::abs(a.image.grid[c] - b.image.grid[c]) < 1e-7);
}

TEST_CASE("soft splat analytic Jacobian matches finite differences") {
    const GridSpec grid{-kPi, kPi, 0.0, 3.0, 8, 8};
    Rng rng(10);
    PolarFrame f;
    for (int i = 0; i < 40; ++i)
        f.pairs.push_back({rng.uniform(0.45, 2.55), rng.uniform(-3.0, 3.0)});

    SoftImage soft = soft_rasterize_polar(f, grid, /*want_partials=*/true);
    const std::size_t cells = grid.cells();

    double max_err = 0.0;
    const double eps = 1e-5;
    for (std::size_t k = 0; k < f.size(); ++k) {
        // dense analytic row for pair k
        std::vector<double> d_r(cells, 0.0), d_theta(cells, 0.0);
        for (const SplatEntry& e : soft.partials[k]) {
            if (e.cell < 0) continue;
            d_r[static_cast<std::size_t>(e.cell)] += e.d_r;
            d_theta[static_cast<std::size_t>(e.cell)] += e.d_theta;
        }
        for (int axis = 0; axis < 2; ++axis) {
            double* coord = axis == 0 ? &f.pairs[k].r : &f.pairs[k].theta;
            const double saved = *coord;
            *coord = saved + eps;
            const SoftImage hi = soft_rasterize_polar(f, grid);
            *coord = saved - eps;
            const SoftImage lo = soft_rasterize_polar(f, grid);
            *coord = saved;
            for (std::size_t c = 0; c < cells; ++c) {
                const double fd = (hi.image.grid[c] - lo.image.grid[c]) / (2.0 * eps);
                const double analytic = axis == 0 ? d_r[c] : d_theta[c];
                if (std::abs(fd) < 1e-12 && std::abs(analytic) < 1e-12) continue;
                max_err = std::max(max_err, oracle::rel_err(analytic, fd));
            }
        }
    }
    CHECK(max_err < 1e-6);
}

TEST_CASE("soft splat backward matches the dense Jacobian") {
    const GridSpec grid{-kPi, kPi, 0.0, 3.0, 6, 6};
    Rng rng(11);
    PolarFrame f;
    for (int i = 0; i < 25; ++i)
        f.pairs.push_back({rng.uniform(0.3, 2.7), rng.uniform(-3.0, 3.0)});
    SoftImage soft = soft_rasterize_polar(f, grid, true);

    std::vector<double> upstream(grid.cells());
    for (double& u : upstream) u = rng.uniform(-1.0, 1.0);
    std::vector<double> d_r, d_theta;
    soft.backward(upstream, d_r, d_theta);

    for (std::size_t k = 0; k < f.size(); ++k) {
        double want_r = 0.0, want_t = 0.0;
        for (const SplatEntry& e : soft.partials[k]) {
            if (e.cell < 0) continue;
            want_r += upstream[static_cast<std::size_t>(e.cell)] * e.d_r;
            want_t += upstream[static_cast<std::size_t>(e.cell)] * e.d_theta;
        }
        CHECK(d_r[k] == doctest::Approx(want_r).epsilon(1e-12));
        CHECK(d_theta[k] == doctest::Approx(want_t).epsilon(1e-12));
    }
}

TEST_CASE("soft rasterization is deterministic") {
    Rng rng(12);
    PolarFrame f;
    for (int i = 0; i < 200; ++i)
        f.pairs.push_back({rng.uniform(0.0, 3.0), rng.uniform(-kPi, kPi)});
    const SoftImage a = soft_rasterize_polar(f, GridSpec::polar_default());
    const SoftImage b = soft_rasterize_polar(f, GridSpec::polar_default());
    CHECK(a.image.grid == b.image.grid);
}

TEST_CASE("normalize_by_max and its backward pass") {
    ConstellationImage img;
    img.spec = GridSpec{0, 1, 0, 1, 2, 2};
    img.grid = {1.0, 4.0, 2.0, 0.0};
    img.in_range_count = 7;
    std::vector<double> raw = img.grid;
    const int argmax = normalize_by_max(img);
    CHECK(argmax == 1);
    CHECK(img.grid == std::vector<double>{0.25, 1.0, 0.5, 0.0});

    std::vector<double> upstream = {0.3, -0.7, 0.2, 0.9};
    std::vector<double> d_raw;
    normalize_by_max_backward(upstream, raw, argmax, d_raw);

    const double eps = 1e-6;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double fd = oracle::central_diff(&raw[i], eps, [&] {
            double mx = 0.0;
            for (double v : raw) mx = std::max(mx, v);
            double loss = 0.0;
            for (std::size_t c = 0; c < raw.size(); ++c)
                loss += upstream[c] * (mx > 0.0 ? raw[c] / mx : 0.0);
            return loss;
        });
        CHECK(oracle::rel_err(d_raw[i], fd) < 1e-6);
    }

    ConstellationImage zero;
    zero.spec = img.spec;
    zero.grid.assign(4, 0.0);
    CHECK(normalize_by_max(zero) == -1);
    for (double v : zero.grid) CHECK(v == 0.0);
}

TEST_CASE("PGM and float blob exports") {
    ConstellationImage img;
    img.spec = GridSpec{0, 1, 0, 1, 2, 3};
    img.grid = {0.0, 0.5, 1.0, 0.25, 0.75, 1.0};

    std::ostringstream pgm(std::ios::binary);
    write_pgm(pgm, img);
    const std::string bytes = pgm.str();
    CHECK(bytes.substr(0, 3) == "P5\n");
    CHECK(bytes.find("3 2\n255\n") != std::string::npos);
    const std::string pixels = bytes.substr(bytes.size() - 6);
    CHECK(static_cast<unsigned char>(pixels[0]) == 0);
    CHECK(static_cast<unsigned char>(pixels[2]) == 255);

    std::ostringstream blob(std::ios::binary);
    write_f32_blob(blob, img);
    CHECK(blob.str().size() == 6 * sizeof(float));
    float first[2];
    std::memcpy(first, blob.str().data(), sizeof first);
    CHECK(first[1] == 0.5f);
}
