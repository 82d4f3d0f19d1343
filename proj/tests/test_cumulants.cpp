#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "amc/cumulants.hpp"
#include "oracles.hpp"

using namespace amc;

TEST_CASE("constant frame y = 1 gives the hand-computed cumulants") {
    SymbolFrame f;
    f.scheme = ModulationScheme::QPSK;
    f.samples.assign(100, cplx(1.0, 0.0));
    const CumulantVector c = empirical_cumulants(f);
    CHECK(c.c20.real() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.c21.real() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.c40.real() == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(c.c41.real() == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(c.c42.real() == doctest::Approx(-2.0).epsilon(1e-14));

    SymbolFrame empty;
    CHECK_THROWS_AS(empirical_cumulants(empty), std::invalid_argument);
}

TEST_CASE("theoretical cumulants match the brute-force expectation oracle") {
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        const CumulantVector got = theoretical_cumulants(scheme);
        const oracle::Cumulants want = oracle::cumulants_brute_force(constellation(scheme));
        CHECK(std::abs(got.c20 - want.c20) < 1e-12);
        CHECK(std::abs(got.c21 - want.c21) < 1e-12);
        CHECK(std::abs(got.c40 - want.c40) < 1e-12);
        CHECK(std::abs(got.c41 - want.c41) < 1e-12);
        CHECK(std::abs(got.c42 - want.c42) < 1e-12);
        // real-by-construction statistics and the unit-energy invariant
        CHECK(std::abs(got.c21.imag()) < 1e-12);
        CHECK(std::abs(got.c42.imag()) < 1e-12);
        CHECK(got.c21.real() >= 0.0);
        CHECK(std::abs(got.c21.real() - 1.0) < 1e-13);
    }
}

TEST_CASE("known theoretical values per scheme") {
    const CumulantVector qpsk = theoretical_cumulants(ModulationScheme::QPSK);
    CHECK(qpsk.c40.real() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(qpsk.c40.imag()) < 1e-12);
    CHECK(qpsk.c42.real() == doctest::Approx(-1.0).epsilon(1e-12));

    const CumulantVector psk8 = theoretical_cumulants(ModulationScheme::PSK8);
    CHECK(std::abs(psk8.c40) < 1e-12);
    CHECK(psk8.c42.real() == doctest::Approx(-1.0).epsilon(1e-12));

    const CumulantVector qam16 = theoretical_cumulants(ModulationScheme::QAM16);
    CHECK(qam16.c42.real() == doctest::Approx(-0.68).epsilon(1e-12));

    const CumulantVector qam64 = theoretical_cumulants(ModulationScheme::QAM64);
    CHECK(qam64.c42.real() == doctest::Approx(-13.0 / 21.0).epsilon(1e-12));
}

TEST_CASE("empirical cumulants converge on noiseless frames") {
    Rng rng(100);
    const SymbolFrame qpsk = generate_frame(ModulationScheme::QPSK, 1000000, rng);
    CHECK(std::abs(empirical_cumulants(qpsk).c42.real() - (-1.0)) < 0.01);

    const SymbolFrame psk8 = generate_frame(ModulationScheme::PSK8, 1000000, rng);
    CHECK(std::abs(empirical_cumulants(psk8).c40) < 0.01);
}

TEST_CASE("estimator consistency: error shrinks as L grows") {
    for (int k = 0; k < kSchemeCount; ++k) {
        const auto scheme = static_cast<ModulationScheme>(k);
        const double truth = theoretical_cumulants(scheme).c42.real();
        double err[3] = {};
        const std::size_t lengths[3] = {1000, 10000, 100000};
        for (int li = 0; li < 3; ++li) {
            for (int trial = 0; trial < 50; ++trial) {
                Rng rng(derive_seed(900 + k, {static_cast<std::uint64_t>(li),
                                              static_cast<std::uint64_t>(trial)}));
                const SymbolFrame f = generate_frame(scheme, lengths[li], rng);
                err[li] += std::abs(empirical_cumulants(f).c42.real() - truth);
            }
            err[li] /= 50.0;
        }
        CHECK(err[0] > err[1]);
        CHECK(err[1] > err[2]);
    }
}

TEST_CASE("scale covariance: a^2 on C21, a^4 on C40 and C42") {
    Rng rng(200);
    SymbolFrame f = generate_frame(ModulationScheme::QAM16, 5000, rng);
    const CumulantVector base = empirical_cumulants(f);
    const double a = 1.7;
    SymbolFrame scaled = f;
    for (auto& y : scaled.samples) y *= a;
    const CumulantVector sc = empirical_cumulants(scaled);
    CHECK(std::abs(sc.c21.real() - a * a * base.c21.real()) < 1e-10);
    CHECK(std::abs(sc.c40 - std::pow(a, 4.0) * base.c40) < 1e-10);
    CHECK(std::abs(sc.c42.real() - std::pow(a, 4.0) * base.c42.real()) < 1e-10);
}

TEST_CASE("phase rotation: C21 and C42 fixed, C40 rotates by 4 theta") {
    Rng rng(201);
    SymbolFrame f = generate_frame(ModulationScheme::QAM64, 5000, rng);
    const CumulantVector base = empirical_cumulants(f);
    const double theta = 0.83;
    SymbolFrame rotated = f;
    const cplx phase(std::cos(theta), std::sin(theta));
    for (auto& y : rotated.samples) y *= phase;
    const CumulantVector rot = empirical_cumulants(rotated);
    CHECK(std::abs(rot.c21.real() - base.c21.real()) < 1e-10);
    CHECK(std::abs(rot.c42.real() - base.c42.real()) < 1e-10);
    CHECK(std::abs(std::abs(rot.c40) - std::abs(base.c40)) < 1e-10);
    const cplx expected_c40 = base.c40 * std::polar(1.0, 4.0 * theta);
    CHECK(std::abs(rot.c40 - expected_c40) < 1e-10);
}

TEST_CASE("classifier separates the schemes on noiseless frames") {
    Rng rng(300);
    const SymbolFrame f = generate_frame(ModulationScheme::QPSK, 100000, rng);
    const HocResult hoc = classify_hoc(f);
    CHECK(hoc.scheme == ModulationScheme::QPSK);
    CHECK(hoc.distances[0] < 1e-2);
    CHECK(hoc.distances[1] >= 0.99);  // |C40| gap of 1 to 8PSK

    // amplitude scaling cancels in the normalized feature space
    SymbolFrame scaled = f;
    for (auto& y : scaled.samples) y *= 3.0;
    CHECK(classify_hoc(scaled).scheme == ModulationScheme::QPSK);

    SymbolFrame zeros;
    zeros.samples.assign(16, cplx(0.0, 0.0));
    CHECK_THROWS_AS(classify_hoc(zeros), std::domain_error);
}

TEST_CASE("64QAM vs 16QAM: 100/100 at L = 1e6") {
    int correct = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(derive_seed(400, {static_cast<std::uint64_t>(trial)}));
        const SymbolFrame f = generate_frame(ModulationScheme::QAM64, 1000000, rng);
        if (classify_hoc(f).scheme == ModulationScheme::QAM64) ++correct;
    }
    CHECK(correct == 100);
}

TEST_CASE("phase-invariant option ignores a constellation rotation") {
    Rng rng(500);
    SymbolFrame f = generate_frame(ModulationScheme::QAM16, 100000, rng);
    const double theta = 0.4;  // not a symmetry angle
    for (auto& y : f.samples) y *= std::polar(1.0, theta);
    CHECK(classify_hoc(f, /*phase_invariant=*/true).scheme == ModulationScheme::QAM16);
}
