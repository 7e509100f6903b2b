#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sqpr/freqan.hpp"

using namespace sqpr;
using cplx = std::complex<double>;

namespace {

SampledSignal makeSignal(const std::vector<SpectralLine>& lines, std::size_t n, double dt,
                         double t0 = 0.0) {
    SampledSignal sig;
    sig.dt = dt;
    sig.t0 = t0;
    sig.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + dt * static_cast<double>(i);
        cplx v = 0.0;
        for (const auto& l : lines) v += l.eval(t);
        sig.values[i] = v;
    }
    return sig;
}

} // namespace

TEST_CASE("projection: in-grid tone without window is exact") {
    const std::size_t n = 1 << 12;
    const double dt = 0.5;
    const double omega = 2.0 * std::numbers::pi * 37.0 / (dt * static_cast<double>(n));
    SpectralLine tone{omega, 1.75, 0.4, std::nullopt};
    const SampledSignal sig = makeSignal({tone}, n, dt);
    const cplx p = projection(sig, omega, false);
    REQUIRE(std::abs(p) == Catch::Approx(1.75).epsilon(1e-13));
    REQUIRE(std::arg(p) == Catch::Approx(0.4).margin(1e-13));
}

TEST_CASE("frequency refinement: pure tone") {
    const std::size_t n = 1 << 16;
    const double dt = 1.0;
    SpectralLine tone{0.3, 2.2, 1.0, std::nullopt};
    const SampledSignal sig = makeSignal({tone}, n, dt);
    const SpectralLine got = refineFrequency(sig, 0.3 + 0.4 * sig.fourierBin());
    REQUIRE(got.omega == Catch::Approx(0.3).margin(1e-10));
    REQUIRE(got.A == Catch::Approx(2.2).margin(1e-8));
    REQUIRE(got.theta == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("frequency refinement: dominant of two close tones") {
    const std::size_t n = 1 << 16;
    SpectralLine t1{0.3, 1.0, 0.7, std::nullopt};
    SpectralLine t2{0.31, 0.1, 2.0, std::nullopt};
    const SampledSignal sig = makeSignal({t1, t2}, n, 1.0);
    const SpectralLine got = refineFrequency(sig, 0.3);
    REQUIRE(got.omega == Catch::Approx(0.3).margin(1e-8));
}

TEST_CASE("frequency refinement: robust to white noise at high SNR") {
    const std::size_t n = 1 << 15;
    SpectralLine tone{0.27, 1.0, 0.2, std::nullopt};
    for (unsigned seed = 1; seed <= 3; ++seed) {
        SampledSignal sig = makeSignal({tone}, n, 1.0);
        std::mt19937 rng(seed);
        std::normal_distribution<double> g(0.0, 1e-6);
        for (auto& v : sig.values) v += cplx(g(rng), g(rng));
        const SpectralLine got = refineFrequency(sig, 0.27 + 0.3 * sig.fourierBin());
        REQUIRE(got.omega == Catch::Approx(0.27).margin(1e-7));
    }
}

TEST_CASE("decomposition: three separated tones recovered, residual monotone") {
    const std::size_t n = 1 << 15;
    std::vector<SpectralLine> truth{{0.21, 1.3, 0.5, std::nullopt},
                                    {-0.07, 0.6, 2.9, std::nullopt},
                                    {0.44, 0.05, 4.0, std::nullopt}};
    const SampledSignal sig = makeSignal(truth, n, 1.0);

    REQUIRE(decompose(sig, 0).empty());

    bool early = false;
    const auto lines = decompose(sig, 3, &early);
    REQUIRE(lines.size() == 3);
    REQUIRE_FALSE(early);
    for (const auto& t : truth) {
        bool found = false;
        for (const auto& l : lines)
            if (std::abs(l.omega - t.omega) < 1e-8) {
                found = true;
                REQUIRE(l.A == Catch::Approx(t.A).margin(1e-7));
                REQUIRE(std::remainder(l.theta - t.theta, 2.0 * std::numbers::pi) ==
                        Catch::Approx(0.0).margin(1e-6));
            }
        REQUIRE(found);
    }

    // reconstruction accuracy
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = sig.dt * static_cast<double>(i);
        cplx model = 0.0;
        for (const auto& l : lines) model += l.eval(t);
        num += std::norm(sig.values[i] - model);
        den += std::norm(sig.values[i]);
    }
    REQUIRE(std::sqrt(num / den) <= 1e-6);
}

TEST_CASE("harmonic identification against the fundamental frequencies") {
    const std::array<double, 3> w{-2.43699358194622660e-3, -1.04278712796661375e-3,
                                  4.88477275490260560e-3};
    std::vector<SpectralLine> lines(3);
    lines[0].omega = w[0];
    lines[1].omega = 2.0 * w[0] - w[2];
    lines[2].omega = 0.1234567; // incommensurable at this order
    const auto labeled = identifyHarmonics(lines, w, 12, 1e-7);
    REQUIRE(labeled[0].k.has_value());
    REQUIRE(*labeled[0].k == std::array<int, 3>{1, 0, 0});
    REQUIRE(labeled[1].k.has_value());
    REQUIRE(*labeled[1].k == std::array<int, 3>{2, 0, -1});
    REQUIRE_FALSE(labeled[2].k.has_value());
}
