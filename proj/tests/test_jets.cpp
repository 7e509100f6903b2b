#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "sqpr/jets.hpp"

using namespace sqpr;
using cd = std::complex<double>;

TEST_CASE("jet space: slot layout and schedule") {
    JetSpace sp(3, 4);
    REQUIRE(sp.nslots() == 35); // C(3+4,4)
    REQUIRE(sp.degreeOf(0) == 0);
    // schedule covers exactly the monomial pairs with total degree <= 4
    REQUIRE(sp.mulSchedule().size() == 210u); // C(6+4,4)
    for (const auto& t : sp.mulSchedule()) REQUIRE(t.o >= 0);
}

TEST_CASE("jet multiplication matches polynomial identity") {
    JetSpace sp(2, 6);
    auto x = Jet<double>::variable(sp, 0);
    auto y = Jet<double>::variable(sp, 1);
    // (1 + x + y)^2 = 1 + 2x + 2y + x^2 + 2xy + y^2
    auto f = Jet<double>::constant(sp, 1.0) + x + y;
    auto g = mul(f, f);
    std::vector<double> d{0.3, -0.2};
    REQUIRE(g.evalAt(d) == Catch::Approx(std::pow(1.0 + 0.3 - 0.2, 2)).epsilon(1e-15));
    // associativity
    auto a = mul(mul(f, g), f);
    auto b = mul(f, mul(g, f));
    for (std::size_t s = 0; s < a.c.size(); ++s) REQUIRE(a.c[s] == Catch::Approx(b.c[s]).margin(1e-14));
}

TEST_CASE("jet chains reproduce composite functions (finite displacement oracle)") {
    JetSpace sp(3, 8);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> U(-0.05, 0.05);
    auto x = Jet<double>::variable(sp, 0, 0.7);
    auto y = Jet<double>::variable(sp, 1, -0.3);
    auto z = Jet<double>::variable(sp, 2, 0.4);
    // f = sin(x y) / sqrt(1 + z^2) + 1/(2 + x)
    auto xy = mul(x, y);
    Jet<double> s(sp), c(sp);
    sincosJet(xy, s, c);
    auto f = mul(s, rsqrtJet(mul(z, z) + 1.0)) + recipJet(x + 2.0 - 0.7 + 0.7); // x + 2
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> d{U(rng), U(rng), U(rng)};
        const double xv = 0.7 + d[0], yv = -0.3 + d[1], zv = 0.4 + d[2];
        const double exact = std::sin(xv * yv) / std::sqrt(1.0 + zv * zv) + 1.0 / (2.0 + xv);
        REQUIRE(f.evalAt(d) == Catch::Approx(exact).margin(2e-11));
    }
}

TEST_CASE("jet pow/rsqrt closed-form residuals") {
    JetSpace sp(4, 8);
    auto w = Jet<double>::variable(sp, 0, 0.0) * 0.3 + Jet<double>::variable(sp, 1, 0.0) * (-0.2);
    auto x = mul(w, w) + w + 2.0; // constant part 2
    auto r = rsqrtJet(x);
    auto check = mul(mul(r, r), x); // == 1 through the truncation order
    REQUIRE(std::abs(check.c[0] - 1.0) < 1e-15);
    double offDiag = 0.0;
    for (std::size_t s = 1; s < check.c.size(); ++s) offDiag = std::max(offDiag, std::abs(check.c[s]));
    REQUIRE(offDiag < 1e-13);

    Jet<double> sn(sp), cs(sp);
    sincosJet(w + 1.1, sn, cs);
    auto unit = mul(sn, sn) + mul(cs, cs);
    REQUIRE(std::abs(unit.c[0] - 1.0) < 1e-15);
    offDiag = 0.0;
    for (std::size_t s = 1; s < unit.c.size(); ++s) offDiag = std::max(offDiag, std::abs(unit.c[s]));
    REQUIRE(offDiag < 1e-13);
}

TEST_CASE("complex jets: exp(i x), conj, lift") {
    JetSpace sp4(2, 5);
    JetSpace sp8(4, 5);
    auto th = Jet<cd>::variable(sp4, 0, cd(0.9, 0.0));
    auto e = expIJet(th);
    std::vector<cd> d{cd(0.02, 0.0), cd(0.0, 0.0)};
    const cd exact = std::exp(cd(0.0, 1.0) * (0.9 + 0.02));
    REQUIRE(std::abs(e.evalAt(d) - exact) < 1e-12);

    auto ec = conjJet(e);
    REQUIRE(std::abs(ec.evalAt(d) - std::conj(exact)) < 1e-12);

    auto lifted = liftJet(e, sp8, 2);
    std::vector<cd> d8{cd(0.0, 0.0), cd(0.0, 0.0), cd(0.02, 0.0), cd(0.0, 0.0)};
    REQUIRE(std::abs(lifted.evalAt(d8) - exact) < 1e-12);
}
