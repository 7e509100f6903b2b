#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "sqpr/canon.hpp"
#include "test_util.hpp"

using namespace sqpr;
using sqpr::test::SeriesGen;

namespace {

TruncationPolicy pol(int deg = 12, int trig = 24, double drop = 1e-16) {
    TruncationPolicy p;
    p.maxActionDeg = deg;
    p.maxFourierStep = trig;
    p.harmonicUnit = 1;
    p.dropThreshold = drop;
    return p;
}

} // namespace

TEST_CASE("poincare variables: element round trip") {
    BodyParams bp;
    bp.m0 = 1.31;
    bp.m = 15.9792 * 9.5458e-4;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        OrbitalElements el;
        el.a = 0.05 + 3.0 * U(rng);
        el.e = 0.4 * U(rng) + 1e-4;
        el.inc = 0.6 * U(rng) + 1e-4;
        el.M = 2.0 * std::numbers::pi * U(rng) - std::numbers::pi;
        el.argPeri = 2.0 * std::numbers::pi * U(rng) - std::numbers::pi;
        el.node = 2.0 * std::numbers::pi * U(rng) - std::numbers::pi;
        const PoincareVars pv = poincareFromElements(bp, el);
        const OrbitalElements back = elementsFromPoincare(bp, pv);
        REQUIRE(back.a == Catch::Approx(el.a).epsilon(1e-12));
        REQUIRE(back.e == Catch::Approx(el.e).epsilon(1e-10).margin(1e-12));
        REQUIRE(back.inc == Catch::Approx(el.inc).epsilon(1e-10).margin(1e-12));
        auto wrap = [](double x) { return std::remainder(x, 2.0 * std::numbers::pi); };
        REQUIRE(wrap(back.node - el.node) == Catch::Approx(0.0).margin(1e-10));
        REQUIRE(wrap(back.argPeri - el.argPeri) == Catch::Approx(0.0).margin(1e-10));
        REQUIRE(wrap(back.M - el.M) == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("poincare variables: circular and planar limits") {
    BodyParams bp;
    bp.m = 9.9578 * 9.5458e-4;
    OrbitalElements el;
    el.a = 2.53;
    el.e = 0.0;
    el.inc = 0.3;
    el.node = 1.0;
    const PoincareVars pv = poincareFromElements(bp, el);
    REQUIRE(pv.xi == 0.0);
    REQUIRE(pv.eta == 0.0);
    REQUIRE(pv.P * pv.P + pv.Q * pv.Q > 0.0);
    el.e = 0.2;
    el.inc = 0.0;
    const PoincareVars pv2 = poincareFromElements(bp, el);
    REQUIRE(pv2.P == 0.0);
    REQUIRE(pv2.Q == 0.0);
}

TEST_CASE("lie stage: pointwise map equals the time-1 flow of the generator") {
    SeriesGen gen(1001);
    std::vector<PairKind> kinds{PairKind::actionAngle, PairKind::sqrtAction, PairKind::cartesian};
    auto chi = gen.randomSeries(3, kinds, pol(), 8, 3, 2, 2e-3);
    LieStage stage(chi);

    // flow: radial' = -dchi/d(angular), angular' = +dchi/d(radial), with
    // gradients taken by central differences of the series evaluation.
    auto grad = [&](const PointValues& z, int j, bool angular) {
        const double h = 1e-6;
        PointValues zp = z, zm = z;
        if (angular) {
            zp[static_cast<std::size_t>(j)].angular += h;
            zm[static_cast<std::size_t>(j)].angular -= h;
        } else {
            zp[static_cast<std::size_t>(j)].radial += h;
            zm[static_cast<std::size_t>(j)].radial -= h;
        }
        return (chi.evaluate(zp).real() - chi.evaluate(zm).real()) / (2.0 * h);
    };
    auto flow1 = [&](PointValues z) {
        const int nSteps = 200;
        const double h = 1.0 / nSteps;
        auto rhs = [&](const PointValues& y) {
            PointValues d{};
            for (int j = 0; j < 3; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                d[ju].radial = -grad(y, j, true);
                d[ju].angular = grad(y, j, false);
            }
            return d;
        };
        for (int s = 0; s < nSteps; ++s) {
            auto k1 = rhs(z);
            PointValues t{};
            for (std::size_t j = 0; j < 3; ++j)
                t[j] = {z[j].radial + 0.5 * h * k1[j].radial, z[j].angular + 0.5 * h * k1[j].angular};
            auto k2 = rhs(t);
            for (std::size_t j = 0; j < 3; ++j)
                t[j] = {z[j].radial + 0.5 * h * k2[j].radial, z[j].angular + 0.5 * h * k2[j].angular};
            auto k3 = rhs(t);
            for (std::size_t j = 0; j < 3; ++j)
                t[j] = {z[j].radial + h * k3[j].radial, z[j].angular + h * k3[j].angular};
            auto k4 = rhs(t);
            for (std::size_t j = 0; j < 3; ++j) {
                z[j].radial += h / 6.0 * (k1[j].radial + 2 * k2[j].radial + 2 * k3[j].radial + k4[j].radial);
                z[j].angular += h / 6.0 * (k1[j].angular + 2 * k2[j].angular + 2 * k3[j].angular + k4[j].angular);
            }
        }
        return z;
    };

    SeriesGen pts(2002);
    for (int rep = 0; rep < 5; ++rep) {
        ChartPoint z;
        z.dof = 3;
        z.kinds = {PairKind::actionAngle, PairKind::sqrtAction, PairKind::cartesian};
        z.z[0] = {pts.uniform(0.5, 1.5), pts.uniform(-3.0, 3.0)};
        z.z[1] = {pts.uniform(0.3, 1.0), pts.uniform(-3.0, 3.0)};
        z.z[2] = {pts.uniform(-1.0, 1.0), pts.uniform(-1.0, 1.0)};
        const ChartPoint mapped = stage.apply(z, false);
        const PointValues flowed = flow1(z.z);
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(mapped.z[j].radial == Catch::Approx(flowed[j].radial).margin(5e-8));
            const double da = std::remainder(mapped.z[j].angular - flowed[j].angular,
                                             2.0 * std::numbers::pi);
            REQUIRE(da == Catch::Approx(0.0).margin(5e-8));
        }
    }
}

TEST_CASE("canonical map: inverse round trip") {
    SeriesGen gen(555);
    std::vector<PairKind> kinds{PairKind::actionAngle, PairKind::actionAngle,
                                PairKind::sqrtAction};
    CanonicalMap map;
    map.addLieStage(gen.randomSeries(3, kinds, pol(), 6, 2, 2, 3e-3), "chi1");
    map.addLieStage(gen.randomSeries(3, kinds, pol(), 6, 2, 2, 2e-3), "chi2");
    map.addLieStage(gen.randomSeries(3, kinds, pol(), 6, 2, 2, 1e-3), "chi3");

    SeriesGen pts(556);
    for (int rep = 0; rep < 10; ++rep) {
        ChartPoint z;
        z.dof = 3;
        z.kinds = {PairKind::actionAngle, PairKind::actionAngle, PairKind::sqrtAction};
        z.z[0] = {pts.uniform(0.5, 1.5), pts.uniform(-3.0, 3.0)};
        z.z[1] = {pts.uniform(0.5, 1.5), pts.uniform(-3.0, 3.0)};
        z.z[2] = {pts.uniform(0.3, 1.0), pts.uniform(-3.0, 3.0)};
        const ChartPoint back = map.toNormalized(map.toOriginal(z));
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(back.z[j].radial == Catch::Approx(z.z[j].radial).margin(1e-9));
            REQUIRE(std::remainder(back.z[j].angular - z.z[j].angular, 2.0 * std::numbers::pi) ==
                    Catch::Approx(0.0).margin(1e-9));
        }
    }
}

TEST_CASE("reduction: round trip and symplecticity") {
    ReductionParams rp{0.013, 0.004, 0.21};
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    ChartPoint zr;
    zr.dof = 5;
    zr.kinds.fill(PairKind::actionAngle);
    for (int j = 0; j < 5; ++j)
        zr.z[static_cast<std::size_t>(j)] = {0.05 + 0.02 * U(rng), 2.0 * U(rng)};
    const ChartPoint ze = reductionToElliptic(rp, zr);
    const ChartPoint back = reductionFromElliptic(rp, ze);
    for (std::size_t j = 0; j < 5; ++j) {
        REQUIRE(back.z[j].radial == Catch::Approx(zr.z[j].radial).margin(1e-15));
        REQUIRE(back.z[j].angular == Catch::Approx(zr.z[j].angular).margin(1e-15));
    }

    // Numeric Jacobian in the flat ordering (rad0, ang0, rad1, ang1, ...)
    // must satisfy J Om J^T = Om with Om the standard symplectic form of
    // canonical pairs (momentum = radial, coordinate = angular).
    auto flat = [&](const ChartPoint& p) {
        std::array<double, 10> v{};
        for (std::size_t j = 0; j < 5; ++j) {
            v[2 * j] = p.z[j].radial;
            v[2 * j + 1] = p.z[j].angular;
        }
        return v;
    };
    auto unflat = [&](const std::array<double, 10>& v) {
        ChartPoint p = zr;
        for (std::size_t j = 0; j < 5; ++j) p.z[j] = {v[2 * j], v[2 * j + 1]};
        return p;
    };
    const auto z0 = flat(zr);
    const double h = 1e-6;
    double J[10][10];
    for (int c = 0; c < 10; ++c) {
        auto zp = z0, zm = z0;
        zp[static_cast<std::size_t>(c)] += h;
        zm[static_cast<std::size_t>(c)] -= h;
        const auto fp = flat(reductionToElliptic(rp, unflat(zp)));
        const auto fm = flat(reductionToElliptic(rp, unflat(zm)));
        for (int r = 0; r < 10; ++r)
            J[r][c] = (fp[static_cast<std::size_t>(r)] - fm[static_cast<std::size_t>(r)]) / (2.0 * h);
    }
    auto om = [](int r, int c) { // {z_r, z_c} with pairs (p, q): {q, p} = 1
        if (r / 2 != c / 2) return 0.0;
        if (r % 2 == 1 && c % 2 == 0) return 1.0;  // (q, p)
        if (r % 2 == 0 && c % 2 == 1) return -1.0; // (p, q)
        return 0.0;
    };
    for (int r = 0; r < 10; ++r) {
        for (int c = 0; c < 10; ++c) {
            double s = 0.0;
            for (int a = 0; a < 10; ++a)
                for (int b = 0; b < 10; ++b) s += J[r][a] * om(a, b) * J[c][b];
            REQUIRE(s == Catch::Approx(om(r, c)).margin(1e-8));
        }
    }
}

TEST_CASE("canonical map: manifest round trip") {
    SeriesGen gen(31337);
    std::vector<PairKind> kinds{PairKind::actionAngle, PairKind::actionAngle};
    CanonicalMap map;
    map.addLieStage(gen.randomSeries(2, kinds, pol(), 5, 2, 2, 1e-2), "chiA");
    map.addLieStage(gen.randomSeries(2, kinds, pol(), 5, 2, 2, 1e-2), "chiB");
    const auto dir = std::filesystem::temp_directory_path() / "sqpr_map_test";
    map.writeManifest(dir, "testmap");
    const CanonicalMap back = CanonicalMap::readManifest(dir, "testmap");
    REQUIRE(back.size() == map.size());
    for (std::size_t i = 0; i < map.size(); ++i)
        REQUIRE(back.stage(i).chi().toText() == map.stage(i).chi().toText());
}
