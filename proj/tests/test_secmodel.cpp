#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sqpr/dynamics.hpp"
#include "sqpr/secmodel.hpp"

using namespace sqpr;

namespace {

constexpr double kMJup = 9.5458e-4;
constexpr double kDeg = std::numbers::pi / 180.0;

SystemConfig threePlanetConfig() {
    SystemConfig cfg;
    cfg.m0 = 1.31;
    cfg.planets.resize(3);
    cfg.planets[0].mass = 0.674 * kMJup;
    cfg.planets[0].el = {0.0594, 0.011769, 17.0 * kDeg, 103.53 * kDeg, 51.14 * kDeg, 5.0 * kDeg};
    cfg.planets[1].mass = 15.9792 * kMJup;
    cfg.planets[1].el = {0.829, 0.239, 6.865 * kDeg, 355.0 * kDeg, 245.809 * kDeg, 229.325 * kDeg};
    cfg.planets[2].mass = 9.9578 * kMJup;
    cfg.planets[2].el = {2.53, 0.31, 25.074 * kDeg, 335.0 * kDeg, 254.302 * kDeg, 7.374 * kDeg};
    return cfg;
}

// (1/2pi) \int dpsi / sqrt(ai^2 + aj^2 - 2 ai aj cos psi)
double ringAverageInverseDistance(double ai, double aj, int n = 16384) {
    double s = 0.0;
    for (int t = 0; t < n; ++t) {
        const double psi = 2.0 * std::numbers::pi * t / n;
        s += 1.0 / std::sqrt(ai * ai + aj * aj - 2.0 * ai * aj * std::cos(psi));
    }
    return s / n;
}

// A synthetic quasi-periodic decomposition whose harmonics all satisfy the
// rotation selection rule k3 + k4 + k5 = 1.
QPDecomposition syntheticQP() {
    QPDecomposition qp;
    qp.omega = {-2.43699358194622660e-3, -1.04278712796661375e-3, 4.88477275490260560e-3};
    qp.signals[0][0] = {{{{1, 0, 0}}, 0.064, 0.41}, {{{0, 1, 0}}, 0.021, 2.2}, {{{-1, 2, 0}}, 0.006, 5.1}};
    qp.signals[0][1] = {{{{0, 0, 1}}, 0.051, 1.37}, {{{1, -1, 1}}, 0.012, 0.3}};
    qp.signals[1][0] = {{{{0, 1, 0}}, 0.093, 3.4}, {{{1, 0, 0}}, 0.017, 0.9}, {{{2, -1, 0}}, 0.004, 4.4}};
    qp.signals[1][1] = {{{{0, 0, 1}}, 0.078, 2.6}, {{{-1, 1, 1}}, 0.009, 1.1}};
    return qp;
}

} // namespace

TEST_CASE("kepler jet chain: pointwise against two-body elements") {
    const SystemConfig cfg = threePlanetConfig();
    const JetSpace sp4(4, 8);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int rep = 0; rep < 12; ++rep) {
        const int body = rep % 3;
        const BodyParams bp = cfg.body(body);
        OrbitalElements el;
        el.a = cfg.planets[static_cast<std::size_t>(body)].el.a;
        el.e = 0.05 * U(rng);
        el.inc = 0.1 * U(rng);
        el.M = 2.0 * std::numbers::pi * U(rng) - std::numbers::pi;
        el.argPeri = 2.0 * std::numbers::pi * U(rng) - std::numbers::pi;
        el.node = 2.0 * std::numbers::pi * U(rng) - std::numbers::pi;

        const PoincareVars pv = poincareFromElements(bp, el);
        const double lam = el.M + el.argPeri + el.node;
        const auto kj = secdetail::keplerJetAt(sp4, bp, el.a, lam);
        const std::vector<double> d{pv.xi, pv.eta, pv.P, pv.Q};

        Vec3 r, v;
        cartesianFromElements(bp.mu(), el, r, v);
        const double beta = bp.beta();
        REQUIRE(kj.x.evalAt(d) == Catch::Approx(r.x).margin(2e-9 * el.a));
        REQUIRE(kj.y.evalAt(d) == Catch::Approx(r.y).margin(2e-9 * el.a));
        REQUIRE(kj.z.evalAt(d) == Catch::Approx(r.z).margin(2e-9 * el.a));
        const double vs = v.norm();
        REQUIRE(kj.px.evalAt(d) == Catch::Approx(beta * v.x).margin(2e-9 * beta * vs));
        REQUIRE(kj.py.evalAt(d) == Catch::Approx(beta * v.y).margin(2e-9 * beta * vs));
        REQUIRE(kj.pz.evalAt(d) == Catch::Approx(beta * v.z).margin(2e-9 * beta * vs));
    }
}

TEST_CASE("pair extraction: circular coplanar constant term matches the ring average") {
    SystemConfig cfg = threePlanetConfig();
    cfg.secularDegree = 4;
    const TruncatedSeries H = extractSecularPair(cfg, 0, 1);
    const double c00 = H.coeff(Monomial{}).real();
    const double oracle = -cfg.G * cfg.planets[0].mass * cfg.planets[1].mass *
                          ringAverageInverseDistance(cfg.planets[0].el.a, cfg.planets[1].el.a);
    REQUIRE(c00 == Catch::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("pair extraction: parity, rotation invariance, pointwise averaging oracle") {
    SystemConfig cfg = threePlanetConfig();
    cfg.secularDegree = 8;
    const TruncatedSeries H = extractSecularPair(cfg, 0, 1);

    // only even total degrees survive
    for (const auto& [m, c] : H.terms()) {
        int deg = 0;
        for (int p = 0; p < 4; ++p) deg += m.exp[static_cast<std::size_t>(p)] + m.harm[static_cast<std::size_t>(p)];
        REQUIRE(deg % 2 == 0);
        REQUIRE(std::abs(c.imag()) <= 1e-14 * std::abs(c.real()) + 1e-25);
    }

    // simultaneous rotation of both pericenters and both nodes is a symmetry
    REQUIRE(rotationInvarianceDefect(H).l1Norm() <= 1e-10 * H.l1Norm());

    // series vs direct double averaging of the interaction at random secular points
    const BodyParams bpi = cfg.body(0);
    const BodyParams bpj = cfg.body(1);
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int nq = 256;
    for (int rep = 0; rep < 12; ++rep) {
        OrbitalElements ei, ej;
        ei.a = cfg.planets[0].el.a;
        ej.a = cfg.planets[1].el.a;
        ei.e = 0.3 * U(rng);
        ej.e = 0.3 * U(rng);
        ei.inc = 15.0 * kDeg * U(rng);
        ej.inc = 15.0 * kDeg * U(rng);
        ei.argPeri = 2.0 * std::numbers::pi * U(rng);
        ej.argPeri = 2.0 * std::numbers::pi * U(rng);
        ei.node = 2.0 * std::numbers::pi * U(rng);
        ej.node = 2.0 * std::numbers::pi * U(rng);

        const PoincareVars pvi = poincareFromElements(bpi, ei);
        const PoincareVars pvj = poincareFromElements(bpj, ej);
        std::array<TruncatedSeries::PairValue, kMaxPairs> z{};
        z[0] = {pvi.xi, pvi.eta};
        z[1] = {pvi.P, pvi.Q};
        z[2] = {pvj.xi, pvj.eta};
        z[3] = {pvj.P, pvj.Q};
        const double series = H.evaluate(z).real();

        std::vector<Vec3> ri(nq), rj(nq), pi(nq), pj(nq);
        for (int t = 0; t < nq; ++t) {
            OrbitalElements e1 = ei, e2 = ej;
            e1.M = 2.0 * std::numbers::pi * t / nq;
            e2.M = 2.0 * std::numbers::pi * t / nq;
            Vec3 v;
            cartesianFromElements(bpi.mu(), e1, ri[static_cast<std::size_t>(t)], v);
            pi[static_cast<std::size_t>(t)] = bpi.beta() * v;
            cartesianFromElements(bpj.mu(), e2, rj[static_cast<std::size_t>(t)], v);
            pj[static_cast<std::size_t>(t)] = bpj.beta() * v;
        }
        double avg = 0.0;
        for (int a = 0; a < nq; ++a)
            for (int b = 0; b < nq; ++b) {
                const Vec3 d = ri[static_cast<std::size_t>(a)] - rj[static_cast<std::size_t>(b)];
                avg += -cfg.G * cfg.planets[0].mass * cfg.planets[1].mass / d.norm() +
                       pi[static_cast<std::size_t>(a)].dot(pj[static_cast<std::size_t>(b)]) / cfg.m0;
            }
        avg /= static_cast<double>(nq) * nq;
        REQUIRE(series == Catch::Approx(avg).epsilon(1e-6));
    }
}

TEST_CASE("quasi-periodic injection: substitution rules and dummy actions") {
    SystemConfig cfg = threePlanetConfig();
    QPDecomposition qp;
    qp.omega = {-2.4e-3, -1.0e-3, 4.9e-3};
    qp.signals[0][0] = {{{{1, 0, 0}}, 0.7, 0.3}};
    qp.signals[0][1] = {{{{0, 0, 1}}, 0.2, 1.1}};
    qp.signals[1][0] = {};
    qp.signals[1][1] = {};

    TruncationPolicy pol;
    pol.maxActionDeg = 8;
    pol.maxFourierStep = 8;
    TruncatedSeries Hp12(4, std::vector<PairKind>(4, PairKind::cartesian), pol);
    TruncatedSeries Hp13 = Hp12;
    Monomial mXi2, mEta2;
    mXi2.exp[2] = 1;
    mEta2.harm[2] = 1;
    Hp12.setCoeff(mXi2, 2.0);  // 2 xi_2
    Hp12.setCoeff(mEta2, 1.0); // eta_2

    InjectionReport rep;
    const TruncatedSeries H = injectQuasiPeriodic(Hp12, Hp13, qp, cfg, &rep);
    REQUIRE(rep.droppedMonomials == 0);

    // xi_2 -> A cos(k.q + theta), eta_2 -> A sin(k.q + theta)
    Monomial hp, hm;
    hp.harm[2] = 1;
    hm.harm[2] = -1;
    const cplx expected = (2.0 * 0.5 + 1.0 * cplx(0.0, -0.5)) * 0.7 * std::polar(1.0, 0.3);
    REQUIRE(std::abs(H.coeff(hp) - expected) < 1e-15);
    REQUIRE(std::abs(H.coeff(hm) - std::conj(expected)) < 1e-15);

    for (int k = 0; k < 3; ++k) {
        Monomial mp;
        mp.exp[static_cast<std::size_t>(2 + k)] = 1;
        REQUIRE(H.coeff(mp).real() == qp.omega[static_cast<std::size_t>(k)]);
        REQUIRE(H.coeff(mp).imag() == 0.0);
    }
}

TEST_CASE("assembled restricted model: invariance law and GR difference") {
    SystemConfig cfg = threePlanetConfig();
    cfg.secularDegree = 6;
    cfg.quadratureNodes = 32;
    const TruncatedSeries Hp12 = extractSecularPair(cfg, 0, 1);
    const TruncatedSeries Hp13 = extractSecularPair(cfg, 0, 2);
    QPDecomposition qp = syntheticQP();

    InjectionReport rep;
    const TruncatedSeries H = assembleSecularModel(cfg, qp, Hp12, Hp13, false, &rep);
    REQUIRE(rotationInvarianceDefect(H).l1Norm() <= 1e-10 * H.l1Norm());

    cfg.trigBandCount = 5; // GR variant widens the trigonometric truncation
    const TruncatedSeries Hgr = assembleSecularModel(cfg, qp, Hp12, Hp13, true);
    REQUIRE(rotationInvarianceDefect(Hgr).l1Norm() <= 1e-10 * Hgr.l1Norm());

    TruncatedSeries diff = Hgr;
    const TruncatedSeries base = assembleSecularModel(cfg, qp, Hp12, Hp13, false);
    for (const auto& [m, c] : base.terms()) diff.addCoeff(m, -c);
    const TruncatedSeries gr = grCorrection(cfg);
    TruncatedSeries resid = diff;
    for (const auto& [m, c] : gr.terms()) resid.addCoeff(m, -c);
    resid.prune();
    REQUIRE(resid.l1Norm() <= 1e-14 * Hgr.l1Norm());
}

TEST_CASE("post-newtonian correction: closed form, monotonicity, angle independence") {
    SystemConfig cfg = threePlanetConfig();
    const TruncatedSeries H = grCorrection(cfg);

    const double a1 = cfg.planets[0].el.a;
    const double m1 = cfg.planets[0].mass;
    const double c2 = cfg.cLight * cfg.cLight;
    const double C1 = cfg.G * cfg.G * cfg.m0 * cfg.m0 * m1 / (a1 * a1 * c2);
    auto closedForm = [&](double e) {
        return -3.0 * C1 / std::sqrt(1.0 - e * e) + 15.0 / 8.0 * C1 -
               cfg.G * cfg.G * cfg.m0 * m1 * m1 / (8.0 * a1 * a1 * c2);
    };

    // circular limit
    REQUIRE(H.coeff(Monomial{}).real() == Catch::Approx(closedForm(0.0)).epsilon(1e-14));

    // depends on (xi_1, eta_1) only: no harmonics, no (P_1, Q_1) content
    for (const auto& [m, c] : H.terms()) {
        (void)c;
        REQUIRE(m.exp[1] == 0);
        REQUIRE(m.harm[1] == 0);
        for (int k = 2; k < 5; ++k) {
            REQUIRE(m.exp[static_cast<std::size_t>(k)] == 0);
            REQUIRE(m.harm[static_cast<std::size_t>(k)] == 0);
        }
    }

    // series against the closed form at e = 0.25
    const BodyParams bp = cfg.body(0);
    const double Lam = bp.Lambda(a1);
    const double e = 0.25;
    const double xi = std::sqrt(2.0 * Lam * (1.0 - std::sqrt(1.0 - e * e)));
    std::array<TruncatedSeries::PairValue, kMaxPairs> z{};
    z[0] = {xi, 0.0};
    REQUIRE(H.evaluate(z).real() == Catch::Approx(closedForm(e)).epsilon(1e-10));

    // the averaged correction decreases with Gamma_1; since the pericenter
    // longitude is minus the conjugate polar angle, it advances under this term
    Monomial mg;
    mg.exp[0] = 2;
    const double dHdGamma = 2.0 * H.coeff(mg).real(); // Gamma = (xi^2 + eta^2)/2
    const double h = 1e-6;
    auto cfGamma = [&](double G) { return -3.0 * C1 / (1.0 - G / Lam); }; // sqrt(1-e^2) = 1 - Gamma/Lambda
    REQUIRE(dHdGamma < 0.0);
    REQUIRE(dHdGamma == Catch::Approx((cfGamma(h) - cfGamma(-h)) / (2.0 * h)).epsilon(1e-5));
}
