#pragma once

// Construction of the secular Hamiltonians:
//   * pairwise secular two-planet expansions, obtained by jet transport of
//     the averaged interaction through the Kepler map (degree-N Taylor
//     polynomials in the secular Poincare variables of both planets);
//   * the restricted 2+3/2 degree-of-freedom model, where the outer-planet
//     variables are replaced by finite Fourier sums in three angles moving
//     linearly in time, with conjugated dummy actions;
//   * the averaged post-Newtonian correction for the inner planet.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqpr/canon.hpp"
#include "sqpr/jets.hpp"
#include "sqpr/pseries.hpp"

namespace sqpr {

struct PlanetConfig {
    double mass = 0.0; // [M_sun]
    OrbitalElements el;
};

struct SystemConfig {
    double m0 = 1.31;                                       // star mass [M_sun]
    double G = 4.0 * std::numbers::pi * std::numbers::pi;   // [AU^3 / (M_sun yr^2)]
    double cLight = 63241.07708;                            // speed of light [AU/yr]
    std::vector<PlanetConfig> planets;                      // index 0 = inner planet

    int secularDegree = 8;   // truncation of the pair expansions (even)
    int actionDegreeCap = 6; // max power of the quadratic actions downstream
    int trigBandCount = 4;   // number of trigonometric bands
    int trigBandWidth = 2;   // band width in total harmonic order
    bool withGR = false;

    int quadratureNodes = 64; // starting mean-longitude grid size (even)

    BodyParams body(int j) const {
        BodyParams bp;
        bp.m0 = m0;
        bp.m = planets.at(static_cast<std::size_t>(j)).mass;
        bp.G = G;
        return bp;
    }
    int trigCap() const { return trigBandCount * trigBandWidth; }
};

// One Fourier component of a quasi-periodic signal: amp * e^{i(k.q + phase)}.
struct QPHarmonic {
    std::array<int, 3> k{};
    double amp = 0.0;
    double phase = 0.0;
};

// Quasi-periodic decomposition of the secular motion of the two outer
// planets: for each of them, the complex eccentricity signal xi + i eta and
// the complex inclination signal P + i Q as finite Fourier sums in the
// angles q = omega t.
struct QPDecomposition {
    std::array<double, 3> omega{};
    // signals[outer planet 0|1][0 = xi+i eta, 1 = P+i Q]
    std::array<std::array<std::vector<QPHarmonic>, 2>, 2> signals{};

    void sortByAmplitude() {
        for (auto& planet : signals)
            for (auto& sig : planet)
                std::stable_sort(sig.begin(), sig.end(),
                                 [](const QPHarmonic& a, const QPHarmonic& b) { return a.amp > b.amp; });
    }
};

struct InjectionReport {
    std::size_t droppedMonomials = 0; // harmonics beyond the trigonometric cap
};

namespace secdetail {

using cjet = Jet<std::complex<double>>;

// Position and momentum of one planet on its Keplerian orbit at mean
// longitude lam, as degree-N jets in the displacement of the planet's
// secular Poincare variables (xi, eta, P, Q) from the circular coplanar
// origin.  Semi-major axis (hence Lambda) is a fixed parameter.
struct KeplerJet {
    Jet<double> x, y, z;    // astrocentric position [AU]
    Jet<double> px, py, pz; // conjugated momentum [beta AU/yr]
};

inline KeplerJet keplerJetAt(const JetSpace& sp4, const BodyParams& bp, double a, double lam) {
    const std::complex<double> I(0.0, 1.0);
    const double Lam = bp.Lambda(a);
    const double n = bp.meanMotion(a);

    const cjet xi = cjet::variable(sp4, 0);
    const cjet eta = cjet::variable(sp4, 1);
    const cjet Pv = cjet::variable(sp4, 2);
    const cjet Qv = cjet::variable(sp4, 3);

    // Gamma = (xi^2 + eta^2)/2, sqrt(1 - e^2) = 1 - Gamma/Lambda
    const cjet Gam = (mul(xi, xi) + mul(eta, eta)) * std::complex<double>(0.5);
    const cjet g = Gam * std::complex<double>(1.0 / Lam);
    const cjet c1 = -g + std::complex<double>(1.0);
    const cjet A = g * std::complex<double>(-0.5) + std::complex<double>(1.0);

    // z_e = e e^{i varpi} = (xi - i eta) sqrt(A) / sqrt(Lambda)
    const cjet ximieta = xi - mul(eta, cjet::constant(sp4, I));
    const cjet ze = mul(ximieta, sqrtJet(A)) * std::complex<double>(1.0 / std::sqrt(Lam));
    // Btil = (xi - i eta)^2 / (4 Lambda)
    const cjet Btil = mul(ximieta, ximieta) * std::complex<double>(0.25 / Lam);

    // Eccentric-longitude fixed point: F = lam + u with
    // u = Im( conj(z_e) e^{iF} ); each pass gains one polynomial degree.
    const std::complex<double> eiLam = std::polar(1.0, lam);
    const cjet zeb = conjJet(ze);
    cjet u = cjet::constant(sp4, 0.0);
    cjet eiF(sp4);
    for (int it = 0; it <= sp4.degree(); ++it) {
        eiF = mul(cjet::constant(sp4, eiLam), expIJet(u));
        const cjet w = mul(zeb, eiF);
        u = (w - conjJet(w)) * (std::complex<double>(0.5) / I);
    }
    eiF = mul(cjet::constant(sp4, eiLam), expIJet(u));
    const cjet eiFb = conjJet(eiF);

    // In-plane complex position and velocity (pericenter direction included)
    const cjet W = (mul(A, eiF) + mul(Btil, eiFb) - ze) * std::complex<double>(a);
    const cjet rz = mul(zeb, eiF);
    const cjet rho = (rz + conjJet(rz)) * std::complex<double>(-0.5) + std::complex<double>(1.0); // r/a
    const cjet Vw = mul(mul(A, eiF) - mul(Btil, eiFb), recipJet(rho)) * (I * std::complex<double>(a * n));

    // Spatial rotation through sigma = sin(i/2) e^{-i Omega}
    const cjet sig = mul(Pv + mul(Qv, cjet::constant(sp4, I)), rsqrtJet(c1)) *
                     std::complex<double>(0.5 / std::sqrt(Lam));
    const cjet sigb = conjJet(sig);
    const cjet csq = -mul(sig, sigb) + std::complex<double>(1.0); // cos^2(i/2)
    const cjet cj = sqrtJet(csq);
    const cjet sigb2 = mul(sigb, sigb);

    auto rotate = [&](const cjet& w, Jet<double>& ox, Jet<double>& oy, Jet<double>& oz) {
        const cjet hor = mul(csq, w) + mul(sigb2, conjJet(w));
        ox = realJet(hor);
        const cjet horI = (hor - conjJet(hor)) * (std::complex<double>(0.5) / I);
        oy = realJet(horI);
        const cjet sw = mul(sig, w);
        const cjet swI = (sw - conjJet(sw)) * (std::complex<double>(0.5) / I);
        oz = realJet(mul(cj, swI) * std::complex<double>(2.0));
    };

    KeplerJet out;
    rotate(W, out.x, out.y, out.z);
    rotate(Vw, out.px, out.py, out.pz);
    const double beta = bp.beta();
    out.px *= beta;
    out.py *= beta;
    out.pz *= beta;
    return out;
}

// Sparse product of a jet in variables 0..3 with a jet in variables 4..7 of
// an 8-variable space: every output slot receives exactly one contribution,
// so this is ~50x cheaper than a generic multiply.
struct SplitProduct {
    struct Entry {
        std::int32_t sa, sb, o;
    };
    std::vector<Entry> table;

    SplitProduct(const JetSpace& sp4, const JetSpace& sp8) {
        for (int sa = 0; sa < sp4.nslots(); ++sa) {
            const int da = sp4.degreeOf(sa);
            for (int sb = 0; sb < sp4.nslots(); ++sb) {
                if (da + sp4.degreeOf(sb) > sp8.degree()) continue;
                std::array<std::uint8_t, JetSpace::kMaxVars> e{};
                const auto& ea = sp4.exponents(sa);
                const auto& eb = sp4.exponents(sb);
                for (int v = 0; v < 4; ++v) {
                    e[static_cast<std::size_t>(v)] = ea[static_cast<std::size_t>(v)];
                    e[static_cast<std::size_t>(v + 4)] = eb[static_cast<std::size_t>(v)];
                }
                table.push_back({sa, sb, static_cast<std::int32_t>(sp8.slotOf(e))});
            }
        }
    }

    void accumulate(Jet<double>& out, const Jet<double>& a, const Jet<double>& b, double w) const {
        for (const auto& t : table)
            out.c[static_cast<std::size_t>(t.o)] +=
                w * a.c[static_cast<std::size_t>(t.sa)] * b.c[static_cast<std::size_t>(t.sb)];
    }
};

} // namespace secdetail

// Doubly-averaged interaction of the hierarchical planet pair (bi, bj),
// a_i < a_j, as a real polynomial of total degree <= cfg.secularDegree in
// (xi_i, eta_i, P_i, Q_i, xi_j, eta_j, P_j, Q_j) -- four cartesian pairs in
// this order.  Contains the direct term -G m_i m_j <1/|r_i - r_j|> and the
// numerically averaged momentum-coupling term (which vanishes to quadrature
// accuracy for distinct mean motions).
inline TruncatedSeries extractSecularPair(const SystemConfig& cfg, int bi, int bj) {
    const PlanetConfig& pi = cfg.planets.at(static_cast<std::size_t>(bi));
    const PlanetConfig& pj = cfg.planets.at(static_cast<std::size_t>(bj));
    if (!(pi.el.a < pj.el.a)) throw std::invalid_argument("extractSecularPair: need a_i < a_j");
    const int N = cfg.secularDegree;
    if (N < 2 || N % 2 != 0) throw std::invalid_argument("extractSecularPair: degree must be even >= 2");

    const JetSpace sp4(4, N);
    const JetSpace sp8(8, N);
    sp8.mulSchedule(); // build once
    const secdetail::SplitProduct split(sp4, sp8);

    const BodyParams bpi = cfg.body(bi);
    const BodyParams bpj = cfg.body(bj);

    const double scale = cfg.G * pi.mass * pj.mass / pj.el.a;

    Jet<double> direct(sp8);
    double deg0Full = 0.0, deg0Sub = 0.0;
    Jet<double> indirect(sp8);

    int n = cfg.quadratureNodes;
    if (n < 8 || n % 2 != 0) throw std::invalid_argument("extractSecularPair: quadratureNodes");
    bool converged = false;
    for (; n <= 256; n *= 2) {
        // Per-node chains (positions, |r|^2 and averaged momenta per body).
        struct NodeData {
            std::array<Jet<double>, 3> r;
            Jet<double> r2;
        };
        std::vector<NodeData> nodeI, nodeJ;
        nodeI.reserve(static_cast<std::size_t>(n));
        nodeJ.reserve(static_cast<std::size_t>(n));
        std::array<Jet<double>, 3> pAvgI{Jet<double>(sp4), Jet<double>(sp4), Jet<double>(sp4)};
        std::array<Jet<double>, 3> pAvgJ{Jet<double>(sp4), Jet<double>(sp4), Jet<double>(sp4)};
        for (int t = 0; t < n; ++t) {
            const double lam = 2.0 * std::numbers::pi * t / n;
            for (int side = 0; side < 2; ++side) {
                const auto kj = secdetail::keplerJetAt(sp4, side == 0 ? bpi : bpj,
                                                      side == 0 ? pi.el.a : pj.el.a, lam);
                NodeData nd{{kj.x, kj.y, kj.z}, Jet<double>(sp4)};
                nd.r2 = mul(kj.x, kj.x) + mul(kj.y, kj.y) + mul(kj.z, kj.z);
                auto& pAvg = side == 0 ? pAvgI : pAvgJ;
                pAvg[0] += kj.px;
                pAvg[1] += kj.py;
                pAvg[2] += kj.pz;
                (side == 0 ? nodeI : nodeJ).push_back(std::move(nd));
            }
        }

        std::fill(direct.c.begin(), direct.c.end(), 0.0);
        Jet<double> directSub(sp8);
        Jet<double> d2(sp8), w(sp8);
        for (int a = 0; a < n; ++a) {
            const Jet<double> r2i = liftJet(nodeI[static_cast<std::size_t>(a)].r2, sp8, 0);
            for (int b = 0; b < n; ++b) {
                d2 = r2i;
                d2 += liftJet(nodeJ[static_cast<std::size_t>(b)].r2, sp8, 4);
                for (int c = 0; c < 3; ++c)
                    split.accumulate(d2, nodeI[static_cast<std::size_t>(a)].r[static_cast<std::size_t>(c)],
                                     nodeJ[static_cast<std::size_t>(b)].r[static_cast<std::size_t>(c)], -2.0);
                w = rsqrtJet(d2);
                direct += w;
                if (a % 2 == 0 && b % 2 == 0) directSub += w;
            }
        }
        const double cG = -cfg.G * pi.mass * pj.mass;
        direct *= cG / (static_cast<double>(n) * n);
        directSub *= cG / (0.25 * n * n);
        deg0Full = direct.value();
        deg0Sub = directSub.value();
        if (std::abs(deg0Full - deg0Sub) <= 1e-12 * std::abs(deg0Full)) {
            // Momentum-coupling term: the double average factorizes into the
            // product of independent single-orbit averages.
            std::fill(indirect.c.begin(), indirect.c.end(), 0.0);
            for (int c = 0; c < 3; ++c)
                split.accumulate(indirect, pAvgI[static_cast<std::size_t>(c)],
                                 pAvgJ[static_cast<std::size_t>(c)],
                                 1.0 / (cfg.m0 * static_cast<double>(n) * n));
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream ss;
        ss << "extractSecularPair: quadrature not converged at 256 nodes; degree-0 "
           << deg0Full << " vs half-grid " << deg0Sub;
        throw std::runtime_error(ss.str());
    }

    double indMax = 0.0;
    for (double v : indirect.c) indMax = std::max(indMax, std::abs(v));
    if (indMax > 1e-12 * std::max(1.0, std::abs(scale)))
        throw std::runtime_error("extractSecularPair: averaged momentum coupling did not vanish");
    direct += indirect;

    // Pack into a series over four cartesian pairs.
    TruncationPolicy pol;
    pol.maxActionDeg = N;
    pol.maxFourierStep = N;
    pol.harmonicUnit = 1;
    pol.dropThreshold = 0.0;
    TruncatedSeries H(4, std::vector<PairKind>(4, PairKind::cartesian), pol);
    double maxAbs = 0.0;
    for (double v : direct.c) maxAbs = std::max(maxAbs, std::abs(v));
    for (int s = 0; s < sp8.nslots(); ++s) {
        const double v = direct.c[static_cast<std::size_t>(s)];
        if (v == 0.0) continue;
        const auto& e = sp8.exponents(s);
        if (sp8.degreeOf(s) % 2 != 0) {
            // The mean-longitude grid is invariant under the half-turn that
            // flips all secular variables, so odd degrees vanish to rounding.
            if (std::abs(v) > 1e-12 * maxAbs)
                throw std::runtime_error("extractSecularPair: odd-degree coefficient above noise");
            continue;
        }
        if (std::abs(v) < 1e-15 * maxAbs) continue;
        Monomial m;
        for (int p = 0; p < 4; ++p) {
            m.exp[static_cast<std::size_t>(p)] = static_cast<std::int8_t>(e[static_cast<std::size_t>(2 * p)]);
            m.harm[static_cast<std::size_t>(p)] = static_cast<std::int8_t>(e[static_cast<std::size_t>(2 * p + 1)]);
        }
        H.setCoeff(m, v);
    }
    return H;
}

namespace secdetail {

// Variable layout of the restricted model: pairs
//   0: (xi_1, eta_1)  cartesian
//   1: (P_1,  Q_1)    cartesian
//   2..4: (p_k, q_k)  action-angle, k = 3, 4, 5
inline std::vector<PairKind> restrictedKinds() {
    return {PairKind::cartesian, PairKind::cartesian, PairKind::actionAngle, PairKind::actionAngle,
            PairKind::actionAngle};
}

inline TruncationPolicy restrictedPolicy(const SystemConfig& cfg) {
    TruncationPolicy pol;
    pol.maxActionDeg = std::max(cfg.secularDegree, 2 * cfg.actionDegreeCap);
    pol.maxFourierStep = cfg.trigBandCount;
    pol.harmonicUnit = cfg.trigBandWidth;
    pol.dropThreshold = 0.0;
    return pol;
}

// Real or imaginary part of sum_s amp_s e^{i(k_s.q + phase_s)} as a series
// over the restricted layout (harmonics live on the action-angle pairs).
inline TruncatedSeries signalSeries(const std::vector<QPHarmonic>& sig, bool imaginaryPart,
                                    const TruncationPolicy& pol) {
    TruncatedSeries out(5, restrictedKinds(), pol);
    for (const auto& h : sig) {
        // Re: (amp/2) e^{i phase} e^{ik.q} + c.c.; Im: (amp/2i) e^{i phase} e^{ik.q} + c.c.
        const cplx half = (imaginaryPart ? cplx(0.0, -0.5) : cplx(0.5, 0.0)) * h.amp *
                          std::polar(1.0, h.phase);
        Monomial m;
        for (int c = 0; c < 3; ++c) m.harm[static_cast<std::size_t>(2 + c)] = static_cast<std::int8_t>(h.k[static_cast<std::size_t>(c)]);
        out.addCoeff(m, half);
        Monomial mc;
        for (int c = 0; c < 3; ++c) mc.harm[static_cast<std::size_t>(2 + c)] = static_cast<std::int8_t>(-h.k[static_cast<std::size_t>(c)]);
        out.addCoeff(mc, std::conj(half));
    }
    return out;
}

} // namespace secdetail

// Substitute the outer-planet variables of the two pair Hamiltonians by
// their Fourier sums, prepend the dummy-action term omega . p, and truncate
// the trigonometric degree; dropped harmonics are counted.
inline TruncatedSeries injectQuasiPeriodic(const TruncatedSeries& HpairInnerFirst,
                                           const TruncatedSeries& HpairInnerSecond,
                                           const QPDecomposition& qp, const SystemConfig& cfg,
                                           InjectionReport* report = nullptr) {
    const TruncationPolicy polCapped = secdetail::restrictedPolicy(cfg);
    TruncationPolicy polWide = polCapped;
    polWide.maxFourierStep = 127; // cap only at the end, so drops can be counted
    polWide.harmonicUnit = 1;

    TruncatedSeries acc(5, secdetail::restrictedKinds(), polWide);

    for (int which = 0; which < 2; ++which) {
        const TruncatedSeries& Hp = which == 0 ? HpairInnerFirst : HpairInnerSecond;
        const auto& sig = qp.signals[static_cast<std::size_t>(which)];

        // Power tables of the four substituted signals.
        const int N = cfg.secularDegree;
        auto powers = [&](const std::vector<QPHarmonic>& s, bool imag) {
            std::vector<TruncatedSeries> p;
            p.push_back(secdetail::signalSeries({{{{0, 0, 0}}, 1.0, 0.0}}, false, polWide)); // == 1
            p.push_back(secdetail::signalSeries(s, imag, polWide));
            for (int d = 2; d <= N; ++d) p.push_back(multiply(p.back(), p[1]));
            return p;
        };
        const auto xiP = powers(sig[0], false);
        const auto etaP = powers(sig[0], true);
        const auto PP = powers(sig[1], false);
        const auto QP = powers(sig[1], true);

        for (const auto& [m, c] : Hp.sortedTerms()) {
            // pair layout of Hp: 0 = (xi1, eta1), 1 = (P1, Q1), 2, 3 = outer planet
            TruncatedSeries term = multiply(
                multiply(xiP[static_cast<std::size_t>(m.exp[2])], etaP[static_cast<std::size_t>(m.harm[2])]),
                multiply(PP[static_cast<std::size_t>(m.exp[3])], QP[static_cast<std::size_t>(m.harm[3])]));
            term *= c;
            for (const auto& [tm, tc] : term.terms()) {
                Monomial out = tm;
                out.exp[0] = m.exp[0];
                out.harm[0] = m.harm[0];
                out.exp[1] = m.exp[1];
                out.harm[1] = m.harm[1];
                acc.addCoeff(out, tc);
            }
        }
    }

    // Dummy actions: omega_3 p_3 + omega_4 p_4 + omega_5 p_5.
    for (int k = 0; k < 3; ++k) {
        Monomial m;
        m.exp[static_cast<std::size_t>(2 + k)] = 1;
        acc.addCoeff(m, qp.omega[static_cast<std::size_t>(k)]);
    }

    TruncatedSeries H(5, secdetail::restrictedKinds(), polCapped);
    std::size_t dropped = 0;
    acc.prune();
    for (const auto& [m, c] : acc.terms()) {
        if (std::abs(c) < 1e-17 * std::max(1.0, acc.maxAbsCoeff())) continue;
        if (!H.withinCaps(m)) {
            ++dropped;
            continue;
        }
        H.addCoeff(m, c);
    }
    if (report) report->droppedMonomials = dropped;
    return H;
}

// Averaged post-Newtonian correction for the inner planet,
//   -3 G^2 m0^2 m1 / (a1^2 c^2 sqrt(1-e1^2)) + 15 G^2 m0^2 m1 / (8 a1^2 c^2)
//   - G^2 m0 m1^2 / (8 a1^2 c^2),
// expanded through 1/sqrt(1-e1^2) = sum_k (Gamma_1/Lambda_1)^k and truncated
// at power actionDegreeCap of Gamma_1.  Depends on (xi_1, eta_1) only.
inline TruncatedSeries grCorrection(const SystemConfig& cfg) {
    const PlanetConfig& p1 = cfg.planets.at(0);
    const BodyParams bp = cfg.body(0);
    const double a1 = p1.el.a;
    const double Lam = bp.Lambda(a1);
    const double c2 = cfg.cLight * cfg.cLight;
    const double C1 = cfg.G * cfg.G * cfg.m0 * cfg.m0 * p1.mass / (a1 * a1 * c2);
    const double Cconst = 15.0 / 8.0 * C1 - cfg.G * cfg.G * cfg.m0 * p1.mass * p1.mass / (8.0 * a1 * a1 * c2);

    TruncatedSeries H(5, secdetail::restrictedKinds(), secdetail::restrictedPolicy(cfg));
    Monomial m0m;
    H.addCoeff(m0m, Cconst);
    // -3 C1 sum_{k=0}^{NL} (Gamma/Lambda)^k, Gamma^k = 2^{-k} (xi^2 + eta^2)^k
    for (int k = 0; k <= cfg.actionDegreeCap; ++k) {
        double binom = 1.0;
        for (int j = 0; j <= k; ++j) {
            Monomial m;
            m.exp[0] = static_cast<std::int8_t>(2 * j);
            m.harm[0] = static_cast<std::int8_t>(2 * (k - j));
            H.addCoeff(m, -3.0 * C1 * binom / std::pow(2.0 * Lam, k));
            binom *= static_cast<double>(k - j) / (j + 1);
        }
    }
    return H;
}

// Full restricted Hamiltonian from precomputed pair expansions.
inline TruncatedSeries assembleSecularModel(const SystemConfig& cfg, const QPDecomposition& qp,
                                            const TruncatedSeries& HpairInnerFirst,
                                            const TruncatedSeries& HpairInnerSecond, bool withGR,
                                            InjectionReport* report = nullptr) {
    TruncatedSeries H = injectQuasiPeriodic(HpairInnerFirst, HpairInnerSecond, qp, cfg, report);
    if (withGR) H += grCorrection(cfg);
    return H;
}

// Convenience overload performing the pair extractions (planets 0-1, 0-2).
inline TruncatedSeries assembleSecularModel(const SystemConfig& cfg, const QPDecomposition& qp,
                                            bool withGR, InjectionReport* report = nullptr) {
    const TruncatedSeries Hp12 = extractSecularPair(cfg, 0, 1);
    const TruncatedSeries Hp13 = extractSecularPair(cfg, 0, 2);
    return assembleSecularModel(cfg, qp, Hp12, Hp13, withGR, report);
}

// Derivative of H along the simultaneous rotation of all pericenters, nodes
// and external angles: sum over pairs of d/d(polar angle).  For a cartesian
// pair (with xi = sqrt(2 Gamma) cos g, eta = sqrt(2 Gamma) sin g) this is
// xi dH/deta - eta dH/dxi; for an action-angle pair it is dH/d(angle).
// Vanishes (to rounding) for rotation-invariant Hamiltonians.
inline TruncatedSeries rotationInvarianceDefect(const TruncatedSeries& H) {
    TruncatedSeries acc = H.likeThis();
    for (int j = 0; j < H.dof(); ++j) {
        if (H.kinds()[static_cast<std::size_t>(j)] == PairKind::cartesian) {
            TruncatedSeries xi = H.likeThis(), eta = H.likeThis();
            Monomial mx, me;
            mx.exp[static_cast<std::size_t>(j)] = 1;
            me.harm[static_cast<std::size_t>(j)] = 1;
            xi.setCoeff(mx, 1.0);
            eta.setCoeff(me, 1.0);
            acc += multiply(xi, H.derivativeAngular(j));
            acc -= multiply(eta, H.derivativeRadial(j));
        } else {
            acc += H.derivativeAngular(j);
        }
    }
    return acc;
}

} // namespace sqpr
