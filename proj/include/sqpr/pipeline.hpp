#pragma once

// End-to-end pipeline stages: drive integration, quasi-periodic decomposition,
// model assembly, the two normal-form stages with the Newton refinement of the
// translation vector, the semi-analytic vs numeric orbit comparison, and the
// norm-bound iteration handoff.

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqpr/canon.hpp"
#include "sqpr/capest.hpp"
#include "sqpr/config.hpp"
#include "sqpr/dynamics.hpp"
#include "sqpr/freqan.hpp"
#include "sqpr/normalform.hpp"
#include "sqpr/secmodel.hpp"

namespace sqpr {

// --- fast point evaluation ---------------------------------------------------

// Flattened copy of a series with per-point power tables; summation order is
// fixed at construction, so results are deterministic and match repeated
// evaluation of the same series.
class SeriesEvaluator {
public:
    SeriesEvaluator() = default;

    explicit SeriesEvaluator(const TruncatedSeries& s) : dof_(s.dof()), kinds_(s.kinds()) {
        for (const auto& [m, c] : s.sortedTerms()) terms_.push_back({m, c});
        for (const auto& [m, c] : terms_)
            for (int j = 0; j < dof_; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                maxExp_[ju] = std::max(maxExp_[ju], static_cast<int>(m.exp[ju]));
                maxHarm_[ju] = std::max(maxHarm_[ju], std::abs(static_cast<int>(m.harm[ju])));
            }
    }

    std::complex<double> at(const PointValues& z) const {
        std::array<std::vector<double>, kMaxPairs> rp;
        std::array<std::vector<std::complex<double>>, kMaxPairs> hp;
        for (int j = 0; j < dof_; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double base = (kinds_[ju] == PairKind::sqrtAction)
                                    ? std::sqrt(z[ju].radial)
                                    : z[ju].radial;
            rp[ju].assign(static_cast<std::size_t>(maxExp_[ju]) + 1, 1.0);
            for (int a = 1; a <= maxExp_[ju]; ++a)
                rp[ju][static_cast<std::size_t>(a)] = rp[ju][static_cast<std::size_t>(a - 1)] * base;
            const int K = maxHarm_[ju];
            hp[ju].assign(static_cast<std::size_t>(2 * K) + 1, 1.0);
            if (kinds_[ju] == PairKind::cartesian) {
                // cartesian pairs use the harmonic slot as the power of the
                // second coordinate; negative powers never occur
                for (int k = 1; k <= K; ++k)
                    hp[ju][static_cast<std::size_t>(K + k)] =
                        hp[ju][static_cast<std::size_t>(K + k - 1)] * z[ju].angular;
            } else {
                const std::complex<double> e = std::polar(1.0, z[ju].angular);
                const std::complex<double> ec = std::conj(e);
                for (int k = 1; k <= K; ++k) {
                    hp[ju][static_cast<std::size_t>(K + k)] =
                        hp[ju][static_cast<std::size_t>(K + k - 1)] * e;
                    hp[ju][static_cast<std::size_t>(K - k)] =
                        hp[ju][static_cast<std::size_t>(K - k + 1)] * ec;
                }
            }
        }
        std::complex<double> acc = 0.0;
        for (const auto& [m, c] : terms_) {
            std::complex<double> w = c;
            for (int j = 0; j < dof_; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                if (m.exp[ju] != 0) w *= rp[ju][static_cast<std::size_t>(m.exp[ju])];
                if (m.harm[ju] != 0)
                    w *= hp[ju][static_cast<std::size_t>(maxHarm_[ju] + m.harm[ju])];
            }
            acc += w;
        }
        return acc;
    }

    double realAt(const PointValues& z) const { return at(z).real(); }
    std::size_t size() const { return terms_.size(); }

private:
    int dof_ = 0;
    std::array<PairKind, kMaxPairs> kinds_{};
    std::array<int, kMaxPairs> maxExp_{};
    std::array<int, kMaxPairs> maxHarm_{};
    std::vector<std::pair<Monomial, std::complex<double>>> terms_;
};

// --- stage 1: drive integration ---------------------------------------------

struct DriveResult {
    std::vector<DriveSample> samples;
    double dt = 0.0;              // integrator step [yr]
    double maxEnergyDrift = 0.0;  // relative, over the whole run
};

// Integrate the outer pair as a full three-body problem in the Laplace frame
// and store bin-averaged secular Poincare signals (the boxcar suppresses the
// mean-motion harmonics, which are far above the secular band).
inline DriveResult integrateDrive(const LoadedConfig& lc) {
    const SystemConfig& cfg = lc.system;
    const auto i0 = static_cast<std::size_t>(lc.innerCount);
    if (cfg.planets.size() != i0 + 2)
        throw std::invalid_argument("integrateDrive: expected exactly two drive planets");

    PlanetarySystem sys;
    sys.G = cfg.G;
    sys.m0 = cfg.m0;
    SystemState st;
    st.t = 0.0;
    double minPeriod = 1e300;
    for (std::size_t j = i0; j < cfg.planets.size(); ++j) {
        const PlanetConfig& pc = cfg.planets[j];
        sys.m.push_back(pc.mass);
        const BodyParams bp = cfg.body(static_cast<int>(j));
        Vec3 r, v;
        cartesianFromElements(bp.mu(), pc.el, r, v);
        st.r.push_back(r);
        st.p.push_back(bp.beta() * v);
        minPeriod = std::min(minPeriod, 2.0 * std::numbers::pi / bp.meanMotion(pc.el.a));
    }
    toLaplaceFrame(st);

    const RunSettings& rs = lc.run;
    const double dtWanted = minPeriod / rs.stepsPerPeriod;
    const auto stepsPerBin =
        static_cast<std::size_t>(std::ceil(rs.driveSpacing / dtWanted));
    const double dt = rs.driveSpacing / static_cast<double>(stepsPerBin);
    const auto bins = static_cast<std::size_t>(std::llround(rs.driveSpan / rs.driveSpacing));

    Sbab3Integrator integ(sys, dt);
    const double E0 = totalEnergy(sys, st);

    DriveResult out;
    out.dt = dt;
    out.samples.reserve(bins);
    double maxDrift = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        DriveSample acc;
        double tAcc = 0.0;
        for (std::size_t s = 0; s < stepsPerBin; ++s) {
            integ.step(st);
            tAcc += st.t;
            for (std::size_t j = 0; j < 2; ++j) {
                const BodyParams bp = cfg.body(static_cast<int>(i0 + j));
                const Vec3 v = (1.0 / bp.beta()) * st.p[j];
                const OrbitalElements el = elementsFromCartesian(bp.mu(), st.r[j], v);
                const PoincareVars pv = poincareFromElements(bp, el);
                acc.z[j][0] += std::complex<double>(pv.xi, pv.eta);
                acc.z[j][1] += std::complex<double>(pv.P, pv.Q);
            }
        }
        const double w = 1.0 / static_cast<double>(stepsPerBin);
        acc.t = tAcc * w;
        for (auto& planet : acc.z)
            for (auto& sig : planet) sig *= w;
        out.samples.push_back(acc);
        maxDrift = std::max(maxDrift, std::abs((totalEnergy(sys, st) - E0) / E0));
    }
    out.maxEnergyDrift = maxDrift;
    return out;
}

// --- stage 2: quasi-periodic decomposition -----------------------------------

struct DriveAnalysis {
    std::array<double, 3> fundamentals{};           // [rad/yr]
    QPDecomposition qp;                             // snapped and refit lines
    std::array<std::vector<SpectralLine>, 4> lines; // raw FA, order: ecc c, ecc d, inc c, inc d
    double maxResidual = 0.0;                       // worst relative model residual
};

namespace pipedetail {

inline SampledSignal signalOf(const std::vector<DriveSample>& rows, std::size_t planet,
                              std::size_t which) {
    SampledSignal sig;
    sig.values.reserve(rows.size());
    for (const auto& r : rows) sig.values.push_back(r.z[planet][which]);
    sig.t0 = rows.front().t;
    sig.dt = rows.size() > 1 ? rows[1].t - rows[0].t : 1.0;
    return sig;
}

// Strongest line at least minSeparation away from every frequency in `away`.
inline const SpectralLine& dominantLine(const std::vector<SpectralLine>& lines,
                                        const std::vector<double>& away,
                                        double minSeparation) {
    for (const auto& l : lines) {
        bool clear = true;
        for (double w : away)
            if (std::abs(l.omega - w) < minSeparation) clear = false;
        if (clear) return l;
    }
    throw std::runtime_error("drive analysis: no isolated dominant line found");
}

// Re-fit amplitudes and phases of a signal at exactly the labelled
// frequencies k . fundamentals.
inline std::vector<QPHarmonic> snapAndRefit(const SampledSignal& sig,
                                            const std::vector<SpectralLine>& lines,
                                            const std::array<double, 3>& fund,
                                            double* residual) {
    std::vector<std::array<int, 3>> ks;
    std::vector<double> omegas;
    for (const auto& l : lines) {
        if (!l.k) continue;
        const auto& k = *l.k;
        if (std::find(ks.begin(), ks.end(), k) != ks.end()) continue;
        ks.push_back(k);
        omegas.push_back(k[0] * fund[0] + k[1] * fund[1] + k[2] * fund[2]);
    }
    if (ks.empty()) throw std::runtime_error("drive analysis: no labelled lines to refit");
    const auto amps = fadetail::fitAmplitudes(sig, omegas);
    std::vector<QPHarmonic> out;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        QPHarmonic h;
        h.k = ks[i];
        h.amp = std::abs(amps[i]);
        h.phase = std::arg(amps[i]);
        out.push_back(h);
    }
    if (residual) {
        double num = 0.0, den = 0.0;
        for (std::size_t n = 0; n < sig.values.size(); ++n) {
            const double t = sig.t0 + sig.dt * static_cast<double>(n);
            std::complex<double> model = 0.0;
            for (std::size_t i = 0; i < ks.size(); ++i)
                model += amps[i] * std::polar(1.0, omegas[i] * t);
            num += std::norm(sig.values[n] - model);
            den += std::norm(sig.values[n]);
        }
        *residual = std::sqrt(num / den);
    }
    return out;
}

// Iterative cleanup of a greedy decomposition: re-refine each frequency on
// the signal with all other fitted lines subtracted, then refit amplitudes
// jointly.  Close line pairs bias the one-pass estimates; a few sweeps
// remove the bias.
inline std::vector<SpectralLine> polishLines(const SampledSignal& sig,
                                             std::vector<SpectralLine> lines, int sweeps = 3) {
    const std::size_t N = sig.values.size();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t i = 0; i < lines.size(); ++i) {
            SampledSignal resid = sig;
            for (std::size_t n = 0; n < N; ++n) {
                const double t = sig.t0 + sig.dt * static_cast<double>(n);
                for (std::size_t j = 0; j < lines.size(); ++j)
                    if (j != i) resid.values[n] -= lines[j].eval(t);
            }
            try {
                lines[i].omega = refineFrequency(resid, lines[i].omega).omega;
            } catch (const std::runtime_error&) {
                // weak line drowned by its neighbours: keep the old estimate
            }
        }
        std::vector<double> omegas;
        for (const auto& l : lines) omegas.push_back(l.omega);
        const auto amps = fadetail::fitAmplitudes(sig, omegas);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            lines[i].A = std::abs(amps[i]);
            lines[i].theta = std::arg(amps[i]);
            if (lines[i].theta < 0.0) lines[i].theta += 2.0 * std::numbers::pi;
        }
    }
    std::stable_sort(lines.begin(), lines.end(),
                     [](const SpectralLine& a, const SpectralLine& b) { return a.A > b.A; });
    return lines;
}

}  // namespace pipedetail

inline DriveAnalysis analyzeDrive(const std::vector<DriveSample>& rows, const RunSettings& rs) {
    if (rows.size() < 16) throw std::invalid_argument("analyzeDrive: too few samples");
    DriveAnalysis out;

    std::array<SampledSignal, 4> sigs{
        pipedetail::signalOf(rows, 0, 0), pipedetail::signalOf(rows, 1, 0),
        pipedetail::signalOf(rows, 0, 1), pipedetail::signalOf(rows, 1, 1)};
    const int nLines = std::max(rs.eccLines, rs.incLines) + 2;
    for (std::size_t i = 0; i < 4; ++i)
        out.lines[i] = pipedetail::polishLines(sigs[i], decompose(sigs[i], nLines));

    // fundamentals: proper pericenter modes of each planet and the common
    // nodal mode, read off the dominant isolated lines
    const double sep = 3.0 * sigs[0].fourierBin();
    const double w3 = pipedetail::dominantLine(out.lines[0], {}, sep).omega;
    const double w4 = pipedetail::dominantLine(out.lines[1], {w3}, sep).omega;
    const double w5 = pipedetail::dominantLine(out.lines[2], {0.0}, sep).omega;
    out.fundamentals = {w3, w4, w5};

    for (auto& ls : out.lines) {
        ls = identifyHarmonics(ls, out.fundamentals, rs.labelOrder, rs.labelTol);
        // The complex signals rotate with unit charge under a simultaneous
        // rotation of all pericenters and nodes, so every genuine harmonic
        // satisfies k1 + k2 + k3 = 1; anything else is a misidentified
        // component and would break the rotation invariance of the model.
        for (auto& l : ls)
            if (l.k && (*l.k)[0] + (*l.k)[1] + (*l.k)[2] != 1) l.k.reset();
    }

    out.qp.omega = out.fundamentals;
    for (std::size_t planet = 0; planet < 2; ++planet)
        for (std::size_t which = 0; which < 2; ++which) {
            const int keep = which == 0 ? rs.eccLines : rs.incLines;
            auto lines = out.lines[2 * which + planet];
            if (static_cast<int>(lines.size()) > keep)
                lines.resize(static_cast<std::size_t>(keep));
            double resid = 0.0;
            out.qp.signals[planet][which] = pipedetail::snapAndRefit(
                sigs[2 * which + planet], lines, out.fundamentals, &resid);
            out.maxResidual = std::max(out.maxResidual, resid);
        }
    out.qp.sortByAmplitude();
    return out;
}

// --- restricted flow (fast numeric integration of the assembled model) -------

class RestrictedFlow {
public:
    RestrictedFlow(const TruncatedSeries& H, std::array<double, 3> omega)
        : omega_(omega),
          dXi_(H.derivativeRadial(0)),
          dEta_(H.derivativeAngular(0)),
          dP_(H.derivativeRadial(1)),
          dQ_(H.derivativeAngular(1)) {
        if (H.dof() != 5) throw std::invalid_argument("RestrictedFlow: expected 5-pair series");
    }

    struct State {
        double xi = 0.0, eta = 0.0, P = 0.0, Q = 0.0;
    };

    void rhs(const State& s, State& ds, double t) const {
        PointValues z{};
        z[0] = {s.xi, s.eta};
        z[1] = {s.P, s.Q};
        for (std::size_t j = 0; j < 3; ++j) z[2 + j] = {0.0, omega_[j] * t};
        ds.xi = -dEta_.realAt(z);
        ds.eta = dXi_.realAt(z);
        ds.P = -dQ_.realAt(z);
        ds.Q = dP_.realAt(z);
    }

    void integrate(State s, const std::vector<double>& times,
                   const std::function<void(double, const State&)>& observer,
                   double tolAbs = 1e-12, double tolRel = 1e-12) const {
        namespace odeint = boost::numeric::odeint;
        using V = std::array<double, 4>;
        auto sys = [this](const V& y, V& dy, double t) {
            State st{y[0], y[1], y[2], y[3]}, d;
            rhs(st, d, t);
            dy = {d.xi, d.eta, d.P, d.Q};
        };
        V y{s.xi, s.eta, s.P, s.Q};
        auto stepper =
            odeint::make_controlled(tolAbs, tolRel, odeint::runge_kutta_fehlberg78<V>());
        double t = times.front();
        observer(t, State{y[0], y[1], y[2], y[3]});
        for (std::size_t i = 1; i < times.size(); ++i) {
            odeint::integrate_adaptive(stepper, sys, y, t, times[i],
                                       std::min(1.0, times[i] - t));
            t = times[i];
            observer(t, State{y[0], y[1], y[2], y[3]});
        }
    }

private:
    std::array<double, 3> omega_;
    SeriesEvaluator dXi_, dEta_, dP_, dQ_;
};

// --- stage 3/4: torus construction --------------------------------------------

// Initial secular point of the modelled planet in the chart of the assembled
// Hamiltonian (drive actions start at zero, drive angles at zero).
inline ChartPoint innerInitialPoint(const SystemConfig& cfg) {
    const PoincareVars pv = poincareFromElements(cfg.body(0), cfg.planets.at(0).el);
    ChartPoint z;
    z.dof = 5;
    z.kinds = {PairKind::cartesian, PairKind::cartesian, PairKind::actionAngle,
               PairKind::actionAngle, PairKind::actionAngle};
    z.z[0] = {pv.xi, pv.eta};
    z.z[1] = {pv.P, pv.Q};
    return z;
}

// The elliptic-stage chart replaces the two cartesian pairs by sqrt-action
// pairs; converting a point is the polar change on those pairs.
inline ChartPoint toSqrtActionChart(const ChartPoint& z) {
    ChartPoint out = z;
    for (std::size_t j = 0; j < 2; ++j) {
        const double x = z.z[j].radial, y = z.z[j].angular;
        out.z[j] = {0.5 * (x * x + y * y), std::atan2(y, x)};
        out.kinds[j] = PairKind::sqrtAction;
    }
    return out;
}

inline ChartPoint toCartesianChart(const ChartPoint& z) {
    ChartPoint out = z;
    for (std::size_t j = 0; j < 2; ++j) {
        const double r = std::sqrt(2.0 * std::max(0.0, z.z[j].radial));
        out.z[j] = {r * std::cos(z.z[j].angular), r * std::sin(z.z[j].angular)};
        out.kinds[j] = PairKind::cartesian;
    }
    return out;
}

struct InnerFrequencies {
    double omega1Tilde = 0.0;  // proper pericenter frequency [rad/yr]
    double omega2Tilde = 0.0;  // proper nodal frequency [rad/yr]
};

// Proper frequencies of the modelled planet: frequency analysis of its
// secular motion under the assembled Hamiltonian, keeping the strongest
// lines that are not harmonics of the drive.
inline InnerFrequencies innerFrequencies(const TruncatedSeries& H, const LoadedConfig& lc,
                                         const DriveAnalysis& fa, double span = 131072.0,
                                         double spacing = 16.0) {
    const RestrictedFlow flow(H, fa.fundamentals);
    const ChartPoint z0 = innerInitialPoint(lc.system);
    RestrictedFlow::State s0{z0.z[0].radial, z0.z[0].angular, z0.z[1].radial, z0.z[1].angular};

    const auto n = static_cast<std::size_t>(std::llround(span / spacing));
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = spacing * static_cast<double>(i);

    SampledSignal ecc, inc;
    ecc.dt = inc.dt = spacing;
    flow.integrate(s0, times, [&](double, const RestrictedFlow::State& s) {
        ecc.values.emplace_back(s.xi, s.eta);
        inc.values.emplace_back(s.P, s.Q);
    });

    auto proper = [&](const SampledSignal& sig) {
        auto lines = decompose(sig, 6);
        lines = identifyHarmonics(lines, fa.fundamentals, lc.run.labelOrder, lc.run.labelTol);
        for (const auto& l : lines)
            if (!l.k) return l.omega;
        throw std::runtime_error("innerFrequencies: all lines identified as drive harmonics");
    };
    return {proper(ecc), proper(inc)};
}

// Prepare the assembled Hamiltonian for the normal-form stages: give it a drop
// threshold so Lie-series tails terminate (the assembly keeps every
// coefficient), rewrite the cartesian pairs in sqrt-action form, and project
// onto the rotation-invariant part.  The model is exactly invariant, so
// monomials with nonzero total harmonic are fit noise; left in, small divisors
// can amplify them past the reduction's invariance gate.
inline TruncatedSeries invariantPolarForm(const TruncatedSeries& H) {
    TruncatedSeries Hp = H;
    Hp.policy().dropThreshold = 1e-22;
    Hp.prune();
    for (int j = 0; j < Hp.dof(); ++j)
        if (Hp.kind(j) == PairKind::cartesian) Hp = polarSubstitution(Hp, j);
    return Hp.filter([&](const Monomial& m, std::complex<double>) {
        int ksum = 0;
        for (int j = 0; j < Hp.dof(); ++j) ksum += m.harm[static_cast<std::size_t>(j)];
        return ksum == 0;
    });
}

struct TorusConstruction {
    EllipticState elliptic;
    InnerFrequencies proper;
    std::array<double, 4> targets{};   // frequency vector of the reduced model
    std::array<double, 2> Istar{};     // converged translation vector
    double P5 = 0.0;                   // conserved reduction momentum
    double actionScale = 1.0;          // momentum unit of the reduced chart
    NewtonTrace newton;
    KolmogorovState torus;             // normalized reduced model
    ChartPoint z0normalized;           // initial point in the torus chart
};

inline TorusConstruction buildTorus(const TruncatedSeries& H, const LoadedConfig& lc,
                                    const DriveAnalysis& fa) {
    const RunSettings& rs = lc.run;
    TorusConstruction tc;
    tc.elliptic = ellipticNormalize(invariantPolarForm(H));
    tc.proper = innerFrequencies(H, lc, fa);
    tc.targets = frequencyTargets(tc.proper.omega1Tilde, tc.proper.omega2Tilde, fa.fundamentals);

    // initial guess of the translation vector: the transverse actions of the
    // initial point, mapped through the elliptic normalization
    const ChartPoint z0e = toSqrtActionChart(innerInitialPoint(lc.system));
    const ChartPoint z0n = tc.elliptic.generators.toNormalized(z0e);
    std::array<double, 2> I{z0n.z[0].radial, z0n.z[1].radial};
    tc.P5 = z0n.z[0].radial + z0n.z[1].radial;
    tc.actionScale = tc.P5;

    auto omegaOf = [&](std::array<double, 2> Iv) {
        KolmogorovState ks = reduceAngularMomentum(tc.elliptic, Iv[0], Iv[1], tc.P5, 2,
                                                   rs.reductionFourierSteps, tc.actionScale);
        ks = kolmogorovNormalize(ks, rs.torusSteps);
        return std::array<double, 2>{ks.omega[0], ks.omega[1]};
    };
    auto [Istar, trace] = newtonRefine(omegaOf, I, {tc.targets[0], tc.targets[1]}, rs.newtonTol,
                                       rs.newtonMaxIter);
    tc.Istar = Istar;
    tc.newton = std::move(trace);

    KolmogorovState ks = reduceAngularMomentum(tc.elliptic, Istar[0], Istar[1], tc.P5, 2,
                                               rs.reductionFourierSteps, tc.actionScale);
    tc.torus = kolmogorovNormalize(std::move(ks), rs.torusSteps);

    // initial point in the fully normalized chart (reduced momenta are
    // measured in units of actionScale)
    ReductionParams rp{Istar[0], Istar[1], tc.P5};
    ChartPoint z0r = reductionFromElliptic(rp, z0n);
    for (std::size_t j = 0; j < 4; ++j) z0r.z[j].radial /= tc.actionScale;
    tc.z0normalized = tc.torus.generators.toNormalized(z0r);
    return tc;
}

// Point of the constructed torus at time t, in the original secular chart
// (cartesian pairs first).  The torus is P = 0 in the normalized chart, with
// angles advancing linearly.
inline ChartPoint semiAnalyticPoint(const TorusConstruction& tc, double t,
                                    const std::array<double, 3>& fundamentals) {
    ChartPoint zk;
    zk.dof = 4;
    zk.kinds.fill(PairKind::actionAngle);
    for (std::size_t j = 0; j < 4; ++j)
        zk.z[j] = {0.0, tc.z0normalized.z[j].angular + tc.torus.omega[j] * t};
    ChartPoint zr = tc.torus.generators.toOriginal(zk);
    for (std::size_t j = 0; j < 4; ++j) zr.z[j].radial *= tc.actionScale;
    zr.dof = 5;
    zr.kinds.fill(PairKind::actionAngle);
    zr.z[4] = {tc.P5, fundamentals[2] * t};
    const ReductionParams rp{tc.Istar[0], tc.Istar[1], tc.P5};
    ChartPoint ze = reductionToElliptic(rp, zr);
    ze = tc.elliptic.generators.toOriginal(ze);
    return toCartesianChart(ze);
}

// --- stage 5: orbit comparison -------------------------------------------------

struct OrbitComparison {
    struct Row {
        double t = 0.0;
        double eccNumeric = 0.0, eccSemi = 0.0;  // e of the modelled planet
        double incNumeric = 0.0, incSemi = 0.0;  // i [rad]
    };
    std::vector<Row> rows;
    double maxEccDeviation = 0.0;
    double maxIncDeviation = 0.0;  // [rad]
};

inline OrbitComparison compareOrbits(const TruncatedSeries& H, const LoadedConfig& lc,
                                     const DriveAnalysis& fa, const TorusConstruction& tc) {
    const RunSettings& rs = lc.run;
    const BodyParams bp = lc.system.body(0);
    const double Lambda = bp.Lambda(lc.system.planets.at(0).el.a);

    auto elementsOf = [&](double xi, double eta, double P, double Q) {
        PoincareVars pv;
        pv.xi = xi;
        pv.eta = eta;
        pv.P = P;
        pv.Q = Q;
        pv.Lambda = Lambda;
        return elementsFromPoincare(bp, pv);
    };

    const auto n = static_cast<std::size_t>(std::llround(rs.orbitSpan / rs.orbitSpacing)) + 1;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = rs.orbitSpacing * static_cast<double>(i);

    OrbitComparison out;
    out.rows.resize(n);
    const RestrictedFlow flow(H, fa.fundamentals);
    const ChartPoint z0 = innerInitialPoint(lc.system);
    RestrictedFlow::State s0{z0.z[0].radial, z0.z[0].angular, z0.z[1].radial, z0.z[1].angular};
    std::size_t idx = 0;
    flow.integrate(s0, times, [&](double t, const RestrictedFlow::State& s) {
        const OrbitalElements el = elementsOf(s.xi, s.eta, s.P, s.Q);
        out.rows[idx].t = t;
        out.rows[idx].eccNumeric = el.e;
        out.rows[idx].incNumeric = el.inc;
        ++idx;
    });

    for (std::size_t i = 0; i < n; ++i) {
        const ChartPoint z = semiAnalyticPoint(tc, times[i], fa.fundamentals);
        const OrbitalElements el =
            elementsOf(z.z[0].radial, z.z[0].angular, z.z[1].radial, z.z[1].angular);
        out.rows[i].eccSemi = el.e;
        out.rows[i].incSemi = el.inc;
        out.maxEccDeviation =
            std::max(out.maxEccDeviation, std::abs(el.e - out.rows[i].eccNumeric));
        out.maxIncDeviation =
            std::max(out.maxIncDeviation, std::abs(el.inc - out.rows[i].incNumeric));
    }
    return out;
}

// --- stage 6: handoff to the norm-bound iteration ------------------------------

// Widened reduction around the converged translation vector, normalized for
// all but the last kept order; the assembled remainder seeds the two-regime
// norm-bound run.
inline TruncatedSeries exportForBounds(const TorusConstruction& tc, const RunSettings& rs) {
    KolmogorovState ks = reduceAngularMomentum(tc.elliptic, tc.Istar[0], tc.Istar[1], tc.P5, 2,
                                               rs.exportFourierSteps, tc.actionScale);
    ks = kolmogorovNormalize(std::move(ks), rs.exportFourierSteps - 1);
    return ks.assembled();
}

}  // namespace sqpr
