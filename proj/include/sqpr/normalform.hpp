#pragma once
// Normal-form engines on truncated Taylor-Fourier series:
//  - construction of an invariant elliptic (lower-dimensional) torus by a
//    three-generator normalization step,
//  - angular-momentum reduction of the normalized Hamiltonian to 4 DOF,
//  - torus normalization around a translated action origin (two-generator
//    "Kolmogorov" step) and the Newton refinement of the translation vector.
//
// Both engines keep the Hamiltonian split as
//     H = energy + kernel + sum_s f[s],
// where the kernel holds the exactly-linear momentum terms (and, in the
// elliptic stage, the diagonal quadratic transverse terms) and f[s] collects
// the perturbation of formal order s.  A generator produced at step r has
// order r; the contribution (1/j!) L_chi^j f[s] is booked at order s + j r and
// is dropped once that exceeds the last stored order.  Terms removed by a
// homological equation are zeroed explicitly after the transform (their
// cancellation holds by construction up to roundoff, which is checked).

#include <array>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sqpr/canon.hpp"
#include "sqpr/pseries.hpp"

namespace sqpr {

namespace nfdetail {

inline std::string describeHarmonics(const Monomial& m, int dof) {
    std::ostringstream ss;
    ss << '(';
    for (int j = 0; j < dof; ++j) {
        if (j) ss << ',';
        ss << static_cast<int>(m.harm[static_cast<std::size_t>(j)]);
    }
    ss << ')';
    return ss.str();
}

// Generator chi with {kernel, chi} = -rhs, where the kernel carries the
// angle frequency nu[j] on pair j: every monomial of rhs is divided by
// i * (sum_j harm_j nu[j]).  All rhs monomials must be angle dependent.
inline TruncatedSeries solveHomological(const TruncatedSeries& rhs, const std::vector<double>& nu,
                                        double divisorFloor, const std::string& stage) {
    TruncatedSeries chi = rhs.likeThis();
    for (const auto& [m, c] : rhs.terms()) {
        double d = 0.0;
        for (int j = 0; j < rhs.dof(); ++j)
            d += static_cast<double>(m.harm[static_cast<std::size_t>(j)]) * nu[static_cast<std::size_t>(j)];
        if (std::abs(d) <= divisorFloor) {
            std::ostringstream ss;
            ss << "resonance in " << stage << ": divisor " << d << " for harmonics "
               << describeHarmonics(m, rhs.dof()) << " is below the floor " << divisorFloor;
            throw std::runtime_error(ss.str());
        }
        chi.setCoeff(m, c / cplx(0.0, d));
    }
    return chi;
}

// exp(L_chi) applied to the labeled Hamiltonian kernel + sum_s f[s], with chi
// of formal order r.  Sources are the pre-transform components (descending
// order of s guarantees every target index was consumed before being written).
inline void applyGenerator(std::vector<TruncatedSeries>& f, const TruncatedSeries& kernel,
                           const TruncatedSeries& chi, int r) {
    const int last = static_cast<int>(f.size()) - 1;
    // Components first, descending in s: every target index s + j r > s has
    // already been consumed as a source, so sources stay pre-transform.  The
    // kernel contributions are merged afterwards for the same reason.
    TruncatedSeries term = kernel.likeThis();
    for (int s = last; s >= 0; --s) {
        if (f[static_cast<std::size_t>(s)].empty()) continue;
        term = f[static_cast<std::size_t>(s)];
        for (int j = 1; s + j * r <= last; ++j) {
            term = poissonBracket(term, chi);
            term *= 1.0 / static_cast<double>(j);
            if (term.empty()) break;
            f[static_cast<std::size_t>(s + j * r)] += term;
        }
    }
    term = kernel;
    for (int j = 1; j * r <= last; ++j) {
        term = poissonBracket(term, chi);
        term *= 1.0 / static_cast<double>(j);
        if (term.empty()) break;
        f[static_cast<std::size_t>(j * r)] += term;
    }
}

// Delete the angle-dependent action-degree-l monomials of comp; they were
// cancelled by a homological equation, so anything left is roundoff.
inline void zeroRemovedClass(TruncatedSeries& comp, int l, double scale) {
    double resid = 0.0;
    TruncatedSeries kept = comp.filter([&](const Monomial& m, cplx c) {
        if (comp.actionDegree(m) == l && comp.trigDegree(m) > 0) {
            resid += std::abs(c);
            return false;
        }
        return true;
    });
    if (resid > 1e-12 * std::max(1.0, scale))
        throw std::logic_error("normal form: homological cancellation residual " +
                               std::to_string(resid) + " too large");
    comp = std::move(kept);
}

// Move angle-free constants of comp into the energy.
inline void sweepEnergy(TruncatedSeries& comp, double& energy) {
    const Monomial one{};
    const cplx c = comp.coeff(one);
    if (c == cplx(0.0)) return;
    energy += c.real();
    comp = comp.filter([&](const Monomial& m, cplx) { return !(m == one); });
}

}  // namespace nfdetail

// --- elliptic-torus normalization -------------------------------------------

// Layout: leading sqrt-action pairs (transverse plane, frequencies Omega)
// followed by action-angle drift pairs (frequencies omega).  The perturbation
// components are momentum-free; the drift momenta appear only in the kernel,
// so omega never changes during the normalization.
struct EllipticState {
    double energy = 0.0;
    std::vector<double> omega;          // drift frequencies, one per action-angle pair
    std::vector<double> Omega;          // transverse frequencies, one per sqrt-action pair
    std::vector<TruncatedSeries> f;     // f[s]: formal order s, momentum-free
    int sqCount = 0;
    int stepsDone = 0;
    double divisorFloor = 1e-12;
    CanonicalMap generators;
    std::vector<std::array<double, 3>> normLog;  // per step: l1 norms of chi0, chi1, chi2

    int dof() const { return f.empty() ? 0 : f[0].dof(); }

    // Frequency conjugate to the angle of each pair: Omega then omega.
    std::vector<double> angleFrequencies() const {
        std::vector<double> nu(Omega.begin(), Omega.end());
        nu.insert(nu.end(), omega.begin(), omega.end());
        return nu;
    }

    TruncatedSeries kernelSeries() const {
        TruncatedSeries k = f.at(0).likeThis();
        for (int j = 0; j < sqCount; ++j) {
            Monomial m;
            m.exp[static_cast<std::size_t>(j)] = 2;
            k.setCoeff(m, Omega[static_cast<std::size_t>(j)]);
        }
        for (int j = sqCount; j < dof(); ++j) {
            Monomial m;
            m.exp[static_cast<std::size_t>(j)] = 1;
            k.setCoeff(m, omega[static_cast<std::size_t>(j - sqCount)]);
        }
        return k;
    }

    TruncatedSeries assembled() const {
        TruncatedSeries H = kernelSeries();
        H.addCoeff(Monomial{}, energy);
        for (const auto& c : f) H += c;
        return H;
    }
};

// Split a Hamiltonian (with any cartesian pairs rewritten in sqrt-action
// form) into kernel and order-labeled components.  The momentum dependence
// must be exactly linear with constant coefficients (the drift term).
inline EllipticState ellipticSetup(const TruncatedSeries& Hin) {
    TruncatedSeries H = Hin;
    for (int j = 0; j < H.dof(); ++j)
        if (H.kind(j) == PairKind::cartesian) H = polarSubstitution(H, j);

    EllipticState st;
    while (st.sqCount < H.dof() && H.kind(st.sqCount) == PairKind::sqrtAction) ++st.sqCount;
    for (int j = st.sqCount; j < H.dof(); ++j)
        if (H.kind(j) != PairKind::actionAngle)
            throw std::invalid_argument("ellipticSetup: pairs must be sqrt-action then action-angle");

    const int orders = H.policy().maxFourierStep;
    st.omega.assign(static_cast<std::size_t>(H.dof() - st.sqCount), 0.0);
    st.Omega.assign(static_cast<std::size_t>(st.sqCount), 0.0);
    st.f.assign(static_cast<std::size_t>(orders) + 1, H.likeThis());

    for (const auto& [m, c] : H.sortedTerms()) {
        int pdeg = 0;
        for (int j = st.sqCount; j < H.dof(); ++j) pdeg += m.exp[static_cast<std::size_t>(j)];
        if (pdeg > 0) {
            bool pure = (pdeg == 1) && (H.actionDegree(m) == 1) && (H.trigDegree(m) == 0);
            if (!pure)
                throw std::invalid_argument(
                    "ellipticSetup: momentum dependence beyond the linear drift term");
            for (int j = st.sqCount; j < H.dof(); ++j)
                if (m.exp[static_cast<std::size_t>(j)] == 1)
                    st.omega[static_cast<std::size_t>(j - st.sqCount)] += c.real();
            continue;
        }
        const int l = H.actionDegree(m);
        const int band = H.trigDegree(m);
        if (l == 0 && band == 0) {
            st.energy += c.real();
        } else if (l == 2 && band == 0) {
            for (int j = 0; j < st.sqCount; ++j)
                if (m.exp[static_cast<std::size_t>(j)] == 2)
                    st.Omega[static_cast<std::size_t>(j)] += c.real();
        } else {
            st.f[static_cast<std::size_t>(H.trigStep(m))].addCoeff(m, c);
        }
    }
    return st;
}

// One normalization step: generators chi0, chi1, chi2 remove the
// angle-dependent order-r terms of degree 0, 1, 2 in the square roots of the
// transverse actions; the surviving angle-free quadratic terms update Omega.
inline void ellipticStep(EllipticState& st) {
    const int last = static_cast<int>(st.f.size()) - 1;
    const int r = st.stepsDone + 1;
    if (r > last) throw std::logic_error("ellipticStep: all orders already normalized");

    auto& fr = st.f[static_cast<std::size_t>(r)];
    nfdetail::sweepEnergy(fr, st.energy);

    const TruncatedSeries kernel = st.kernelSeries();
    const std::vector<double> nu = st.angleFrequencies();
    std::array<double, 3> norms{};
    for (int l = 0; l <= 2; ++l) {
        const TruncatedSeries rhs = fr.projectActionDegree(l).filter(
            [&](const Monomial& m, cplx) { return fr.trigDegree(m) > 0; });
        if (rhs.empty()) continue;
        TruncatedSeries chi = nfdetail::solveHomological(
            rhs, nu, st.divisorFloor, "elliptic step " + std::to_string(r) + " (degree " + std::to_string(l) + ")");
        nfdetail::applyGenerator(st.f, kernel, chi, r);
        // cancellation roundoff scales with the full component, not just rhs
        nfdetail::zeroRemovedClass(fr, l, std::max(rhs.l1Norm(), fr.l1Norm()));
        norms[static_cast<std::size_t>(l)] = chi.l1Norm();
        st.generators.addLieStage(std::move(chi),
                                  "chi" + std::to_string(l) + "_step" + std::to_string(r));
    }

    // angle-free order-r terms join the kernel bookkeeping
    nfdetail::sweepEnergy(fr, st.energy);
    TruncatedSeries kept = fr.filter([&](const Monomial& m, cplx c) {
        if (fr.actionDegree(m) == 2 && fr.trigDegree(m) == 0) {
            for (int j = 0; j < st.sqCount; ++j)
                if (m.exp[static_cast<std::size_t>(j)] == 2)
                    st.Omega[static_cast<std::size_t>(j)] += c.real();
            return false;
        }
        return true;
    });
    fr = std::move(kept);

    st.stepsDone = r;
    st.normLog.push_back(norms);
}

inline EllipticState ellipticNormalize(const TruncatedSeries& H, int steps = -1) {
    EllipticState st = ellipticSetup(H);
    if (steps < 0) steps = static_cast<int>(st.f.size()) - 1;
    while (st.stepsDone < steps) ellipticStep(st);
    return st;
}

// --- angular-momentum reduction ----------------------------------------------

namespace nfdetail {

// Taylor coefficient of (Istar + P)^{l/2} at order n: binom(l/2, n) Istar^{l/2-n}.
inline double halfPowerCoeff(int l, int n, double Istar) {
    double binom = 1.0;
    for (int t = 0; t < n; ++t) binom *= (0.5 * l - t) / (t + 1);
    if (binom == 0.0) return 0.0;
    const double expn = 0.5 * l - n;
    if (Istar <= 0.0 && (expn < 0.0 || l % 2 != 0))
        throw std::invalid_argument("reduction: translation action must be positive");
    return binom * std::pow(Istar, expn);
}

}  // namespace nfdetail

struct KolmogorovState {
    double energy = 0.0;
    std::vector<double> omega;       // one per pair
    std::vector<TruncatedSeries> f;  // f[s]: formal order s
    int stepsDone = 0;
    double divisorFloor = 1e-12;
    CanonicalMap generators;
    std::vector<std::array<double, 2>> normLog;  // per step: l1 norms of chi1, chi2

    int dof() const { return f.empty() ? 0 : f[0].dof(); }

    TruncatedSeries kernelSeries() const {
        TruncatedSeries k = f.at(0).likeThis();
        for (int j = 0; j < dof(); ++j) {
            Monomial m;
            m.exp[static_cast<std::size_t>(j)] = 1;
            k.setCoeff(m, omega[static_cast<std::size_t>(j)]);
        }
        return k;
    }

    TruncatedSeries assembled() const {
        TruncatedSeries H = kernelSeries();
        H.addCoeff(Monomial{}, energy);
        for (const auto& c : f) H += c;
        return H;
    }
};

// Split an all-action-angle Hamiltonian into kernel (constant + linear
// angle-free momentum terms) and order-labeled components.
inline KolmogorovState kolmogorovSetup(const TruncatedSeries& H, double divisorFloor = 1e-12) {
    for (int j = 0; j < H.dof(); ++j)
        if (H.kind(j) != PairKind::actionAngle)
            throw std::invalid_argument("kolmogorovSetup: all pairs must be action-angle");
    KolmogorovState st;
    st.divisorFloor = divisorFloor;
    st.omega.assign(static_cast<std::size_t>(H.dof()), 0.0);
    st.f.assign(static_cast<std::size_t>(H.policy().maxFourierStep) + 1, H.likeThis());
    for (const auto& [m, c] : H.sortedTerms()) {
        const int l = H.actionDegree(m);
        const int band = H.trigDegree(m);
        if (l == 0 && band == 0) {
            st.energy += c.real();
        } else if (l == 1 && band == 0) {
            for (int j = 0; j < H.dof(); ++j)
                if (m.exp[static_cast<std::size_t>(j)] == 1)
                    st.omega[static_cast<std::size_t>(j)] += c.real();
        } else {
            st.f[static_cast<std::size_t>(H.trigStep(m))].addCoeff(m, c);
        }
    }
    return st;
}

// Reduce the elliptically-normalized Hamiltonian to 4 DOF: I_j = P_j + Istar_j
// with angles measured relative to the cyclic one, whose conjugate momentum is
// the conserved constant P5.  Requires two sqrt-action and three action-angle
// pairs; the input must be rotation invariant (every surviving monomial has
// harmonics summing to zero, which is exactly the condition for the cyclic
// angle to drop out).  Half-integer action powers are Taylor-expanded around
// P = 0 up to total degree actionDegCap.
//
// actionScale applies the homothetic canonical change P = scale * Phat with
// the Hamiltonian divided by the scale: frequencies are untouched while
// monomial coefficients pick up scale^(degree-1).  With scale of the order of
// the translation actions the coefficients measure the perturbation in units
// where the torus actions are O(1), which keeps the l1 norms of the
// normalization meaningful instead of being dominated by the 1/sqrt(Istar)
// Taylor factors.
inline KolmogorovState reduceAngularMomentum(const EllipticState& st, double I1star, double I2star,
                                             double P5, int actionDegCap = 2,
                                             int fourierSteps = 6, double actionScale = 1.0) {
    if (st.sqCount != 2 || st.dof() != 5)
        throw std::invalid_argument("reduceAngularMomentum: expected 2 sqrt-action + 3 drift pairs");

    const TruncatedSeries H = st.assembled();
    double defect = 0.0;
    for (const auto& [m, c] : H.terms()) {
        int ksum = 0;
        for (int j = 0; j < H.dof(); ++j) ksum += m.harm[static_cast<std::size_t>(j)];
        defect += std::abs(ksum) * std::abs(c);
    }
    if (defect > 1e-10 * H.l1Norm())
        throw std::runtime_error("reduceAngularMomentum: rotation-invariance residual " +
                                 std::to_string(defect) + " exceeds 1e-10 of the norm");

    TruncationPolicy pol = st.f[0].policy();
    pol.maxActionDeg = actionDegCap;
    pol.maxFourierStep = fourierSteps;
    std::array<PairKind, kMaxPairs> kinds{};
    kinds.fill(PairKind::actionAngle);
    TruncatedSeries out(4, kinds, pol);

    const std::array<double, 2> Istar{I1star, I2star};
    for (const auto& comp : st.f) {
        for (const auto& [m, c] : comp.sortedTerms()) {
            int ksum = 0;
            for (int j = 0; j < 5; ++j) ksum += m.harm[static_cast<std::size_t>(j)];
            if (ksum != 0) continue;  // bounded by the invariance check above
            const int l1 = m.exp[0], l2 = m.exp[1];
            for (int n1 = 0; n1 <= actionDegCap; ++n1) {
                const double b1 = nfdetail::halfPowerCoeff(l1, n1, Istar[0]);
                if (b1 == 0.0) continue;
                for (int n2 = 0; n1 + n2 <= actionDegCap; ++n2) {
                    const double b2 = nfdetail::halfPowerCoeff(l2, n2, Istar[1]);
                    if (b2 == 0.0) continue;
                    Monomial t;
                    t.exp[0] = static_cast<std::int8_t>(n1);
                    t.exp[1] = static_cast<std::int8_t>(n2);
                    for (int j = 0; j < 4; ++j) t.harm[static_cast<std::size_t>(j)] = m.harm[static_cast<std::size_t>(j)];
                    out.addCoeff(t, c * (b1 * b2) * std::pow(actionScale, n1 + n2 - 1));
                }
            }
        }
    }
    out.prune();

    KolmogorovState ks = kolmogorovSetup(out, st.divisorFloor);
    ks.energy +=
        (st.energy + st.omega[2] * P5 + st.Omega[0] * I1star + st.Omega[1] * I2star) / actionScale;
    ks.omega[0] += st.Omega[0] - st.omega[2];
    ks.omega[1] += st.Omega[1] - st.omega[2];
    ks.omega[2] += st.omega[0] - st.omega[2];
    ks.omega[3] += st.omega[1] - st.omega[2];
    return ks;
}

// --- torus normalization around the translated origin ------------------------

// One step: chi1(Q) removes the angle-dependent action-free order-r terms
// (their average joins the energy); chi2, linear in the actions, removes the
// angle-dependent linear terms, whose average updates omega.  Only momenta
// actually appearing in the perturbation can shift their frequency.
inline void kolmogorovStep(KolmogorovState& st) {
    const int last = static_cast<int>(st.f.size()) - 1;
    const int r = st.stepsDone + 1;
    if (r > last) throw std::logic_error("kolmogorovStep: all orders already normalized");
    auto& fr = st.f[static_cast<std::size_t>(r)];

    nfdetail::sweepEnergy(fr, st.energy);
    const TruncatedSeries kernel = st.kernelSeries();
    std::array<double, 2> norms{};

    const TruncatedSeries rhs0 = fr.projectActionDegree(0);
    if (!rhs0.empty()) {
        TruncatedSeries chi1 = nfdetail::solveHomological(
            rhs0, st.omega, st.divisorFloor, "torus step " + std::to_string(r) + " (chi1)");
        nfdetail::applyGenerator(st.f, kernel, chi1, r);
        nfdetail::zeroRemovedClass(fr, 0, std::max(rhs0.l1Norm(), fr.l1Norm()));
        norms[0] = chi1.l1Norm();
        st.generators.addLieStage(std::move(chi1), "chi1_step" + std::to_string(r));
    }

    const TruncatedSeries rhs1 = fr.projectActionDegree(1).filter(
        [&](const Monomial& m, cplx) { return fr.trigDegree(m) > 0; });
    if (!rhs1.empty()) {
        TruncatedSeries chi2 = nfdetail::solveHomological(
            rhs1, st.omega, st.divisorFloor, "torus step " + std::to_string(r) + " (chi2)");
        nfdetail::applyGenerator(st.f, kernel, chi2, r);
        nfdetail::zeroRemovedClass(fr, 1, std::max(rhs1.l1Norm(), fr.l1Norm()));
        norms[1] = chi2.l1Norm();
        st.generators.addLieStage(std::move(chi2), "chi2_step" + std::to_string(r));
    }

    // frequency update from the surviving angle-free linear terms
    TruncatedSeries kept = fr.filter([&](const Monomial& m, cplx c) {
        if (fr.actionDegree(m) == 1 && fr.trigDegree(m) == 0) {
            for (int j = 0; j < fr.dof(); ++j)
                if (m.exp[static_cast<std::size_t>(j)] == 1)
                    st.omega[static_cast<std::size_t>(j)] += c.real();
            return false;
        }
        return true;
    });
    fr = std::move(kept);

    st.stepsDone = r;
    st.normLog.push_back(norms);
}

inline KolmogorovState kolmogorovNormalize(KolmogorovState st, int steps = -1) {
    if (steps < 0) steps = static_cast<int>(st.f.size()) - 1;
    while (st.stepsDone < steps) kolmogorovStep(st);
    return st;
}

// --- Newton refinement of the translation vector ------------------------------

struct NewtonTrace {
    struct Iterate {
        std::array<double, 2> Istar{};
        std::array<double, 2> dOmega{};
        double dOmegaNorm = 0.0;
        std::array<double, 2> h{};    // finite-difference increments (unset on acceptance)
        std::array<double, 4> jac{};  // row-major 2x2 estimate
    };
    std::vector<Iterate> iterates;
    bool converged = false;

    // Newton updates actually applied before acceptance.
    int iterations() const { return static_cast<int>(iterates.size()) - 1; }
};

// Drive omegaOf (translation vector -> first two frequencies after a full
// normalization) to the target with Newton iterations; the 2x2 Jacobian is
// estimated by one-sided finite differences with increments I_i/100 (absolute
// 1e-8 when the component vanishes).
template <class F>
inline std::pair<std::array<double, 2>, NewtonTrace> newtonRefine(
    F&& omegaOf, std::array<double, 2> I, const std::array<double, 2>& target, double tol = 1e-10,
    int maxIter = 10) {
    NewtonTrace tr;
    for (int it = 0;; ++it) {
        const std::array<double, 2> w = omegaOf(I);
        NewtonTrace::Iterate rec;
        rec.Istar = I;
        rec.dOmega = {w[0] - target[0], w[1] - target[1]};
        rec.dOmegaNorm = std::max(std::abs(rec.dOmega[0]), std::abs(rec.dOmega[1]));
        if (rec.dOmegaNorm < tol) {
            tr.iterates.push_back(rec);
            tr.converged = true;
            return {I, tr};
        }
        if (it == maxIter) {
            tr.iterates.push_back(rec);
            throw std::runtime_error("newtonRefine: iteration cap " + std::to_string(maxIter) +
                                     " exceeded, frequency discrepancy " +
                                     std::to_string(rec.dOmegaNorm));
        }
        const double h1 = (I[0] != 0.0) ? I[0] / 100.0 : 1e-8;
        const double h2 = (I[1] != 0.0) ? I[1] / 100.0 : 1e-8;
        const std::array<double, 2> w1 = omegaOf({I[0] + h1, I[1]});
        const std::array<double, 2> w2 = omegaOf({I[0], I[1] + h2});
        const double j11 = (w1[0] - w[0]) / h1, j12 = (w2[0] - w[0]) / h2;
        const double j21 = (w1[1] - w[1]) / h1, j22 = (w2[1] - w[1]) / h2;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-30)
            throw std::runtime_error("newtonRefine: singular frequency Jacobian (|det| = " +
                                     std::to_string(std::abs(det)) + ")");
        rec.h = {h1, h2};
        rec.jac = {j11, j12, j21, j22};
        tr.iterates.push_back(rec);
        I[0] -= (j22 * rec.dOmega[0] - j12 * rec.dOmega[1]) / det;
        I[1] -= (-j21 * rec.dOmega[0] + j11 * rec.dOmega[1]) / det;
    }
}

// Target frequency vector of the reduced model: the two torus frequencies from
// the frequency analysis and the two outer drift frequencies, all measured
// relative to the cyclic angle's frequency (the third fundamental).
inline std::array<double, 4> frequencyTargets(double omega1Tilde, double omega2Tilde,
                                              const std::array<double, 3>& fundamentals) {
    return {omega1Tilde - fundamentals[2], omega2Tilde - fundamentals[2],
            fundamentals[0] - fundamentals[2], fundamentals[1] - fundamentals[2]};
}

}  // namespace sqpr
