#pragma once
// Direct dynamics:
//  - universal-variable Kepler propagation,
//  - orbital elements <-> astrocentric cartesian states,
//  - invariant-plane (total angular momentum) frame,
//  - SBAB3 symplectic integrator for the planetary Hamiltonian
//      H = sum_j [ p_j^2/(2 beta_j) - G m0 m_j / r_j ]
//        + sum_{i<j} [ p_i . p_j / m0 - G m_i m_j / |r_i - r_j| ],
//  - adaptive integration of the secular quasi-periodic flow.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "sqpr/canon.hpp"
#include "sqpr/pseries.hpp"

namespace sqpr {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

// --- Kepler two-body propagation (universal variables) ----------------------

namespace kepdetail {

inline void stumpff(double z, double& C, double& S) {
    if (std::abs(z) < 1e-6) {
        C = 1.0 / 2.0 - z / 24.0 + z * z / 720.0 - z * z * z / 40320.0;
        S = 1.0 / 6.0 - z / 120.0 + z * z / 5040.0 - z * z * z / 362880.0;
    } else if (z > 0.0) {
        const double sz = std::sqrt(z);
        C = (1.0 - std::cos(sz)) / z;
        S = (sz - std::sin(sz)) / (z * sz);
    } else {
        const double sz = std::sqrt(-z);
        C = (std::cosh(sz) - 1.0) / (-z);
        S = (std::sinh(sz) - sz) / (-z * sz);
    }
}

} // namespace kepdetail

// Propagate (r0, v0) by dt under a central mu.  Relative tolerance 1e-14 on
// the universal Kepler equation.
inline void keplerPropagate(double mu, Vec3& r, Vec3& v, double dt) {
    if (dt == 0.0) return;
    const double r0 = r.norm();
    const double vr0 = r.dot(v) / r0;
    const double alpha = 2.0 / r0 - v.dot(v) / mu;
    const double smu = std::sqrt(mu);
    double chi = smu * std::abs(alpha) * dt;
    if (alpha <= 1e-12) chi = smu * dt / r0; // near-parabolic fallback guess
    double C = 0.0, S = 0.0;
    for (int it = 0; it < 100; ++it) {
        const double z = alpha * chi * chi;
        kepdetail::stumpff(z, C, S);
        const double F = r0 * vr0 / smu * chi * chi * C + (1.0 - alpha * r0) * chi * chi * chi * S +
                         r0 * chi - smu * dt;
        const double dF = r0 * vr0 / smu * chi * (1.0 - z * S) + (1.0 - alpha * r0) * chi * chi * C +
                          r0;
        const double dchi = F / dF;
        chi -= dchi;
        if (std::abs(dchi) <= 1e-14 * std::max(1.0, std::abs(chi))) {
            const double z2 = alpha * chi * chi;
            kepdetail::stumpff(z2, C, S);
            break;
        }
    }
    const double f = 1.0 - chi * chi * C / r0;
    const double g = dt - chi * chi * chi * S / smu;
    const Vec3 rn = f * r + g * v;
    const double rnn = rn.norm();
    const double fdot = smu / (rnn * r0) * (alpha * chi * chi * chi * S - chi);
    const double gdot = 1.0 - chi * chi * C / rnn;
    const Vec3 vn = fdot * r + gdot * v;
    r = rn;
    v = vn;
}

// --- elements <-> cartesian -------------------------------------------------

inline void solveKeplerEq(double M, double e, double& E) {
    E = (e < 0.8) ? M : std::numbers::pi;
    for (int it = 0; it < 64; ++it) {
        const double dE = (E - e * std::sin(E) - M) / (1.0 - e * std::cos(E));
        E -= dE;
        if (std::abs(dE) < 1e-15) break;
    }
}

// Astrocentric position and velocity from osculating elements (two-body, mu).
inline void cartesianFromElements(double mu, const OrbitalElements& el, Vec3& r, Vec3& v) {
    double E;
    solveKeplerEq(el.M, el.e, E);
    const double a = el.a, e = el.e;
    const double cE = std::cos(E), sE = std::sin(E);
    const double xo = a * (cE - e);
    const double yo = a * std::sqrt(1.0 - e * e) * sE;
    const double n = std::sqrt(mu / (a * a * a));
    const double rr = a * (1.0 - e * cE);
    const double vxo = -a * n * sE * a / rr;
    const double vyo = a * n * std::sqrt(1.0 - e * e) * cE * a / rr;
    const double co = std::cos(el.argPeri), so = std::sin(el.argPeri);
    const double cO = std::cos(el.node), sO = std::sin(el.node);
    const double ci = std::cos(el.inc), si = std::sin(el.inc);
    auto rot = [&](double X, double Y) {
        return Vec3{(cO * co - sO * so * ci) * X + (-cO * so - sO * co * ci) * Y,
                    (sO * co + cO * so * ci) * X + (-sO * so + cO * co * ci) * Y,
                    (so * si) * X + (co * si) * Y};
    };
    r = rot(xo, yo);
    v = rot(vxo, vyo);
}

inline OrbitalElements elementsFromCartesian(double mu, const Vec3& r, const Vec3& v) {
    OrbitalElements el;
    const double rn = r.norm();
    const Vec3 h = r.cross(v);
    const double hn = h.norm();
    const Vec3 evec = (1.0 / mu) * v.cross(h) - (1.0 / rn) * r;
    el.e = evec.norm();
    const double energy = 0.5 * v.dot(v) - mu / rn;
    el.a = -mu / (2.0 * energy);
    el.inc = std::acos(std::clamp(h.z / hn, -1.0, 1.0));
    const Vec3 nvec{-h.y, h.x, 0.0};
    const double nn = nvec.norm();
    el.node = (nn > 1e-14) ? std::atan2(nvec.y, nvec.x) : 0.0;
    double argPeri, trueAnom;
    if (el.e > 1e-14) {
        if (nn > 1e-14) {
            argPeri = std::acos(std::clamp(nvec.dot(evec) / (nn * el.e), -1.0, 1.0));
            if (evec.z < 0.0) argPeri = -argPeri;
        } else {
            argPeri = std::atan2(evec.y, evec.x);
        }
        trueAnom = std::acos(std::clamp(evec.dot(r) / (el.e * rn), -1.0, 1.0));
        if (r.dot(v) < 0.0) trueAnom = -trueAnom;
    } else {
        argPeri = 0.0;
        trueAnom = (nn > 1e-14) ? std::acos(std::clamp(nvec.dot(r) / (nn * rn), -1.0, 1.0))
                                : std::atan2(r.y, r.x);
        if (nn > 1e-14 && r.z < 0.0) trueAnom = -trueAnom;
    }
    el.argPeri = argPeri;
    const double E = 2.0 * std::atan2(std::sqrt(1.0 - el.e) * std::sin(0.5 * trueAnom),
                                      std::sqrt(1.0 + el.e) * std::cos(0.5 * trueAnom));
    el.M = E - el.e * std::sin(E);
    return el;
}

// --- planetary system state -------------------------------------------------

struct PlanetarySystem {
    double G = 4.0 * std::numbers::pi * std::numbers::pi;
    double m0 = 1.0;
    std::vector<double> m; // planet masses

    double beta(std::size_t j) const { return m0 * m[j] / (m0 + m[j]); }
    double mu(std::size_t j) const { return G * (m0 + m[j]); }
};

struct SystemState {
    double t = 0.0;
    std::vector<Vec3> r; // astrocentric positions
    std::vector<Vec3> p; // canonical momenta (beta_j * astro velocity for Kepler part)
};

inline double totalEnergy(const PlanetarySystem& sys, const SystemState& st) {
    double H = 0.0;
    const std::size_t n = sys.m.size();
    for (std::size_t j = 0; j < n; ++j)
        H += st.p[j].dot(st.p[j]) / (2.0 * sys.beta(j)) - sys.G * sys.m0 * sys.m[j] / st.r[j].norm();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            H += st.p[i].dot(st.p[j]) / sys.m0 -
                 sys.G * sys.m[i] * sys.m[j] / (st.r[i] - st.r[j]).norm();
    return H;
}

inline Vec3 totalAngularMomentum(const SystemState& st) {
    Vec3 L{};
    for (std::size_t j = 0; j < st.r.size(); ++j) L += st.r[j].cross(st.p[j]);
    return L;
}

// Rotation taking the total angular momentum to the +z axis ("Laplace frame").
// Returns the rotation matrix rows.
inline std::array<Vec3, 3> laplaceFrameRotation(const SystemState& st) {
    const Vec3 L = totalAngularMomentum(st);
    const double Ln = L.norm();
    if (Ln < 1e-300) return {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    const Vec3 e3 = (1.0 / Ln) * L;
    Vec3 node{-e3.y, e3.x, 0.0}; // z-hat cross e3
    const double nn = node.norm();
    Vec3 e1 = (nn > 1e-14) ? (1.0 / nn) * node : Vec3{1, 0, 0};
    const Vec3 e2 = e3.cross(e1);
    return {e1, e2, e3};
}

inline Vec3 applyRotation(const std::array<Vec3, 3>& R, const Vec3& x) {
    return {R[0].dot(x), R[1].dot(x), R[2].dot(x)};
}

inline void toLaplaceFrame(SystemState& st) {
    const auto R = laplaceFrameRotation(st);
    for (std::size_t j = 0; j < st.r.size(); ++j) {
        st.r[j] = applyRotation(R, st.r[j]);
        st.p[j] = applyRotation(R, st.p[j]);
    }
}

// --- SBAB3 ------------------------------------------------------------------

class Sbab3Integrator {
public:
    Sbab3Integrator(PlanetarySystem sys, double dt) : sys_(std::move(sys)), dt_(dt) {}

    const PlanetarySystem& system() const { return sys_; }
    double dt() const { return dt_; }

    void step(SystemState& st) const {
        // Gauss-Lobatto coefficients of the 3-stage scheme:
        // B(d1) A(c1) B(d2) A(c2) B(d2) A(c1) B(d1)
        static const double c1 = 0.5 * (1.0 - 1.0 / std::sqrt(5.0));
        static const double c2 = 1.0 / std::sqrt(5.0);
        static const double d1 = 1.0 / 12.0;
        static const double d2 = 5.0 / 12.0;
        stageB(st, d1 * dt_);
        stageA(st, c1 * dt_);
        stageB(st, d2 * dt_);
        stageA(st, c2 * dt_);
        stageB(st, d2 * dt_);
        stageA(st, c1 * dt_);
        stageB(st, d1 * dt_);
        st.t += dt_;
    }

private:
    void stageA(SystemState& st, double tau) const {
        for (std::size_t j = 0; j < sys_.m.size(); ++j) {
            Vec3 v = (1.0 / sys_.beta(j)) * st.p[j];
            keplerPropagate(sys_.mu(j), st.r[j], v, tau);
            st.p[j] = sys_.beta(j) * v;
        }
    }

    // Perturbation stage, itself split symmetrically:
    // momentum-coupling drift (tau/2), potential kick (tau), drift (tau/2).
    void stageB(SystemState& st, double tau) const {
        momentumDrift(st, 0.5 * tau);
        potentialKick(st, tau);
        momentumDrift(st, 0.5 * tau);
    }

    void momentumDrift(SystemState& st, double tau) const {
        const std::size_t n = sys_.m.size();
        Vec3 psum{};
        for (std::size_t j = 0; j < n; ++j) psum += st.p[j];
        for (std::size_t j = 0; j < n; ++j)
            st.r[j] += (tau / sys_.m0) * (psum - st.p[j]);
    }

    void potentialKick(SystemState& st, double tau) const {
        const std::size_t n = sys_.m.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const Vec3 d = st.r[i] - st.r[j];
                const double dn = d.norm();
                const Vec3 f = (sys_.G * sys_.m[i] * sys_.m[j] / (dn * dn * dn)) * d;
                st.p[i] -= tau * f;
                st.p[j] += tau * f;
            }
        }
    }

    PlanetarySystem sys_;
    double dt_;
};

// --- secular quasi-periodic flow --------------------------------------------

// State of the reduced secular model: one planet's secular Poincare pairs
// (xi, eta), (P, Q) plus the drift-pair actions p conjugate to the external
// angles q(t) = q0 + omega t.  The Hamiltonian series lives on pairs
// [cartesian (xi,eta), cartesian (P,Q), aa q3, aa q4, aa q5].
struct SecularFlowState {
    double xi = 0.0, eta = 0.0, P = 0.0, Q = 0.0;
    std::array<double, 3> p{}; // drift actions
};

class SecularFlow {
public:
    SecularFlow(TruncatedSeries H, std::array<double, 3> omega, std::array<double, 3> q0)
        : H_(std::move(H)), omega_(omega), q0_(q0) {
        if (H_.dof() != 5) throw std::invalid_argument("SecularFlow: expected 5-pair series");
        dXi_ = H_.derivativeRadial(0);
        dEta_ = H_.derivativeAngular(0);
        dP_ = H_.derivativeRadial(1);
        dQ_ = H_.derivativeAngular(1);
        for (int j = 0; j < 3; ++j) dq_[static_cast<std::size_t>(j)] = H_.derivativeAngular(2 + j);
    }

    const TruncatedSeries& hamiltonian() const { return H_; }

    std::array<double, 3> anglesAt(double t) const {
        return {q0_[0] + omega_[0] * t, q0_[1] + omega_[1] * t, q0_[2] + omega_[2] * t};
    }

    PointValues pointAt(const SecularFlowState& s, double t) const {
        PointValues z{};
        z[0] = {s.xi, s.eta};
        z[1] = {s.P, s.Q};
        const auto q = anglesAt(t);
        for (std::size_t j = 0; j < 3; ++j) z[2 + j] = {s.p[j], q[j]};
        return z;
    }

    // Hamilton's equations with (xi, P, p) momenta and (eta, Q, q) coordinates.
    void rhs(const SecularFlowState& s, SecularFlowState& ds, double t) const {
        const PointValues z = pointAt(s, t);
        ds.xi = -dEta_.evaluate(z).real();
        ds.eta = dXi_.evaluate(z).real();
        ds.P = -dQ_.evaluate(z).real();
        ds.Q = dP_.evaluate(z).real();
        for (std::size_t j = 0; j < 3; ++j) ds.p[j] = -dq_[j].evaluate(z).real();
    }

    double energy(const SecularFlowState& s, double t) const {
        return H_.evaluate(pointAt(s, t)).real();
    }

    // Integrate and sample at the given times (strictly increasing).
    void integrate(SecularFlowState s, const std::vector<double>& times,
                   const std::function<void(double, const SecularFlowState&)>& observer,
                   double tolAbs = 1e-12, double tolRel = 1e-12) const {
        namespace odeint = boost::numeric::odeint;
        using V = std::array<double, 7>;
        auto sys = [this](const V& y, V& dy, double t) {
            SecularFlowState st{y[0], y[1], y[2], y[3], {y[4], y[5], y[6]}};
            SecularFlowState d;
            rhs(st, d, t);
            dy = {d.xi, d.eta, d.P, d.Q, d.p[0], d.p[1], d.p[2]};
        };
        V y{s.xi, s.eta, s.P, s.Q, s.p[0], s.p[1], s.p[2]};
        auto stepper = odeint::make_controlled(tolAbs, tolRel,
                                               odeint::runge_kutta_fehlberg78<V>());
        double t = times.front();
        auto emit = [&](double tc) {
            observer(tc, SecularFlowState{y[0], y[1], y[2], y[3], {y[4], y[5], y[6]}});
        };
        emit(t);
        for (std::size_t i = 1; i < times.size(); ++i) {
            const double tNext = times[i];
            double dtTry = std::min(1.0, tNext - t);
            odeint::integrate_adaptive(stepper, sys, y, t, tNext, dtTry);
            t = tNext;
            emit(t);
        }
    }

private:
    TruncatedSeries H_;
    std::array<double, 3> omega_, q0_;
    TruncatedSeries dXi_, dEta_, dP_, dQ_;
    std::array<TruncatedSeries, 3> dq_;
};

} // namespace sqpr
