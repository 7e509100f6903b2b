#pragma once
// Canonical charts and transformations:
//  - Poincare secular variables <-> orbital elements,
//  - pointwise application of Lie-series coordinate changes,
//  - the rotation-invariance (angular momentum) reduction,
//  - composed canonical maps with on-disk manifests.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqpr/pseries.hpp"

namespace sqpr {

using PairValue = TruncatedSeries::PairValue;
using PointValues = std::array<PairValue, kMaxPairs>;

// --- two-body bookkeeping ---------------------------------------------------

struct BodyParams {
    double m0 = 1.0; // star mass
    double m = 0.0;  // planet mass
    double G = 4.0 * std::numbers::pi * std::numbers::pi;

    double beta() const { return m0 * m / (m0 + m); }
    double mu() const { return G * (m0 + m); }
    double Lambda(double a) const { return beta() * std::sqrt(mu() * a); }
    double meanMotion(double a) const { return std::sqrt(mu() / (a * a * a)); }
};

// Angles in radians; inc = inclination, argPeri = argument of pericenter,
// node = longitude of ascending node, M = mean anomaly.
struct OrbitalElements {
    double a = 0.0, e = 0.0, inc = 0.0, M = 0.0, argPeri = 0.0, node = 0.0;
};

// Secular Poincare variables of one body plus the fast pair (Lambda, lambda).
struct PoincareVars {
    double xi = 0.0, eta = 0.0; // eccentricity pair
    double P = 0.0, Q = 0.0;    // inclination pair
    double Lambda = 0.0;
    double lambda = 0.0; // mean longitude
};

inline PoincareVars poincareFromElements(const BodyParams& bp, const OrbitalElements& el) {
    PoincareVars pv;
    pv.Lambda = bp.Lambda(el.a);
    const double varpi = el.node + el.argPeri;
    pv.lambda = el.M + varpi;
    const double ecc2 = el.e * el.e;
    const double rGamma = std::sqrt(2.0 * pv.Lambda * (1.0 - std::sqrt(1.0 - ecc2)));
    pv.xi = rGamma * std::cos(varpi);
    pv.eta = -rGamma * std::sin(varpi);
    const double sqrtG = std::sqrt(pv.Lambda) * std::pow(1.0 - ecc2, 0.25);
    const double rTheta = 2.0 * sqrtG * std::sin(0.5 * el.inc);
    pv.P = rTheta * std::cos(el.node);
    pv.Q = -rTheta * std::sin(el.node);
    return pv;
}

inline OrbitalElements elementsFromPoincare(const BodyParams& bp, const PoincareVars& pv) {
    OrbitalElements el;
    const double L = pv.Lambda;
    el.a = L * L / (bp.beta() * bp.beta() * bp.mu());
    const double Gamma = 0.5 * (pv.xi * pv.xi + pv.eta * pv.eta);
    const double s = 1.0 - Gamma / L; // sqrt(1 - e^2)
    el.e = std::sqrt(std::max(0.0, 1.0 - s * s));
    const double varpi = (Gamma > 0.0) ? std::atan2(-pv.eta, pv.xi) : 0.0;
    const double Theta = 0.5 * (pv.P * pv.P + pv.Q * pv.Q);
    const double cosi = 1.0 - Theta / (L * s);
    el.inc = std::acos(std::clamp(cosi, -1.0, 1.0));
    el.node = (Theta > 0.0) ? std::atan2(-pv.Q, pv.P) : 0.0;
    el.argPeri = varpi - el.node;
    el.M = pv.lambda - varpi;
    return el;
}

// --- Lie-series point maps --------------------------------------------------

// A point in a chart matching a series shape: per pair (radial, angular).
struct ChartPoint {
    int dof = 0;
    std::array<PairKind, kMaxPairs> kinds{};
    PointValues z{};
};

namespace canondetail {

// exp(L_chi) applied to the angle coordinate of pair j, minus the affine part:
// returns sum_{m>=1} L^{m-1}(dchi/dP_j)/m!.
inline TruncatedSeries lieAngleTail(const TruncatedSeries& chi, int j, int maxIter = 256) {
    TruncatedSeries t1 = chi.derivativeRadial(j);
    if (chi.kind(j) == PairKind::sqrtAction)
        throw std::invalid_argument("lieAngleTail: sqrt-action pair has no polynomial angle");
    TruncatedSeries acc = t1;
    TruncatedSeries term = t1;
    double fact = 1.0;
    for (int m = 2; m <= maxIter; ++m) {
        term = poissonBracket(term, chi);
        fact *= m;
        TruncatedSeries contrib = term;
        contrib *= 1.0 / fact;
        if (contrib.empty()) return acc;
        acc += contrib;
        if (term.empty()) return acc;
    }
    throw std::runtime_error("lieAngleTail: failed to terminate");
}

// Coordinate function of the radial variable of pair j (P, I=(sqrtI)^2 or xi).
inline TruncatedSeries radialCoordinate(const TruncatedSeries& shape, int j) {
    TruncatedSeries f = shape.likeThis();
    Monomial m;
    switch (shape.kind(j)) {
        case PairKind::actionAngle:
        case PairKind::cartesian:
            m.exp[static_cast<std::size_t>(j)] = 1;
            f.setCoeff(m, 1.0);
            break;
        case PairKind::sqrtAction:
            m.exp[static_cast<std::size_t>(j)] = 2;
            f.setCoeff(m, 1.0);
            break;
    }
    return f;
}

// For sqrt-action pairs the Cartesian coordinates x = sqrt(2I) cos a,
// y = sqrt(2I) sin a are polynomial objects; for cartesian pairs x = xi.
inline TruncatedSeries cartesianX(const TruncatedSeries& shape, int j) {
    TruncatedSeries f = shape.likeThis();
    Monomial m;
    const auto ju = static_cast<std::size_t>(j);
    if (shape.kind(j) == PairKind::sqrtAction) {
        const double r = std::numbers::sqrt2 / 2.0;
        m.exp[ju] = 1;
        m.harm[ju] = 1;
        f.setCoeff(m, cplx(r, 0.0));
        m.harm[ju] = -1;
        f.setCoeff(m, cplx(r, 0.0));
    } else {
        m.exp[ju] = 1;
        f.setCoeff(m, 1.0);
    }
    return f;
}

inline TruncatedSeries cartesianY(const TruncatedSeries& shape, int j) {
    TruncatedSeries f = shape.likeThis();
    Monomial m;
    const auto ju = static_cast<std::size_t>(j);
    if (shape.kind(j) == PairKind::sqrtAction) {
        // y = sqrt(2I) (e^{ia} - e^{-ia}) / (2i)
        const cplx r = std::numbers::sqrt2 / (2.0 * cplx(0.0, 1.0));
        m.exp[ju] = 1;
        m.harm[ju] = 1;
        f.setCoeff(m, r);
        m.harm[ju] = -1;
        f.setCoeff(m, -r);
    } else {
        m.harm[ju] = 1;
        f.setCoeff(m, 1.0);
    }
    return f;
}

} // namespace canondetail

// Pointwise time-1 flow of a generator chi: phi(z) = (exp(L_chi) id)(z).
// Pairs beyond chi.dof() pass through unchanged.  Note (exp(L_chi) f)(z) =
// f(phi(z)) for any observable f.
class LieStage {
public:
    explicit LieStage(TruncatedSeries chi) : chi_(std::move(chi)) {}

    const TruncatedSeries& chi() const { return chi_; }

    ChartPoint apply(const ChartPoint& zin, bool inverse) const {
        const Cache& cc = cache(inverse);
        ChartPoint out = zin;
        for (int j = 0; j < chi_.dof(); ++j) {
            const auto ju = static_cast<std::size_t>(j);
            switch (chi_.kind(j)) {
                case PairKind::actionAngle: {
                    const double P = cc.fnA[ju].evaluate(zin.z).real();
                    const double Q = zin.z[ju].angular + cc.fnB[ju].evaluate(zin.z).real();
                    out.z[ju] = {P, Q};
                    break;
                }
                case PairKind::sqrtAction: {
                    const double x = cc.fnA[ju].evaluate(zin.z).real();
                    const double y = cc.fnB[ju].evaluate(zin.z).real();
                    out.z[ju] = {0.5 * (x * x + y * y), std::atan2(y, x)};
                    break;
                }
                case PairKind::cartesian: {
                    const double x = cc.fnA[ju].evaluate(zin.z).real();
                    const double y = cc.fnB[ju].evaluate(zin.z).real();
                    out.z[ju] = {x, y};
                    break;
                }
            }
        }
        return out;
    }

private:
    struct Cache {
        bool built = false;
        std::array<TruncatedSeries, kMaxPairs> fnA, fnB;
    };

    const Cache& cache(bool inverse) const {
        Cache& cc = inverse ? inv_ : fwd_;
        if (!cc.built) {
            TruncatedSeries gen = chi_;
            if (inverse) gen *= -1.0;
            for (int j = 0; j < chi_.dof(); ++j) {
                const auto ju = static_cast<std::size_t>(j);
                if (chi_.kind(j) == PairKind::actionAngle) {
                    cc.fnA[ju] = lieTransform(gen, canondetail::radialCoordinate(chi_, j));
                    cc.fnB[ju] = canondetail::lieAngleTail(gen, j);
                } else {
                    cc.fnA[ju] = lieTransform(gen, canondetail::cartesianX(chi_, j));
                    cc.fnB[ju] = lieTransform(gen, canondetail::cartesianY(chi_, j));
                }
            }
            cc.built = true;
        }
        return cc;
    }

    TruncatedSeries chi_;
    mutable Cache fwd_, inv_;
};

// --- rotation reduction -----------------------------------------------------

// Linear canonical change absorbing the cyclic angle.  Old chart: elliptic
// pairs (I1,a1), (I2,a2) and drift pairs (p3,q3), (p4,q4), (p5,q5).  New
// chart: (P1..P4, Q1..Q4) plus the cyclic pair (P5, Q5) with P5 conserved.
//   I_j = P_j + Istar_j,  a_j = Q_j + Q5   (j = 1,2)
//   p_k = P_k,            q_k = Q_k + Q5   (k = 3,4)
//   q5  = Q5,             p5  = P5 - I1 - I2 - p3 - p4
struct ReductionParams {
    double Istar1 = 0.0, Istar2 = 0.0;
    double P5 = 0.0; // conserved value of the total-action momentum
};

// reduced (5-pair actionAngle) -> elliptic (sq,sq,aa,aa,aa)
inline ChartPoint reductionToElliptic(const ReductionParams& rp, const ChartPoint& zr) {
    ChartPoint ze;
    ze.dof = 5;
    ze.kinds = {PairKind::sqrtAction, PairKind::sqrtAction, PairKind::actionAngle,
                PairKind::actionAngle, PairKind::actionAngle};
    const double Q5 = zr.z[4].angular;
    const double I1 = zr.z[0].radial + rp.Istar1;
    const double I2 = zr.z[1].radial + rp.Istar2;
    ze.z[0] = {I1, zr.z[0].angular + Q5};
    ze.z[1] = {I2, zr.z[1].angular + Q5};
    ze.z[2] = {zr.z[2].radial, zr.z[2].angular + Q5};
    ze.z[3] = {zr.z[3].radial, zr.z[3].angular + Q5};
    ze.z[4] = {zr.z[4].radial - I1 - I2 - zr.z[2].radial - zr.z[3].radial, Q5};
    return ze;
}

// elliptic -> reduced
inline ChartPoint reductionFromElliptic(const ReductionParams& rp, const ChartPoint& ze) {
    ChartPoint zr;
    zr.dof = 5;
    zr.kinds.fill(PairKind::actionAngle);
    const double Q5 = ze.z[4].angular;
    zr.z[0] = {ze.z[0].radial - rp.Istar1, ze.z[0].angular - Q5};
    zr.z[1] = {ze.z[1].radial - rp.Istar2, ze.z[1].angular - Q5};
    zr.z[2] = {ze.z[2].radial, ze.z[2].angular - Q5};
    zr.z[3] = {ze.z[3].radial, ze.z[3].angular - Q5};
    zr.z[4] = {ze.z[0].radial + ze.z[1].radial + ze.z[2].radial + ze.z[3].radial + ze.z[4].radial,
               Q5};
    return zr;
}

// --- composed maps ----------------------------------------------------------

// Stages are stored in generation order (the order the normalization produced
// them).  Mapping a normalized point to original coordinates applies the
// pointwise flows in reverse generation order; mapping original->normalized
// applies them in generation order with negated generators.
class CanonicalMap {
public:
    void addLieStage(TruncatedSeries chi, std::string label = {}) {
        stages_.emplace_back(std::move(chi));
        labels_.push_back(std::move(label));
    }

    std::size_t size() const { return stages_.size(); }
    const LieStage& stage(std::size_t i) const { return stages_[i]; }
    const std::string& label(std::size_t i) const { return labels_[i]; }

    ChartPoint toOriginal(ChartPoint z) const {
        for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) z = it->apply(z, false);
        return z;
    }

    ChartPoint toNormalized(ChartPoint z) const {
        for (const auto& st : stages_) z = st.apply(z, true);
        return z;
    }

    void writeManifest(const std::filesystem::path& dir, const std::string& name) const {
        std::filesystem::create_directories(dir);
        std::ofstream man(dir / (name + ".map"));
        man << "# canonical map v1\n# name=" << name << "\n# stages=" << stages_.size() << '\n';
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            const std::string fn = name + "_stage" + std::to_string(i) + ".pseries";
            man << i << ' ' << (labels_[i].empty() ? std::string("chi") : labels_[i]) << ' ' << fn
                << '\n';
            std::ofstream sf(dir / fn);
            stages_[i].chi().writeText(sf);
        }
    }

    static CanonicalMap readManifest(const std::filesystem::path& dir, const std::string& name) {
        std::ifstream man(dir / (name + ".map"));
        if (!man) throw std::runtime_error("cannot open map manifest: " + name);
        CanonicalMap map;
        std::string line;
        while (std::getline(man, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::size_t idx;
            std::string label, fn;
            ls >> idx >> label >> fn;
            std::ifstream sf(dir / fn);
            if (!sf) throw std::runtime_error("cannot open map stage file: " + fn);
            map.addLieStage(TruncatedSeries::readText(sf), label);
        }
        return map;
    }

private:
    std::vector<LieStage> stages_;
    std::vector<std::string> labels_;
};

} // namespace sqpr
