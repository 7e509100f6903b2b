#pragma once
// Sparse truncated Taylor-Fourier series over canonical pairs.
//
// A series lives on n <= kMaxPairs canonical pairs; every pair carries one
// "radial" exponent and one "angular" index whose meaning depends on the pair
// kind:
//   actionAngle : P^a e^{i k Q}           (P momentum, Q coordinate)
//   sqrtAction  : (sqrt I)^a e^{i k alpha} (I momentum, alpha coordinate;
//                  d'Alembert monomials: |k| <= a, k == a mod 2)
//   cartesian   : xi^a eta^k              (xi momentum, eta coordinate; k >= 0)
//
// The Poisson bracket convention is
//   {f,g} = sum_j dF/dQ_j dG/dP_j - dF/dP_j dG/dQ_j,
// applied per pair with the momentum/coordinate roles listed above.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sqpr {

using cplx = std::complex<double>;

inline constexpr int kMaxPairs = 6;

enum class PairKind : std::uint8_t { actionAngle, sqrtAction, cartesian };

inline const char* pairKindToken(PairKind k) {
    switch (k) {
        case PairKind::actionAngle: return "aa";
        case PairKind::sqrtAction: return "sq";
        case PairKind::cartesian: return "xy";
    }
    return "??";
}

inline PairKind pairKindFromToken(const std::string& t) {
    if (t == "aa") return PairKind::actionAngle;
    if (t == "sq") return PairKind::sqrtAction;
    if (t == "xy") return PairKind::cartesian;
    throw std::invalid_argument("unknown pair kind token: " + t);
}

struct TruncationPolicy {
    int maxActionDeg = 127;   // cap on total action degree
    int maxFourierStep = 127; // cap on trig step s
    int harmonicUnit = 1;     // K: step s covers trig degrees ((s-1)K, sK]
    double dropThreshold = 1e-22;

    long trigCap() const { return static_cast<long>(maxFourierStep) * harmonicUnit; }
};

struct Monomial {
    std::array<std::int8_t, kMaxPairs> exp{};
    std::array<std::int8_t, kMaxPairs> harm{};

    bool operator==(const Monomial& o) const { return exp == o.exp && harm == o.harm; }
};

struct MonomialHash {
    std::size_t operator()(const Monomial& m) const {
        std::uint64_t a = 0, b = 0;
        static_assert(sizeof(m.exp) == 6 && sizeof(m.harm) == 6);
        std::memcpy(&a, m.exp.data(), 6);
        std::memcpy(&b, m.harm.data(), 6);
        std::uint64_t h = a * 0x9e3779b97f4a7c15ULL;
        h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        return static_cast<std::size_t>(h);
    }
};

// Canonical key order: action exponents lexicographic, then harmonics.
struct MonomialLess {
    bool operator()(const Monomial& x, const Monomial& y) const {
        if (x.exp != y.exp) return x.exp < y.exp;
        return x.harm < y.harm;
    }
};

class TruncatedSeries {
public:
    using TermMap = std::unordered_map<Monomial, cplx, MonomialHash>;

    TruncatedSeries() = default;

    TruncatedSeries(int dof, std::array<PairKind, kMaxPairs> kinds, TruncationPolicy pol)
        : dof_(dof), kinds_(kinds), pol_(pol) {
        if (dof < 1 || dof > kMaxPairs) throw std::invalid_argument("dof out of range");
    }

    TruncatedSeries(int dof, std::vector<PairKind> kinds, TruncationPolicy pol)
        : dof_(dof), pol_(pol) {
        if (dof < 1 || dof > kMaxPairs) throw std::invalid_argument("dof out of range");
        if (static_cast<int>(kinds.size()) < dof) throw std::invalid_argument("kinds too short");
        for (int j = 0; j < dof; ++j) kinds_[j] = kinds[static_cast<std::size_t>(j)];
    }

    int dof() const { return dof_; }
    PairKind kind(int j) const { return kinds_[static_cast<std::size_t>(j)]; }
    const std::array<PairKind, kMaxPairs>& kinds() const { return kinds_; }
    const TruncationPolicy& policy() const { return pol_; }
    TruncationPolicy& policy() { return pol_; }

    bool sameShape(const TruncatedSeries& o) const {
        if (dof_ != o.dof_) return false;
        for (int j = 0; j < dof_; ++j)
            if (kinds_[static_cast<std::size_t>(j)] != o.kinds_[static_cast<std::size_t>(j)]) return false;
        return true;
    }

    // Returns a zero series with the same pair layout (policy can be overridden).
    TruncatedSeries likeThis() const { return TruncatedSeries(dof_, kinds_, pol_); }
    TruncatedSeries likeThis(const TruncationPolicy& pol) const { return TruncatedSeries(dof_, kinds_, pol); }

    const TermMap& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    void clear() { terms_.clear(); }

    // --- degree bookkeeping -------------------------------------------------

    int actionDegree(const Monomial& m) const {
        int d = 0;
        for (int j = 0; j < dof_; ++j) {
            d += m.exp[static_cast<std::size_t>(j)];
            if (kinds_[static_cast<std::size_t>(j)] == PairKind::cartesian)
                d += m.harm[static_cast<std::size_t>(j)];
        }
        return d;
    }

    int trigDegree(const Monomial& m) const {
        int d = 0;
        for (int j = 0; j < dof_; ++j)
            if (kinds_[static_cast<std::size_t>(j)] != PairKind::cartesian)
                d += std::abs(static_cast<int>(m.harm[static_cast<std::size_t>(j)]));
        return d;
    }

    // Trig step: s = 0 iff the monomial carries no harmonics, else the band
    // index with (s-1)K < trigDegree <= sK.
    int trigStep(const Monomial& m) const {
        const int t = trigDegree(m);
        if (t == 0) return 0;
        return (t + pol_.harmonicUnit - 1) / pol_.harmonicUnit;
    }

    bool withinCaps(const Monomial& m) const {
        return actionDegree(m) <= pol_.maxActionDeg && trigDegree(m) <= pol_.trigCap();
    }

    // --- term access --------------------------------------------------------

    cplx coeff(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? cplx(0.0) : it->second;
    }

    void setCoeff(const Monomial& m, cplx c) {
        if (!withinCaps(m)) return;
        if (std::abs(c) < pol_.dropThreshold) {
            terms_.erase(m);
        } else {
            terms_[m] = c;
        }
    }

    void addCoeff(const Monomial& m, cplx c) {
        if (!withinCaps(m)) return;
        auto [it, fresh] = terms_.try_emplace(m, c);
        if (!fresh) it->second += c;
    }

    void prune() {
        for (auto it = terms_.begin(); it != terms_.end();) {
            if (std::abs(it->second) < pol_.dropThreshold)
                it = terms_.erase(it);
            else
                ++it;
        }
    }

    // Deterministic iteration order for serialization and summation.
    std::vector<std::pair<Monomial, cplx>> sortedTerms() const {
        std::vector<std::pair<Monomial, cplx>> v(terms_.begin(), terms_.end());
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            return MonomialLess{}(a.first, b.first);
        });
        return v;
    }

    // --- linear arithmetic --------------------------------------------------

    TruncatedSeries& operator+=(const TruncatedSeries& o) {
        requireSameShape(o);
        for (const auto& [m, c] : o.terms_) addCoeff(m, c);
        prune();
        return *this;
    }

    TruncatedSeries& operator-=(const TruncatedSeries& o) {
        requireSameShape(o);
        for (const auto& [m, c] : o.terms_) addCoeff(m, -c);
        prune();
        return *this;
    }

    TruncatedSeries& operator*=(cplx a) {
        for (auto& [m, c] : terms_) c *= a;
        prune();
        return *this;
    }

    TruncatedSeries& operator*=(double a) { return (*this) *= cplx(a, 0.0); }

    friend TruncatedSeries operator+(TruncatedSeries a, const TruncatedSeries& b) { return a += b; }
    friend TruncatedSeries operator-(TruncatedSeries a, const TruncatedSeries& b) { return a -= b; }
    friend TruncatedSeries operator*(TruncatedSeries a, cplx s) { return a *= s; }
    friend TruncatedSeries operator*(cplx s, TruncatedSeries a) { return a *= s; }
    friend TruncatedSeries operator*(TruncatedSeries a, double s) { return a *= s; }
    friend TruncatedSeries operator*(double s, TruncatedSeries a) { return a *= s; }

    // --- norms, averages, projections --------------------------------------

    // l1 norm: sum of |coefficients| accumulated in canonical key order so the
    // result is independent of hash-table history.
    double l1Norm() const {
        auto v = sortedTerms();
        double s = 0.0;
        for (const auto& [m, c] : v) s += std::abs(c);
        return s;
    }

    double maxAbsCoeff() const {
        double s = 0.0;
        for (const auto& [m, c] : terms_) s = std::max(s, std::abs(c));
        return s;
    }

    // Keep only terms with no harmonics on any trig pair.
    TruncatedSeries angleAverage() const {
        TruncatedSeries r = likeThis();
        for (const auto& [m, c] : terms_)
            if (trigDegree(m) == 0) r.terms_.emplace(m, c);
        return r;
    }

    // Terms with action degree l and trig step s.
    TruncatedSeries projectClass(int l, int s) const {
        TruncatedSeries r = likeThis();
        for (const auto& [m, c] : terms_)
            if (actionDegree(m) == l && trigStep(m) == s) r.terms_.emplace(m, c);
        return r;
    }

    TruncatedSeries projectActionDegree(int l) const {
        TruncatedSeries r = likeThis();
        for (const auto& [m, c] : terms_)
            if (actionDegree(m) == l) r.terms_.emplace(m, c);
        return r;
    }

    TruncatedSeries projectTrigStep(int s) const {
        TruncatedSeries r = likeThis();
        for (const auto& [m, c] : terms_)
            if (trigStep(m) == s) r.terms_.emplace(m, c);
        return r;
    }

    template <class Pred>
    TruncatedSeries filter(Pred&& keep) const {
        TruncatedSeries r = likeThis();
        for (const auto& [m, c] : terms_)
            if (keep(m, c)) r.terms_.emplace(m, c);
        return r;
    }

    // --- reality ------------------------------------------------------------

    Monomial conjugateKey(const Monomial& m) const {
        Monomial n = m;
        for (int j = 0; j < dof_; ++j)
            if (kinds_[static_cast<std::size_t>(j)] != PairKind::cartesian)
                n.harm[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(-n.harm[static_cast<std::size_t>(j)]);
        return n;
    }

    // Max |c(m) - conj(c(mbar))|: zero for a real-valued series.
    double realityDefect() const {
        double d = 0.0;
        for (const auto& [m, c] : terms_)
            d = std::max(d, std::abs(c - std::conj(coeff(conjugateKey(m)))));
        return d;
    }

    void symmetrize() {
        TermMap out;
        for (const auto& [m, c] : terms_) {
            const Monomial mc = conjugateKey(m);
            out[m] = 0.5 * (c + std::conj(coeff(mc)));
        }
        terms_ = std::move(out);
        prune();
    }

    TruncatedSeries conjugated() const {
        TruncatedSeries r = likeThis();
        for (const auto& [m, c] : terms_) r.terms_.emplace(conjugateKey(m), std::conj(c));
        return r;
    }

    // --- evaluation ---------------------------------------------------------

    // One (radial, angular) value per pair: (P,Q), (I,alpha) or (xi,eta).
    struct PairValue {
        double radial = 0.0;
        double angular = 0.0;
    };

    cplx evaluate(const std::array<PairValue, kMaxPairs>& z) const {
        cplx acc = 0.0;
        auto v = sortedTerms();
        for (const auto& [m, c] : v) acc += c * monomialValue(m, z);
        return acc;
    }

    cplx monomialValue(const Monomial& m, const std::array<PairValue, kMaxPairs>& z) const {
        cplx w = 1.0;
        for (int j = 0; j < dof_; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const int a = m.exp[ju];
            const int k = m.harm[ju];
            const PairValue& p = z[ju];
            switch (kinds_[ju]) {
                case PairKind::actionAngle:
                    if (a != 0) w *= std::pow(p.radial, a);
                    if (k != 0) w *= std::polar(1.0, k * p.angular);
                    break;
                case PairKind::sqrtAction:
                    if (a != 0) w *= std::pow(std::sqrt(p.radial), a);
                    if (k != 0) w *= std::polar(1.0, k * p.angular);
                    break;
                case PairKind::cartesian:
                    if (a != 0) w *= std::pow(p.radial, a);
                    if (k != 0) w *= std::pow(p.angular, k);
                    break;
            }
        }
        return w;
    }

    // --- derivatives --------------------------------------------------------

    // d/d(radial var) of pair j: d/dP, d/dI, or d/dxi.
    TruncatedSeries derivativeRadial(int j) const {
        TruncatedSeries r = likeThis();
        const auto ju = static_cast<std::size_t>(j);
        for (const auto& [m, c] : terms_) {
            const int a = m.exp[ju];
            if (a == 0) continue;
            Monomial n = m;
            cplx nc = c;
            switch (kinds_[ju]) {
                case PairKind::actionAngle:
                case PairKind::cartesian:
                    n.exp[ju] = static_cast<std::int8_t>(a - 1);
                    nc *= static_cast<double>(a);
                    break;
                case PairKind::sqrtAction:
                    // d/dI (sqrt I)^a = (a/2) (sqrt I)^{a-2}
                    if (a < 2) throw std::domain_error("derivativeRadial: fractional power");
                    n.exp[ju] = static_cast<std::int8_t>(a - 2);
                    nc *= 0.5 * static_cast<double>(a);
                    break;
            }
            r.addCoeff(n, nc);
        }
        r.prune();
        return r;
    }

    // d/d(angular var) of pair j: d/dQ, d/dalpha, or d/deta.
    TruncatedSeries derivativeAngular(int j) const {
        TruncatedSeries r = likeThis();
        const auto ju = static_cast<std::size_t>(j);
        for (const auto& [m, c] : terms_) {
            const int k = m.harm[ju];
            if (k == 0) continue;
            Monomial n = m;
            cplx nc = c;
            if (kinds_[ju] == PairKind::cartesian) {
                n.harm[ju] = static_cast<std::int8_t>(k - 1);
                nc *= static_cast<double>(k);
            } else {
                nc *= cplx(0.0, static_cast<double>(k));
            }
            r.addCoeff(n, nc);
        }
        r.prune();
        return r;
    }

    // --- serialization ------------------------------------------------------

    void writeText(std::ostream& os) const {
        os << "# pseries v1\n";
        os << "# dof=" << dof_ << " kinds=";
        for (int j = 0; j < dof_; ++j) {
            if (j) os << ',';
            os << pairKindToken(kinds_[static_cast<std::size_t>(j)]);
        }
        os << '\n';
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", pol_.dropThreshold);
        os << "# maxActionDeg=" << pol_.maxActionDeg
           << " maxFourierStep=" << pol_.maxFourierStep
           << " harmonicUnit=" << pol_.harmonicUnit
           << " dropThreshold=" << buf << '\n';
        for (const auto& [m, c] : sortedTerms()) {
            os << actionDegree(m) << ' ' << trigStep(m);
            for (int j = 0; j < dof_; ++j) os << ' ' << static_cast<int>(m.exp[static_cast<std::size_t>(j)]);
            for (int j = 0; j < dof_; ++j) os << ' ' << static_cast<int>(m.harm[static_cast<std::size_t>(j)]);
            std::snprintf(buf, sizeof buf, "%.17g", c.real());
            os << ' ' << buf;
            std::snprintf(buf, sizeof buf, "%.17g", c.imag());
            os << ' ' << buf << '\n';
        }
    }

    std::string toText() const {
        std::ostringstream ss;
        writeText(ss);
        return ss.str();
    }

    static TruncatedSeries readText(std::istream& is) {
        std::string line;
        int dof = -1;
        std::array<PairKind, kMaxPairs> kinds{};
        TruncationPolicy pol;
        TruncatedSeries out;
        bool haveShape = false;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                parseHeaderLine(line, dof, kinds, pol);
                if (dof > 0 && !haveShape) {
                    // policy header may still follow; defer construction
                }
                continue;
            }
            if (!haveShape) {
                if (dof <= 0) throw std::runtime_error("pseries text: missing header");
                out = TruncatedSeries(dof, kinds, pol);
                haveShape = true;
            }
            std::istringstream ls(line);
            int l = 0, s = 0;
            ls >> l >> s;
            Monomial m;
            for (int j = 0; j < dof; ++j) {
                int v;
                ls >> v;
                m.exp[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(v);
            }
            for (int j = 0; j < dof; ++j) {
                int v;
                ls >> v;
                m.harm[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(v);
            }
            double re = 0.0, im = 0.0;
            ls >> re >> im;
            if (!ls) throw std::runtime_error("pseries text: malformed term line: " + line);
            out.setCoeff(m, cplx(re, im));
        }
        if (!haveShape) {
            if (dof <= 0) throw std::runtime_error("pseries text: missing header");
            out = TruncatedSeries(dof, kinds, pol);
        }
        return out;
    }

    static TruncatedSeries fromText(const std::string& text) {
        std::istringstream ss(text);
        return readText(ss);
    }

private:
    void requireSameShape(const TruncatedSeries& o) const {
        if (!sameShape(o)) throw std::invalid_argument("series shape mismatch");
    }

    static void parseHeaderLine(const std::string& line, int& dof,
                                std::array<PairKind, kMaxPairs>& kinds, TruncationPolicy& pol) {
        auto grab = [&](const char* key) -> std::string {
            const std::string k = std::string(key) + "=";
            auto p = line.find(k);
            if (p == std::string::npos) return {};
            p += k.size();
            auto e = line.find_first_of(" \t", p);
            return line.substr(p, e == std::string::npos ? std::string::npos : e - p);
        };
        if (auto v = grab("dof"); !v.empty()) dof = std::stoi(v);
        if (auto v = grab("kinds"); !v.empty()) {
            std::istringstream ks(v);
            std::string tok;
            int j = 0;
            while (std::getline(ks, tok, ',') && j < kMaxPairs)
                kinds[static_cast<std::size_t>(j++)] = pairKindFromToken(tok);
        }
        if (auto v = grab("maxActionDeg"); !v.empty()) pol.maxActionDeg = std::stoi(v);
        if (auto v = grab("maxFourierStep"); !v.empty()) pol.maxFourierStep = std::stoi(v);
        if (auto v = grab("harmonicUnit"); !v.empty()) pol.harmonicUnit = std::stoi(v);
        if (auto v = grab("dropThreshold"); !v.empty()) pol.dropThreshold = std::stod(v);
    }

    int dof_ = 0;
    std::array<PairKind, kMaxPairs> kinds_{};
    TruncationPolicy pol_;
    TermMap terms_;
};

// --- Poisson bracket --------------------------------------------------------

// {f,g} with the per-pair momentum/coordinate roles described at the top.
// Each (term_f, term_g, pair) contribution is emitted as a single fused
// product, so structurally-forbidden monomials (negative radial powers,
// d'Alembert violations) carry an exact integer factor zero and never appear.
inline TruncatedSeries poissonBracket(const TruncatedSeries& f, const TruncatedSeries& g) {
    if (!f.sameShape(g)) throw std::invalid_argument("poissonBracket: shape mismatch");
    TruncatedSeries r = f.likeThis();
    const int n = f.dof();
    for (const auto& [mf, cf] : f.terms()) {
        for (const auto& [mg, cg] : g.terms()) {
            const cplx cfg = cf * cg;
            Monomial sum;
            for (int j = 0; j < n; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                sum.exp[ju] = static_cast<std::int8_t>(mf.exp[ju] + mg.exp[ju]);
                sum.harm[ju] = static_cast<std::int8_t>(mf.harm[ju] + mg.harm[ju]);
            }
            for (int j = 0; j < n; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                const int af = mf.exp[ju], ag = mg.exp[ju];
                const int kf = mf.harm[ju], kg = mg.harm[ju];
                Monomial key = sum;
                switch (f.kind(j)) {
                    case PairKind::actionAngle: {
                        const int fac = kf * ag - af * kg;
                        if (fac == 0) break;
                        key.exp[ju] = static_cast<std::int8_t>(af + ag - 1);
                        r.addCoeff(key, cfg * cplx(0.0, static_cast<double>(fac)));
                        break;
                    }
                    case PairKind::sqrtAction: {
                        const int fac = kf * ag - af * kg;
                        if (fac == 0) break;
                        if (af + ag < 2)
                            throw std::domain_error("poissonBracket: fractional sqrt-action power");
                        key.exp[ju] = static_cast<std::int8_t>(af + ag - 2);
                        r.addCoeff(key, cfg * cplx(0.0, 0.5 * static_cast<double>(fac)));
                        break;
                    }
                    case PairKind::cartesian: {
                        const int fac = kf * ag - af * kg;
                        if (fac == 0) break;
                        key.exp[ju] = static_cast<std::int8_t>(af + ag - 1);
                        key.harm[ju] = static_cast<std::int8_t>(kf + kg - 1);
                        r.addCoeff(key, cfg * static_cast<double>(fac));
                        break;
                    }
                }
            }
        }
    }
    r.prune();
    return r;
}

inline TruncatedSeries multiply(const TruncatedSeries& f, const TruncatedSeries& g) {
    if (!f.sameShape(g)) throw std::invalid_argument("multiply: shape mismatch");
    TruncatedSeries r = f.likeThis();
    const int n = f.dof();
    for (const auto& [mf, cf] : f.terms()) {
        for (const auto& [mg, cg] : g.terms()) {
            Monomial sum;
            for (int j = 0; j < n; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                sum.exp[ju] = static_cast<std::int8_t>(mf.exp[ju] + mg.exp[ju]);
                sum.harm[ju] = static_cast<std::int8_t>(mf.harm[ju] + mg.harm[ju]);
            }
            r.addCoeff(sum, cf * cg);
        }
    }
    r.prune();
    return r;
}

// Lie derivative L_chi f = {f, chi}.
inline TruncatedSeries lieDerivative(const TruncatedSeries& chi, const TruncatedSeries& f) {
    return poissonBracket(f, chi);
}

// exp(L_chi) f = sum_j L_chi^j f / j!.  Terminates when the running term
// vanishes under the truncation policy of f; every generator used here is
// nilpotent under its caps, but an iteration guard protects against misuse.
inline TruncatedSeries lieTransform(const TruncatedSeries& chi, const TruncatedSeries& f,
                                    int maxIter = 256) {
    TruncatedSeries acc = f;
    TruncatedSeries term = f;
    for (int j = 1; j <= maxIter; ++j) {
        term = poissonBracket(term, chi);
        term *= 1.0 / static_cast<double>(j);
        if (term.empty()) return acc;
        acc += term;
    }
    throw std::runtime_error("lieTransform: series failed to terminate (divergence indicator)");
}

// Polar substitution on pair j: rewrite a cartesian pair (xi, eta) in
// sqrt-action form via xi + i eta = sqrt(2 I) e^{i alpha}, i.e.
// xi = sqrt(2I) cos alpha, eta = sqrt(2I) sin alpha.  The resulting pair
// automatically satisfies the d'Alembert rules.
inline TruncatedSeries polarSubstitution(const TruncatedSeries& f, int pairIndex) {
    if (f.kind(pairIndex) != PairKind::cartesian)
        throw std::invalid_argument("polarSubstitution: pair is not cartesian");
    std::array<PairKind, kMaxPairs> kinds = f.kinds();
    kinds[static_cast<std::size_t>(pairIndex)] = PairKind::sqrtAction;
    TruncatedSeries r(f.dof(), kinds, f.policy());
    const auto ju = static_cast<std::size_t>(pairIndex);
    for (const auto& [m, c] : f.terms()) {
        const int a = m.exp[ju]; // xi power
        const int b = m.harm[ju]; // eta power
        const int d = a + b;
        // (xi)^a (eta)^b = (sqrt(2I))^d * ((e^{ia}+e^{-ia})/2)^a ((e^{ia}-e^{-ia})/(2i))^b
        // Convolve the two binomial expansions over e^{i k alpha}.
        std::vector<cplx> coef(static_cast<std::size_t>(d) + 1, cplx(0.0));
        std::vector<cplx> ca(static_cast<std::size_t>(a) + 1), cb(static_cast<std::size_t>(b) + 1);
        double binom = 1.0;
        for (int t = 0; t <= a; ++t) {
            ca[static_cast<std::size_t>(t)] = binom; // exponent k contribution: a-2t
            binom = binom * (a - t) / (t + 1);
        }
        binom = 1.0;
        for (int t = 0; t <= b; ++t) {
            cb[static_cast<std::size_t>(t)] = binom * (t % 2 ? -1.0 : 1.0);
            binom = binom * (b - t) / (t + 1);
        }
        for (int t = 0; t <= a; ++t)
            for (int u = 0; u <= b; ++u)
                coef[static_cast<std::size_t>(t + u)] += ca[static_cast<std::size_t>(t)] * cb[static_cast<std::size_t>(u)];
        const cplx invTwoI = 1.0 / cplx(0.0, 2.0);
        cplx scale = std::pow(2.0, 0.5 * d); // (sqrt 2)^d from sqrt(2I)
        for (int t = 0; t < a; ++t) scale *= 0.5;
        for (int t = 0; t < b; ++t) scale *= invTwoI;
        for (int idx = 0; idx <= d; ++idx) {
            const cplx w = coef[static_cast<std::size_t>(idx)];
            if (w == cplx(0.0)) continue;
            Monomial n = m;
            n.exp[ju] = static_cast<std::int8_t>(d);
            n.harm[ju] = static_cast<std::int8_t>(d - 2 * idx);
            r.addCoeff(n, c * scale * w);
        }
    }
    r.prune();
    return r;
}

} // namespace sqpr
