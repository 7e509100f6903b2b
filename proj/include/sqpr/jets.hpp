#pragma once
// Dense truncated multivariate Taylor arithmetic ("jets").
//
// A Jet holds the Taylor coefficients of a smooth function around a base
// point, up to a fixed total degree, over a fixed number of variables.  The
// slot layout and the multiplication schedule are precomputed once per
// (nvars, degree) in a JetSpace and shared by all jets of that shape.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace sqpr {

class JetSpace {
public:
    static constexpr int kMaxVars = 8;

    JetSpace(int nvars, int degree) : nvars_(nvars), degree_(degree) {
        if (nvars < 1 || nvars > kMaxVars) throw std::invalid_argument("JetSpace: nvars");
        if (degree < 0 || degree > 15) throw std::invalid_argument("JetSpace: degree");
        std::array<std::uint8_t, kMaxVars> e{};
        enumerate(e, 0, 0);
        // graded-lex order
        std::sort(expo_.begin(), expo_.end(), [this](const auto& a, const auto& b) {
            int da = 0, db = 0;
            for (int v = 0; v < nvars_; ++v) {
                da += a[static_cast<std::size_t>(v)];
                db += b[static_cast<std::size_t>(v)];
            }
            if (da != db) return da < db;
            return a < b;
        });
        blockStart_.assign(static_cast<std::size_t>(degree_) + 2, 0);
        for (std::size_t s = 0; s < expo_.size(); ++s) {
            index_.emplace(pack(expo_[s]), static_cast<std::int32_t>(s));
            int d = 0;
            for (int v = 0; v < nvars_; ++v) d += expo_[s][static_cast<std::size_t>(v)];
            blockStart_[static_cast<std::size_t>(d) + 1] = static_cast<std::int32_t>(s + 1);
        }
        for (std::size_t d = 1; d < blockStart_.size(); ++d)
            blockStart_[d] = std::max(blockStart_[d], blockStart_[d - 1]);
    }

    int nvars() const { return nvars_; }
    int degree() const { return degree_; }
    int nslots() const { return static_cast<int>(expo_.size()); }
    const std::array<std::uint8_t, kMaxVars>& exponents(int slot) const {
        return expo_[static_cast<std::size_t>(slot)];
    }
    int degreeOf(int slot) const {
        int d = 0;
        for (int v = 0; v < nvars_; ++v) d += expo_[static_cast<std::size_t>(slot)][static_cast<std::size_t>(v)];
        return d;
    }

    int slotOf(const std::array<std::uint8_t, kMaxVars>& e) const {
        auto it = index_.find(pack(e));
        return it == index_.end() ? -1 : it->second;
    }

    struct Triple {
        std::int32_t i, j, o;
    };

    // All ordered slot pairs (i, j) with deg_i + deg_j <= degree, with the
    // output slot of the exponent sum.
    const std::vector<Triple>& mulSchedule() const {
        if (triples_.empty()) {
            auto& t = const_cast<std::vector<Triple>&>(triples_);
            for (int d1 = 0; d1 <= degree_; ++d1) {
                for (int d2 = 0; d2 + d1 <= degree_; ++d2) {
                    for (std::int32_t i = blockStart_[static_cast<std::size_t>(d1)];
                         i < blockStart_[static_cast<std::size_t>(d1) + 1]; ++i) {
                        for (std::int32_t j = blockStart_[static_cast<std::size_t>(d2)];
                             j < blockStart_[static_cast<std::size_t>(d2) + 1]; ++j) {
                            std::array<std::uint8_t, kMaxVars> e{};
                            for (int v = 0; v < nvars_; ++v)
                                e[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(
                                    expo_[static_cast<std::size_t>(i)][static_cast<std::size_t>(v)] +
                                    expo_[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)]);
                            t.push_back({i, j, slotOf(e)});
                        }
                    }
                }
            }
        }
        return triples_;
    }

private:
    static std::uint64_t pack(const std::array<std::uint8_t, kMaxVars>& e) {
        std::uint64_t k = 0;
        for (int v = 0; v < kMaxVars; ++v) k = (k << 8) | e[static_cast<std::size_t>(v)];
        return k;
    }

    void enumerate(std::array<std::uint8_t, kMaxVars>& e, int var, int used) {
        if (var == nvars_) {
            expo_.push_back(e);
            return;
        }
        for (int p = 0; p + used <= degree_; ++p) {
            e[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(p);
            enumerate(e, var + 1, used + p);
        }
        e[static_cast<std::size_t>(var)] = 0;
    }

    int nvars_, degree_;
    std::vector<std::array<std::uint8_t, kMaxVars>> expo_;
    std::unordered_map<std::uint64_t, std::int32_t> index_;
    std::vector<std::int32_t> blockStart_;
    std::vector<Triple> triples_;
};

template <class T>
struct Jet {
    const JetSpace* sp = nullptr;
    std::vector<T> c;

    Jet() = default;
    explicit Jet(const JetSpace& s) : sp(&s), c(static_cast<std::size_t>(s.nslots()), T{}) {}

    static Jet constant(const JetSpace& s, T v) {
        Jet j(s);
        j.c[0] = v;
        return j;
    }

    static Jet variable(const JetSpace& s, int var, T base = T{}) {
        Jet j(s);
        j.c[0] = base;
        std::array<std::uint8_t, JetSpace::kMaxVars> e{};
        e[static_cast<std::size_t>(var)] = 1;
        j.c[static_cast<std::size_t>(s.slotOf(e))] = T{1};
        return j;
    }

    T value() const { return c[0]; }

    Jet& operator+=(const Jet& o) {
        for (std::size_t s = 0; s < c.size(); ++s) c[s] += o.c[s];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (std::size_t s = 0; s < c.size(); ++s) c[s] -= o.c[s];
        return *this;
    }
    Jet& operator+=(T v) {
        c[0] += v;
        return *this;
    }
    Jet& operator-=(T v) {
        c[0] -= v;
        return *this;
    }
    Jet& operator*=(T v) {
        for (auto& x : c) x *= v;
        return *this;
    }
    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, T v) { return a += v; }
    friend Jet operator-(Jet a, T v) { return a -= v; }
    friend Jet operator*(Jet a, T v) { return a *= v; }
    friend Jet operator*(T v, Jet a) { return a *= v; }
    Jet operator-() const {
        Jet r = *this;
        for (auto& x : r.c) x = -x;
        return r;
    }

    // Zero the constant slot (helper for nilpotent manipulations).
    Jet withoutConstant() const {
        Jet r = *this;
        r.c[0] = T{};
        return r;
    }

    bool isNilpotent() const { return c[0] == T{}; }

    // Evaluate the truncated Taylor polynomial at a displacement x.
    template <class X>
    auto evalAt(const std::vector<X>& x) const {
        using R = decltype(T{} * X{});
        R acc{};
        for (int s = 0; s < sp->nslots(); ++s) {
            R m = c[static_cast<std::size_t>(s)];
            const auto& e = sp->exponents(s);
            for (int v = 0; v < sp->nvars(); ++v)
                for (int p = 0; p < e[static_cast<std::size_t>(v)]; ++p) m *= x[static_cast<std::size_t>(v)];
            acc += m;
        }
        return acc;
    }
};

template <class T>
inline void mulInto(Jet<T>& out, const Jet<T>& a, const Jet<T>& b) {
    const auto& tr = out.sp->mulSchedule();
    std::fill(out.c.begin(), out.c.end(), T{});
    for (const auto& t : tr)
        out.c[static_cast<std::size_t>(t.o)] +=
            a.c[static_cast<std::size_t>(t.i)] * b.c[static_cast<std::size_t>(t.j)];
}

template <class T>
inline Jet<T> mul(const Jet<T>& a, const Jet<T>& b) {
    Jet<T> r(*a.sp);
    mulInto(r, a, b);
    return r;
}

// Horner evaluation of sum_m coeffs[m] * w^m for a nilpotent jet w.
template <class T, class C>
inline Jet<T> polyOfNilpotent(const std::vector<C>& coeffs, const Jet<T>& w) {
    if (!w.isNilpotent()) throw std::invalid_argument("polyOfNilpotent: jet has a constant part");
    Jet<T> acc = Jet<T>::constant(*w.sp, T{});
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        if (it != coeffs.rbegin()) acc = mul(acc, w);
        acc += T{*it};
    }
    return acc;
}

namespace jetdetail {
// Taylor coefficients of (1+x)^alpha up to degree d.
inline std::vector<double> binomialSeries(double alpha, int d) {
    std::vector<double> c(static_cast<std::size_t>(d) + 1);
    c[0] = 1.0;
    for (int m = 1; m <= d; ++m)
        c[static_cast<std::size_t>(m)] =
            c[static_cast<std::size_t>(m - 1)] * (alpha - (m - 1)) / m;
    return c;
}
} // namespace jetdetail

// (c0 + w)^alpha for real alpha; c0 > 0, w nilpotent relative to c0 extracted
// internally.
template <class T>
inline Jet<T> powJet(const Jet<T>& x, double alpha) {
    const T x0 = x.value();
    Jet<T> w = x.withoutConstant();
    w *= T{1} / x0;
    auto coeffs = jetdetail::binomialSeries(alpha, x.sp->degree());
    Jet<T> r = polyOfNilpotent(coeffs, w);
    r *= std::pow(x0, alpha);
    return r;
}

template <class T>
inline Jet<T> sqrtJet(const Jet<T>& x) {
    return powJet(x, 0.5);
}

template <class T>
inline Jet<T> rsqrtJet(const Jet<T>& x) {
    return powJet(x, -0.5);
}

template <class T>
inline Jet<T> recipJet(const Jet<T>& x) {
    return powJet(x, -1.0);
}

// sin/cos of a jet with numeric constant part theta0 plus nilpotent rest.
template <class T>
inline void sincosJet(const Jet<T>& x, Jet<T>& s, Jet<T>& co) {
    const int d = x.sp->degree();
    Jet<T> w = x.withoutConstant();
    std::vector<double> cs(static_cast<std::size_t>(d) + 1, 0.0), cc(static_cast<std::size_t>(d) + 1, 0.0);
    double fact = 1.0;
    for (int m = 0; m <= d; ++m) {
        if (m > 0) fact /= m;
        const int r = m % 4;
        cs[static_cast<std::size_t>(m)] = (r == 0 || r == 2) ? 0.0 : (r == 1 ? fact : -fact);
        cc[static_cast<std::size_t>(m)] = (r == 1 || r == 3) ? 0.0 : (r == 0 ? fact : -fact);
    }
    Jet<T> sw = polyOfNilpotent(cs, w); // sin of nilpotent part
    Jet<T> cw = polyOfNilpotent(cc, w); // cos of nilpotent part
    double s0, c0;
    if constexpr (std::is_same_v<T, double>) {
        s0 = std::sin(x.value());
        c0 = std::cos(x.value());
    } else {
        s0 = std::sin(std::real(x.value()));
        c0 = std::cos(std::real(x.value()));
    }
    s = sw * T{c0} + cw * T{s0};
    co = cw * T{c0} - sw * T{s0};
}

// exp(i x) for a real-constant-part complex jet.
inline Jet<std::complex<double>> expIJet(const Jet<std::complex<double>>& x) {
    Jet<std::complex<double>> s(*x.sp), c(*x.sp);
    sincosJet(x, s, c);
    for (std::size_t k = 0; k < c.c.size(); ++k) c.c[k] += std::complex<double>(0.0, 1.0) * s.c[k];
    return c;
}

// Coefficient-wise conjugate: the conjugate function when all jet variables
// are real.
inline Jet<std::complex<double>> conjJet(const Jet<std::complex<double>>& x) {
    Jet<std::complex<double>> r = x;
    for (auto& v : r.c) v = std::conj(v);
    return r;
}

inline Jet<double> realJet(const Jet<std::complex<double>>& x) {
    Jet<double> r;
    r.sp = x.sp;
    r.c.resize(x.c.size());
    for (std::size_t k = 0; k < x.c.size(); ++k) r.c[k] = x.c[k].real();
    return r;
}

inline Jet<std::complex<double>> complexJet(const Jet<double>& x) {
    Jet<std::complex<double>> r;
    r.sp = x.sp;
    r.c.resize(x.c.size());
    for (std::size_t k = 0; k < x.c.size(); ++k) r.c[k] = x.c[k];
    return r;
}

// Re-embed a jet into a larger space, shifting variable v -> v + varOffset.
template <class T>
inline Jet<T> liftJet(const Jet<T>& x, const JetSpace& target, int varOffset) {
    Jet<T> r(target);
    for (int s = 0; s < x.sp->nslots(); ++s) {
        if (x.c[static_cast<std::size_t>(s)] == T{}) continue;
        const auto& e = x.sp->exponents(s);
        std::array<std::uint8_t, JetSpace::kMaxVars> f{};
        for (int v = 0; v < x.sp->nvars(); ++v)
            f[static_cast<std::size_t>(v + varOffset)] = e[static_cast<std::size_t>(v)];
        const int o = target.slotOf(f);
        if (o >= 0) r.c[static_cast<std::size_t>(o)] = x.c[static_cast<std::size_t>(s)];
    }
    return r;
}

} // namespace sqpr
