#pragma once

// Frequency analysis of uniformly sampled complex signals: fundamental
// frequencies and finite quasi-periodic decompositions (amplitude, phase and
// integer harmonic labels with respect to a set of fundamentals).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sqpr {

struct SampledSignal {
    std::vector<std::complex<double>> values;
    double dt = 1.0; // sampling interval [yr]
    double t0 = 0.0; // time of the first sample

    double span() const { return dt * static_cast<double>(values.size()); }
    double fourierBin() const { return 2.0 * std::numbers::pi / span(); }
};

struct SpectralLine {
    double omega = 0.0; // [rad/yr]
    double A = 0.0;     // amplitude >= 0
    double theta = 0.0; // phase at t = 0, in [0, 2pi)
    std::optional<std::array<int, 3>> k; // harmonic label over the fundamentals

    std::complex<double> eval(double t) const {
        return A * std::polar(1.0, omega * t + theta);
    }
};

namespace fadetail {

// In-place iterative radix-2 FFT (no scaling).
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl = std::polar(1.0, ang);
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w = 1.0;
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline double hannWeight(std::size_t n, std::size_t N) {
    return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(N)));
}

} // namespace fadetail

// Windowed projection <sig, e^{i omega t}>_w / <1, 1>_w; with hann = false
// the flat window is used (exact for in-grid tones).
inline std::complex<double> projection(const SampledSignal& sig, double omega, bool hann = true) {
    const std::size_t N = sig.values.size();
    std::complex<double> acc = 0.0;
    double wsum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double w = hann ? fadetail::hannWeight(n, N) : 1.0;
        const double t = sig.t0 + sig.dt * static_cast<double>(n);
        acc += w * sig.values[n] * std::polar(1.0, -omega * t);
        wsum += w;
    }
    return acc / wsum;
}

// Frequency of the strongest line near `guess` (within one Fourier bin),
// located by golden-section maximization of the windowed projection modulus;
// amplitude and phase from the projection at the optimum.
inline SpectralLine refineFrequency(const SampledSignal& sig, double guess) {
    if (sig.values.size() < 2) throw std::invalid_argument("refineFrequency: too few samples");
    const double bin = sig.fourierBin();
    double a = guess - bin, b = guess + bin;
    auto f = [&](double w) { return std::abs(projection(sig, w)); };

    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    // ~90 contractions: interval shrinks below 1e-13 of a bin
    for (int it = 0; it < 90 && (b - a) > 1e-15 * std::max(1.0, std::abs(guess)); ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    const double wopt = 0.5 * (a + b);
    if (std::abs(wopt - guess) > 0.999 * bin)
        throw std::runtime_error("refineFrequency: no interior maximum near the guess");
    const std::complex<double> p = projection(sig, wopt);
    SpectralLine line;
    line.omega = wopt;
    line.A = std::abs(p);
    line.theta = std::arg(p);
    if (line.theta < 0.0) line.theta += 2.0 * std::numbers::pi;
    return line;
}

namespace fadetail {

// Least-squares amplitudes of the model sum_m a_m e^{i omega_m t} under the
// Hann-weighted inner product (small Gram system, solved by Gaussian
// elimination with partial pivoting).
inline std::vector<std::complex<double>> fitAmplitudes(const SampledSignal& sig,
                                                       const std::vector<double>& omegas) {
    const std::size_t m = omegas.size();
    const std::size_t N = sig.values.size();
    std::vector<std::vector<std::complex<double>>> G(m, std::vector<std::complex<double>>(m + 1, 0.0));
    double wsum = 0.0;
    for (std::size_t n = 0; n < N; ++n) wsum += hannWeight(n, N);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            // <e^{i w_c t}, e^{i w_r t}>_w
            if (r <= c) {
                std::complex<double> acc = 0.0;
                for (std::size_t n = 0; n < N; ++n) {
                    const double t = sig.t0 + sig.dt * static_cast<double>(n);
                    acc += hannWeight(n, N) * std::polar(1.0, (omegas[c] - omegas[r]) * t);
                }
                G[r][c] = acc / wsum;
            } else {
                G[r][c] = std::conj(G[c][r]);
            }
        }
        G[r][m] = projection(sig, omegas[r]);
    }
    // Gaussian elimination
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(G[r][col]) > std::abs(G[piv][col])) piv = r;
        std::swap(G[col], G[piv]);
        if (std::abs(G[col][col]) < 1e-14) throw std::runtime_error("fitAmplitudes: degenerate basis");
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col) continue;
            const std::complex<double> fac = G[r][col] / G[col][col];
            for (std::size_t c = col; c <= m; ++c) G[r][c] -= fac * G[col][c];
        }
    }
    std::vector<std::complex<double>> a(m);
    for (std::size_t r = 0; r < m; ++r) a[r] = G[r][m] / G[r][r];
    return a;
}

inline double hannResidualNorm(const SampledSignal& sig) {
    double s = 0.0, wsum = 0.0;
    const std::size_t N = sig.values.size();
    for (std::size_t n = 0; n < N; ++n) {
        const double w = hannWeight(n, N);
        s += w * std::norm(sig.values[n]);
        wsum += w;
    }
    return std::sqrt(s / wsum);
}

} // namespace fadetail

// Greedy decomposition: locate the strongest line of the residual via a
// Hann-windowed FFT peak plus refinement, re-fit all amplitudes jointly,
// subtract, repeat.  Stops early (flag) if the residual stops decreasing.
inline std::vector<SpectralLine> decompose(const SampledSignal& sig, int nComponents,
                                           bool* stoppedEarly = nullptr) {
    if (stoppedEarly) *stoppedEarly = false;
    std::vector<SpectralLine> lines;
    if (nComponents <= 0) return lines;

    const std::size_t N = sig.values.size();
    std::size_t nfft = 1;
    while (nfft < N) nfft <<= 1;

    SampledSignal resid = sig;
    std::vector<double> omegas;
    double lastNorm = fadetail::hannResidualNorm(resid);

    for (int comp = 0; comp < nComponents; ++comp) {
        // peak of the windowed spectrum of the residual
        std::vector<std::complex<double>> buf(nfft, 0.0);
        for (std::size_t n = 0; n < N; ++n) buf[n] = resid.values[n] * fadetail::hannWeight(n, N);
        fadetail::fft(buf);
        std::size_t peak = 0;
        for (std::size_t n = 1; n < nfft; ++n)
            if (std::abs(buf[n]) > std::abs(buf[peak])) peak = n;
        // FFT bin n corresponds to frequency 2 pi n / (nfft dt), aliased
        double wg = 2.0 * std::numbers::pi * static_cast<double>(peak) / (static_cast<double>(nfft) * sig.dt);
        const double wny = std::numbers::pi / sig.dt;
        if (wg > wny) wg -= 2.0 * wny;

        const SpectralLine found = refineFrequency(resid, wg);
        omegas.push_back(found.omega);

        // joint re-fit of all amplitudes on the original signal
        const auto amps = fadetail::fitAmplitudes(sig, omegas);
        std::vector<SpectralLine> cand(omegas.size());
        for (std::size_t m = 0; m < omegas.size(); ++m) {
            cand[m].omega = omegas[m];
            cand[m].A = std::abs(amps[m]);
            cand[m].theta = std::arg(amps[m]);
            if (cand[m].theta < 0.0) cand[m].theta += 2.0 * std::numbers::pi;
        }
        SampledSignal newResid = sig;
        for (std::size_t n = 0; n < N; ++n) {
            const double t = sig.t0 + sig.dt * static_cast<double>(n);
            std::complex<double> model = 0.0;
            for (const auto& l : cand) model += l.eval(t);
            newResid.values[n] -= model;
        }
        const double norm = fadetail::hannResidualNorm(newResid);
        if (norm > lastNorm) {
            if (stoppedEarly) *stoppedEarly = true;
            omegas.pop_back();
            break;
        }
        lastNorm = norm;
        resid = std::move(newResid);
        lines = std::move(cand);
    }
    std::stable_sort(lines.begin(), lines.end(),
                     [](const SpectralLine& a, const SpectralLine& b) { return a.A > b.A; });
    return lines;
}

// Label each line with the integer combination k (|k|_1 <= maxOrder) of the
// fundamentals minimizing |k . omega - omega_line| when below tol; lines
// without a close combination stay unlabeled.
inline std::vector<SpectralLine> identifyHarmonics(std::vector<SpectralLine> lines,
                                                   const std::array<double, 3>& fundamentals,
                                                   int maxOrder = 12, double tol = 1e-7) {
    for (auto& line : lines) {
        double best = tol;
        std::optional<std::array<int, 3>> bestK;
        int bestL1 = 0;
        for (int k1 = -maxOrder; k1 <= maxOrder; ++k1)
            for (int k2 = -maxOrder; k2 <= maxOrder; ++k2) {
                const int rem = maxOrder - std::abs(k1) - std::abs(k2);
                if (rem < 0) continue;
                for (int k3 = -rem; k3 <= rem; ++k3) {
                    const double w = k1 * fundamentals[0] + k2 * fundamentals[1] + k3 * fundamentals[2];
                    const double d = std::abs(w - line.omega);
                    const int l1 = std::abs(k1) + std::abs(k2) + std::abs(k3);
                    if (d < best || (d == best && bestK && l1 < bestL1)) {
                        best = d;
                        bestK = std::array<int, 3>{k1, k2, k3};
                        bestL1 = l1;
                    }
                }
            }
        line.k = bestK;
    }
    return lines;
}

} // namespace sqpr
