// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "pilotwave/common.hpp"

namespace pilotwave {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 complex FFT plan with precomputed twiddles.
/// forward: X_k = sum_j x_j exp(-2*pi*i*j*k/n), inverse applies 1/n.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        require(is_pow2(n_) && n_ >= 2, Errc::invalid_argument, "fft size must be a power of two >= 2");
        rev_.resize(n_);
        std::size_t log2n = 0;
        while ((std::size_t(1) << log2n) < n_) ++log2n;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (log2n - 1 - b);
            rev_[i] = r;
        }
        // Twiddles for each butterfly length, concatenated: n/2 + n/4 + ... + 1.
        w_.reserve(n_ - 1);
        for (std::size_t len = n_; len >= 2; len /= 2) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                double ang = -kTwoPi * double(k) / double(len);
                w_.push_back(cplx(std::cos(ang), std::sin(ang)));
            }
        }
    }

    std::size_t size() const { return n_; }

    void forward(cplx* a) const { transform(a, false); }
    void inverse(cplx* a) const {
        transform(a, true);
        double s = 1.0 / double(n_);
        for (std::size_t i = 0; i < n_; ++i) a[i] *= s;
    }

private:
    void transform(cplx* a, bool conj) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        std::size_t woff = w_.size();
        for (std::size_t len = 2; len <= n_; len *= 2) {
            woff -= len / 2;
            const cplx* tw = w_.data() + woff;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    cplx w = conj ? std::conj(tw[k]) : tw[k];
                    cplx u = a[i + k];
                    cplx v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<cplx> w_;
};

/// Sine-series analysis on a half-open box grid x_j = lo + j*dx, j = 0..n-1,
/// where the walls sit at j = 0 and j = n (the latter is not stored).
/// Input f has f[0] on the lo wall (zero for any admissible field).
/// Output c[m], m = 1..n-1 with f_j = sum_m c_m sin(pi*m*j/n); c[0] unused.
/// Implemented through an odd extension of length 2n and one complex FFT.
inline std::vector<cplx> sine_analyze(const cplx* f, std::size_t n) {
    Fft plan(2 * n);
    std::vector<cplx> g(2 * n, cplx(0.0, 0.0));
    for (std::size_t j = 1; j < n; ++j) {
        g[j] = f[j];
        g[2 * n - j] = -f[j];
    }
    plan.forward(g.data());
    // G_m = -2i * sum_j f_j sin(pi*m*j/n)  =>  sum = i*G_m/2; c_m = (2/(2n)) * sum... derive:
    // f_j = sum_m c_m sin(pi m j / n) with orthogonality sum_j sin sin = n/2 delta.
    // => c_m = (2/n) sum_j f_j sin(pi m j/n) = (2/n) * (i G_m / 2) = i G_m / n.
    std::vector<cplx> c(n, cplx(0.0, 0.0));
    for (std::size_t m = 1; m < n; ++m) c[m] = cplx(0.0, 1.0) * g[m] / double(n);
    return c;
}

/// Inverse of sine_analyze: f_j = sum_{m=1}^{n-1} c_m sin(pi*m*j/n).
inline std::vector<cplx> sine_synthesize(const cplx* c, std::size_t n) {
    Fft plan(2 * n);
    std::vector<cplx> g(2 * n, cplx(0.0, 0.0));
    const cplx half_i(0.0, 0.5);
    for (std::size_t m = 1; m < n; ++m) {
        // sin(pi m j/n) = (e^{i pi m j/n} - e^{-i pi m j/n}) / (2i)
        g[m] -= half_i * c[m];          // -i/2 on +m  (1/(2i) = -i/2)
        g[2 * n - m] += half_i * c[m];  // +i/2 on -m
    }
    plan.inverse(g.data());
    std::vector<cplx> f(n);
    for (std::size_t j = 0; j < n; ++j) f[j] = g[j] * double(2 * n);
    return f;
}

/// Cosine synthesis on the same grid: s_j = sum_{m=1}^{n-1} d_m cos(pi*m*j/n),
/// used for spectral first derivatives of sine series.
inline std::vector<cplx> cosine_synthesize(const cplx* d, std::size_t n) {
    Fft plan(2 * n);
    std::vector<cplx> g(2 * n, cplx(0.0, 0.0));
    for (std::size_t m = 1; m < n; ++m) {
        g[m] += 0.5 * d[m];
        g[2 * n - m] += 0.5 * d[m];
    }
    plan.inverse(g.data());
    std::vector<cplx> s(n);
    for (std::size_t j = 0; j < n; ++j) s[j] = g[j] * double(2 * n);
    return s;
}

/// Signed Fourier mode number for natural FFT bin order: 0,1,..,n/2-1,-n/2,..,-1.
inline double fourier_mode(std::size_t bin, std::size_t n) {
    return bin < n / 2 ? double(bin) : double(bin) - double(n);
}

} // namespace pilotwave
