// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference computations for the tests, written independently of the library
// internals: direct summation in extended precision, closed forms, and brute
// quadrature. Anything asserted against library output is computed here from
// first principles.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using lcplx = std::complex<long double>;
constexpr long double kPi = 3.141592653589793238462643383279503L;

/// Direct O(n^2) discrete Fourier transform, X_k = sum_j x_j e^{-2 pi i jk/n}.
inline std::vector<std::complex<double>> dft_slow(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        lcplx acc(0, 0);
        for (std::size_t j = 0; j < n; ++j) {
            long double ang = -2.0L * kPi * (long double)(j * k % n) / (long double)n;
            acc += lcplx(x[j].real(), x[j].imag()) * lcplx(std::cos(ang), std::sin(ang));
        }
        out[k] = std::complex<double>((double)acc.real(), (double)acc.imag());
    }
    return out;
}

/// Normalized box eigenfunction sqrt(2/L) sin(m pi (x-lo)/L).
inline long double box_mode(int m, long double lo, long double L, long double x) {
    return std::sqrt(2.0L / L) * std::sin((long double)m * kPi * (x - lo) / L);
}

/// Free Gaussian closed form (hbar = 1): initial width sigma, center x0,
/// momentum p, mass m. Independent derivation via the complex-width wave.
inline lcplx free_gaussian(long double x, long double t, long double sigma, long double x0,
                           long double p, long double mass) {
    lcplx w(1.0L, t / (2.0L * mass * sigma * sigma));
    long double mu = x0 + p * t / mass;
    lcplx expo = -((x - mu) * (x - mu)) / (4.0L * sigma * sigma * w) +
                 lcplx(0.0L, p * (x - x0)) + lcplx(0.0L, -p * p * t / (2.0L * mass));
    return std::pow(2.0L * kPi * sigma * sigma, -0.25L) / std::sqrt(w) * std::exp(expo);
}

/// Guidance velocity of the p = 0, x0 = 0 free Gaussian: v = x t / (4 m^2 sigma^4 + t^2).
inline long double free_gaussian_velocity(long double x, long double t, long double sigma,
                                          long double mass) {
    return x * t / (4.0L * mass * mass * sigma * sigma * sigma * sigma + t * t);
}

/// Two-sided Kolmogorov-Smirnov statistic of samples against a cdf.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - double(i) / n));
        d = std::max(d, std::abs(f - double(i + 1) / n));
    }
    return d;
}

/// Wigner function of a Gaussian ground-state-like packet, peak 1/pi.
inline double gaussian_wigner(double q, double p, double sigma) {
    return std::exp(-q * q / (2.0 * sigma * sigma) - 2.0 * sigma * sigma * p * p) / M_PI;
}

/// Composite Simpson integral of f over [a, b] with n (even) panels.
template <typename F>
long double simpson(F f, long double a, long double b, int n) {
    long double h = (b - a) / n;
    long double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + h * i) * ((i % 2) ? 4.0L : 2.0L);
    return acc * h / 3.0L;
}

/// Coherent state of the harmonic well V = m w^2 x^2 / 2 (hbar = 1), displaced
/// by amplitude A at t = 0 and at rest there; center follows A cos(w t).
inline lcplx coherent_state(long double x, long double t, long double mass, long double w,
                            long double A) {
    long double a0 = A * std::sqrt(mass * w / 2.0L);
    lcplx at = a0 * std::exp(lcplx(0.0L, -w * t));
    lcplx expo = -mass * w * x * x / 2.0L + std::sqrt(2.0L * mass * w) * at * x -
                 at * at / 2.0L - a0 * a0 / 2.0L + lcplx(0.0L, -w * t / 2.0L);
    return std::pow(mass * w / kPi, 0.25L) * std::exp(expo);
}

} // namespace oracle
