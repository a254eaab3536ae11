// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/fft.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

/// Discrete Wigner quasi-distribution of a 1-D periodic field,
///   W(q, p) = (1/2 pi) int dz e^{i p z} psi(q - z/2) psi^*(q + z/2),
/// sampled so that both marginals are recovered exactly by the Riemann sums:
///   sum_p W dp = |psi(q)|^2,  sum_q W dq = |psi_tilde(p)|^2.
/// q runs over the doubled (half-step) grid, obtained by exact trigonometric
/// upsampling; p over 2n frequencies spaced pi/L.
struct WignerTable {
    std::vector<double> q;
    std::vector<double> p;
    std::vector<double> w; ///< row-major, w[iq * p.size() + ip]
    double dq = 0.0;
    double dp = 0.0;

    double at(std::size_t iq, std::size_t ip) const { return w[iq * p.size() + ip]; }
};

inline WignerTable wigner(const WaveField& field) {
    const Grid& g = field.grid();
    require(g.ndim() == 1, Errc::invalid_argument, "wigner transform is defined for 1-D fields");
    require(g.axis(0).boundary == Boundary::periodic, Errc::boundary_unsupported,
            "wigner transform needs a periodic axis");
    const std::size_t n = g.axis(0).npoints;
    const std::size_t n2 = 2 * n;
    const double L = g.axis(0).length();
    const double dx = g.axis(0).spacing();

    // Exact band-limited upsample to the half-step grid: zero-pad the spectrum.
    Fft plan_n(n), plan_2n(n2);
    std::vector<cplx> spec = field.amplitudes();
    plan_n.forward(spec.data());
    std::vector<cplx> up(n2, cplx(0, 0));
    for (std::size_t b = 0; b < n; ++b) {
        long m = long(fourier_mode(b, n));
        std::size_t slot = std::size_t(m >= 0 ? m : m + long(n2));
        up[slot] = spec[b];
    }
    // Split the Nyquist bin symmetrically so the upsample stays real-friendly.
    if (n >= 2) {
        std::size_t nyq_src = n / 2;
        cplx v = spec[nyq_src];
        up[n / 2] = 0.5 * v;
        up[n2 - n / 2] = 0.5 * v;
    }
    plan_2n.inverse(up.data());
    for (cplx& a : up) a *= double(n2) / double(n); // keep psi values, not sums

    WignerTable out;
    out.q.resize(n2);
    out.p.resize(n2);
    out.w.assign(n2 * n2, 0.0);
    out.dq = dx / 2.0;
    out.dp = kPi / L;
    for (std::size_t a = 0; a < n2; ++a) out.q[a] = g.axis(0).lo + double(a) * out.dq;
    for (std::size_t m = 0; m < n2; ++m)
        out.p[m] = out.dp * (double(m) - double(n)); // ascending, signed

    std::vector<cplx> kernel(n2);
    const double scale = dx / kTwoPi;
    for (std::size_t a = 0; a < n2; ++a) {
        for (std::size_t l = 0; l < n2; ++l) {
            std::size_t back = (a + n2 - (l % n2)) % n2;
            std::size_t fwd = (a + l) % n2;
            kernel[l] = up[back] * std::conj(up[fwd]);
        }
        // W(q, p_m) = scale * sum_l e^{+2 pi i m l / 2n} K_l: unnormalized
        // inverse transform of the kernel.
        plan_2n.inverse(kernel.data());
        for (std::size_t m = 0; m < n2; ++m) {
            long signed_m = long(fourier_mode(m, n2));
            std::size_t ip = std::size_t(signed_m + long(n));
            out.w[a * n2 + ip] = scale * double(n2) * std::real(kernel[m]);
        }
    }
    return out;
}

/// Position marginal: sum_p W dp per q node (length 2n).
inline std::vector<double> wigner_position_marginal(const WignerTable& t) {
    std::vector<double> m(t.q.size(), 0.0);
    for (std::size_t a = 0; a < t.q.size(); ++a) {
        double s = 0.0;
        for (std::size_t ip = 0; ip < t.p.size(); ++ip) s += t.at(a, ip);
        m[a] = s * t.dp;
    }
    return m;
}

/// Momentum marginal: sum_q W dq per p node (length 2n).
inline std::vector<double> wigner_momentum_marginal(const WignerTable& t) {
    std::vector<double> m(t.p.size(), 0.0);
    for (std::size_t ip = 0; ip < t.p.size(); ++ip) {
        double s = 0.0;
        for (std::size_t a = 0; a < t.q.size(); ++a) s += t.at(a, ip);
        m[ip] = s * t.dq;
    }
    return m;
}

} // namespace pilotwave
