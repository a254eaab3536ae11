// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/fft.hpp"
#include "pilotwave/grid.hpp"

namespace pilotwave {

/// Complex amplitude on every grid point, row-major, plus the per-axis masses
/// and the time stamp the amplitudes refer to (hbar = 1 throughout).
class WaveField {
public:
    WaveField() = default;
    WaveField(Grid grid, std::array<double, 3> mass, double time = 0.0)
        : grid_(std::move(grid)), mass_(mass), time_(time), amp_(grid_.size(), cplx(0, 0)) {
        for (int i = 0; i < grid_.ndim(); ++i)
            require(mass_[std::size_t(i)] > 0, Errc::invalid_argument, "mass must be positive");
    }

    const Grid& grid() const { return grid_; }
    const std::array<double, 3>& mass() const { return mass_; }
    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    std::vector<cplx>& amplitudes() { return amp_; }
    const std::vector<cplx>& amplitudes() const { return amp_; }
    cplx& operator[](std::size_t f) { return amp_[f]; }
    const cplx& operator[](std::size_t f) const { return amp_[f]; }

    double norm_squared() const {
        double s = 0.0;
        for (const cplx& a : amp_) s += std::norm(a);
        return s * grid_.cell_volume();
    }
    double norm() const { return std::sqrt(norm_squared()); }

    /// Rescale to unit L2 norm. Throws ZeroNorm when there is nothing to scale.
    WaveField normalized() const {
        double n = norm();
        require(n > 1e-300, Errc::zero_norm, "cannot normalize a zero field");
        WaveField out = *this;
        double s = 1.0 / n;
        for (cplx& a : out.amp_) a *= s;
        return out;
    }

    /// |psi|^2 on every grid point.
    std::vector<double> density() const {
        std::vector<double> d(amp_.size());
        for (std::size_t f = 0; f < amp_.size(); ++f) d[f] = std::norm(amp_[f]);
        return d;
    }

    double max_density() const {
        double m = 0.0;
        for (const cplx& a : amp_) m = std::max(m, std::norm(a));
        return m;
    }

private:
    Grid grid_;
    std::array<double, 3> mass_{1, 1, 1};
    double time_ = 0.0;
    std::vector<cplx> amp_;
};

inline cplx inner_product(const WaveField& a, const WaveField& b) {
    require(a.grid() == b.grid(), Errc::basis_mismatch, "inner product needs matching grids");
    cplx s(0, 0);
    for (std::size_t f = 0; f < a.amplitudes().size(); ++f)
        s += std::conj(a[f]) * b[f];
    return s * a.grid().cell_volume();
}

inline double l2_distance(const WaveField& a, const WaveField& b) {
    require(a.grid() == b.grid(), Errc::basis_mismatch, "distance needs matching grids");
    double s = 0.0;
    for (std::size_t f = 0; f < a.amplitudes().size(); ++f)
        s += std::norm(a[f] - b[f]);
    return std::sqrt(s * a.grid().cell_volume());
}

namespace detail {

/// Apply `fn` to every 1-D line of `data` along `axis` (gather/scatter through
/// a contiguous scratch buffer).
template <typename Fn>
void for_each_line(const Grid& grid, std::vector<cplx>& data, int axis, Fn&& fn) {
    const std::size_t n = grid.axis(axis).npoints;
    const auto st = grid.strides();
    const std::size_t stride = st[std::size_t(axis)];
    const std::size_t total = grid.size();
    std::vector<cplx> scratch(n);
    // Enumerate line origins: all flat indices whose coordinate on `axis` is 0.
    for (std::size_t f = 0; f < total; ++f) {
        if ((f / stride) % n != 0) continue;
        for (std::size_t j = 0; j < n; ++j) scratch[j] = data[f + j * stride];
        fn(scratch.data(), n);
        for (std::size_t j = 0; j < n; ++j) data[f + j * stride] = scratch[j];
    }
}

} // namespace detail

/// Spectral partial derivative along one axis: Fourier differentiation on
/// periodic axes, sine -> cosine series differentiation on box axes.
inline std::vector<cplx> spectral_derivative(const WaveField& field, int axis) {
    const Grid& g = field.grid();
    std::vector<cplx> out = field.amplitudes();
    const Axis& ax = g.axis(axis);
    if (ax.boundary == Boundary::periodic) {
        Fft plan(ax.npoints);
        const double dk = kTwoPi / ax.length();
        detail::for_each_line(g, out, axis, [&](cplx* line, std::size_t n) {
            plan.forward(line);
            for (std::size_t b = 0; b < n; ++b)
                line[b] *= cplx(0.0, dk * fourier_mode(b, n));
            plan.inverse(line);
        });
    } else {
        const double dmu = kPi / ax.length();
        detail::for_each_line(g, out, axis, [&](cplx* line, std::size_t n) {
            std::vector<cplx> c = sine_analyze(line, n);
            for (std::size_t m = 1; m < n; ++m) c[m] *= dmu * double(m);
            std::vector<cplx> s = cosine_synthesize(c.data(), n);
            std::copy(s.begin(), s.end(), line);
        });
    }
    return out;
}

/// Probability current on every grid point: j_i = Im(psi^* d_i psi) / m_i.
struct CurrentField {
    std::array<std::vector<double>, 3> component;
};

inline CurrentField current(const WaveField& field) {
    CurrentField j;
    for (int i = 0; i < field.grid().ndim(); ++i) {
        std::vector<cplx> d = spectral_derivative(field, i);
        std::vector<double>& c = j.component[std::size_t(i)];
        c.resize(d.size());
        const double inv_m = 1.0 / field.mass()[std::size_t(i)];
        for (std::size_t f = 0; f < d.size(); ++f)
            c[f] = std::imag(std::conj(field[f]) * d[f]) * inv_m;
    }
    return j;
}

} // namespace pilotwave
