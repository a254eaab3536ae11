// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/fft.hpp"

namespace pilotwave {

enum class Boundary : std::uint8_t { periodic = 0, box = 1 };

inline const char* boundary_name(Boundary b) {
    return b == Boundary::periodic ? "periodic" : "box";
}

struct Axis {
    std::size_t npoints = 0;
    double lo = 0.0;
    double hi = 0.0;
    Boundary boundary = Boundary::periodic;

    double length() const { return hi - lo; }
    double spacing() const { return length() / double(npoints); }
    bool operator==(const Axis& o) const {
        return npoints == o.npoints && lo == o.lo && hi == o.hi && boundary == o.boundary;
    }
};

/// Uniform rectangular grid, 1 to 3 axes, row-major flattening with axis 0
/// slowest. Points sit at x_j = lo + j*dx with j = 0..n-1; for box axes the
/// walls are x = lo (stored, field vanishes there) and x = hi (not stored).
class Grid {
public:
    Grid() = default;
    explicit Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
        require(!axes_.empty() && axes_.size() <= 3, Errc::invalid_argument,
                "grid must have 1 to 3 axes");
        for (const Axis& ax : axes_) {
            require(is_pow2(ax.npoints) && ax.npoints >= 8, Errc::invalid_argument,
                    "axis npoints must be a power of two >= 8");
            require(ax.hi > ax.lo, Errc::invalid_argument, "axis needs hi > lo");
        }
    }

    int ndim() const { return int(axes_.size()); }
    const Axis& axis(int i) const { return axes_[std::size_t(i)]; }
    const std::vector<Axis>& axes() const { return axes_; }

    std::size_t size() const {
        std::size_t s = 1;
        for (const Axis& ax : axes_) s *= ax.npoints;
        return s;
    }

    double cell_volume() const {
        double v = 1.0;
        for (const Axis& ax : axes_) v *= ax.spacing();
        return v;
    }

    /// Row-major strides (axis 0 slowest).
    std::array<std::size_t, 3> strides() const {
        std::array<std::size_t, 3> s{1, 1, 1};
        for (int i = ndim() - 2; i >= 0; --i)
            s[std::size_t(i)] = s[std::size_t(i) + 1] * axes_[std::size_t(i) + 1].npoints;
        return s;
    }

    std::size_t flatten(const std::array<std::size_t, 3>& idx) const {
        auto st = strides();
        std::size_t f = 0;
        for (int i = 0; i < ndim(); ++i) f += idx[std::size_t(i)] * st[std::size_t(i)];
        return f;
    }

    std::array<std::size_t, 3> unflatten(std::size_t flat) const {
        auto st = strides();
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int i = 0; i < ndim(); ++i) {
            idx[std::size_t(i)] = flat / st[std::size_t(i)];
            flat %= st[std::size_t(i)];
        }
        return idx;
    }

    double coord(int ax, std::size_t j) const {
        const Axis& a = axes_[std::size_t(ax)];
        return a.lo + double(j) * a.spacing();
    }

    Vec point(std::size_t flat) const {
        auto idx = unflatten(flat);
        Vec p = Vec::zero(ndim());
        for (int i = 0; i < ndim(); ++i) p[i] = coord(i, idx[std::size_t(i)]);
        return p;
    }

    /// True if q lies inside the domain (periodic axes always wrap inside).
    bool contains(const Vec& q) const {
        for (int i = 0; i < ndim(); ++i) {
            const Axis& a = axes_[std::size_t(i)];
            if (a.boundary == Boundary::box && (q[i] < a.lo || q[i] > a.hi)) return false;
        }
        return true;
    }

    /// Map q into the fundamental domain on periodic axes.
    Vec wrap(Vec q) const {
        for (int i = 0; i < ndim(); ++i) {
            const Axis& a = axes_[std::size_t(i)];
            if (a.boundary == Boundary::periodic) {
                double L = a.length();
                double u = std::fmod(q[i] - a.lo, L);
                if (u < 0) u += L;
                q[i] = a.lo + u;
            }
        }
        return q;
    }

    double min_spacing() const {
        double m = axes_[0].spacing();
        for (const Axis& ax : axes_) m = std::min(m, ax.spacing());
        return m;
    }

    bool operator==(const Grid& o) const { return axes_ == o.axes_; }
    bool operator!=(const Grid& o) const { return !(*this == o); }

private:
    std::vector<Axis> axes_;
};

} // namespace pilotwave
