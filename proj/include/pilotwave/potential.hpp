// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/grid.hpp"

namespace pilotwave {

/// External potential V(q). Box walls are expressed through the grid
/// boundary, not through V; "free" means V = 0 inside the domain.
class PotentialSpec {
public:
    enum class Kind { free, harmonic, tabulated };

    static PotentialSpec free_space() { return PotentialSpec(Kind::free); }

    /// Per-axis harmonic well: V = sum_i 0.5 * m_i * omega_i^2 * (q_i - c_i)^2.
    static PotentialSpec harmonic(std::array<double, 3> omega, std::array<double, 3> center,
                                  std::array<double, 3> mass) {
        PotentialSpec p(Kind::harmonic);
        p.omega_ = omega;
        p.center_ = center;
        p.mass_ = mass;
        return p;
    }

    static PotentialSpec tabulated(Grid grid, std::vector<double> values) {
        PotentialSpec p(Kind::tabulated);
        require(values.size() == grid.size(), Errc::invalid_argument,
                "tabulated potential size must match grid");
        p.grid_ = std::move(grid);
        p.values_ = std::move(values);
        return p;
    }

    Kind kind() const { return kind_; }

    double value(const Vec& q) const {
        switch (kind_) {
        case Kind::free: return 0.0;
        case Kind::harmonic: {
            double v = 0.0;
            for (int i = 0; i < q.dim; ++i) {
                double u = q[i] - center_[std::size_t(i)];
                double w = omega_[std::size_t(i)];
                v += 0.5 * mass_[std::size_t(i)] * w * w * u * u;
            }
            return v;
        }
        case Kind::tabulated: return value_nearest(q);
        }
        return 0.0;
    }

    /// Analytic gradient; defined for free and harmonic kinds.
    Vec gradient(const Vec& q) const {
        Vec g = Vec::zero(q.dim);
        switch (kind_) {
        case Kind::free: return g;
        case Kind::harmonic:
            for (int i = 0; i < q.dim; ++i) {
                double w = omega_[std::size_t(i)];
                g[i] = mass_[std::size_t(i)] * w * w * (q[i] - center_[std::size_t(i)]);
            }
            return g;
        case Kind::tabulated:
            fail(Errc::invalid_argument, "tabulated potential has no off-grid gradient");
        }
        return g;
    }

    /// Values on every point of `grid`, row-major (for split-operator stepping).
    std::vector<double> tabulate(const Grid& grid) const {
        if (kind_ == Kind::tabulated) {
            require(grid == grid_, Errc::basis_mismatch, "tabulated potential grid mismatch");
            return values_;
        }
        std::vector<double> v(grid.size());
        for (std::size_t f = 0; f < grid.size(); ++f) v[f] = value(grid.point(f));
        return v;
    }

private:
    explicit PotentialSpec(Kind k) : kind_(k) {}

    double value_nearest(const Vec& q) const {
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int i = 0; i < grid_.ndim(); ++i) {
            const Axis& a = grid_.axis(i);
            double u = (q[i] - a.lo) / a.spacing();
            long j = std::lround(u);
            j = std::max(0l, std::min(long(a.npoints) - 1, j));
            idx[std::size_t(i)] = std::size_t(j);
        }
        return values_[grid_.flatten(idx)];
    }

    Kind kind_;
    std::array<double, 3> omega_{0, 0, 0};
    std::array<double, 3> center_{0, 0, 0};
    std::array<double, 3> mass_{1, 1, 1};
    Grid grid_;
    std::vector<double> values_;
};

} // namespace pilotwave
