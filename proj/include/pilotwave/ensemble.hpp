// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/guidance.hpp"
#include "pilotwave/rng.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

enum MemberFlag : unsigned {
    member_node_grazed = flag_node_grazed,
    member_step_clamped = flag_step_clamped,
    member_stuck = 4u, ///< integration gave up; position frozen, member excluded from stats
};

/// A cloud of configuration points sharing one pilot wave. Member order is
/// stable across evolution: points[i] always continues the same trajectory.
struct EnsembleState {
    std::vector<Vec> points;
    std::vector<unsigned> flags;
    double time = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
};

/// Stream offsets keep independent draw purposes from colliding.
inline constexpr std::uint64_t kStreamPosition = 0;
inline constexpr std::uint64_t kStreamPointer = std::uint64_t(1) << 32;

namespace detail {

/// Density value at a lattice index with the axis-end convention applied:
/// box axes vanish at the upper wall, periodic axes wrap around.
inline double density_at(const std::vector<double>& density, const Grid& grid,
                         std::array<std::size_t, 3> idx) {
    for (int d = 0; d < grid.ndim(); ++d) {
        if (idx[std::size_t(d)] < grid.axis(d).npoints) continue;
        if (grid.axis(d).boundary == Boundary::periodic)
            idx[std::size_t(d)] = 0;
        else
            return 0.0;
    }
    return density[grid.flatten(idx)];
}

/// Draw xi in [0, 1) distributed linearly between endpoint densities a and b
/// (the inverse CDF of the trapezoid cell), from the uniform draw u.
inline double trapezoid_jitter(double a, double b, double u) {
    double m = 0.5 * (a + b);
    if (m <= 0.0) return u;
    double um = u * m;
    double disc = a * a + 2.0 * (b - a) * um;
    double xi = 2.0 * um / (a + std::sqrt(std::max(disc, 0.0)));
    return std::min(std::max(xi, 0.0), 1.0 - 1e-16);
}

} // namespace detail

/// Draw n points from a nonnegative density tabulated on a grid. Cell f spans
/// grid point f to its upper neighbours (box axes end at zero density beyond
/// the wall, periodic axes wrap); cells are weighted by the multilinear
/// corner average and an exact inverse-CDF picks the cell. Inside the cell
/// each axis is drawn from its linear marginal, so the scheme is second-order
/// accurate with no half-cell bias. Every member consumes only its own
/// counter-based stream, so the result is independent of scheduling and
/// identical for any worker count.
inline EnsembleState sample_from_density(const std::vector<double>& density, const Grid& grid,
                                         std::size_t n, std::uint64_t seed) {
    require(density.size() == grid.size(), Errc::bad_density,
            "density table does not match the grid");
    const int nd = grid.ndim();
    double peak = 0.0;
    for (double d : density) peak = std::max(peak, d);
    require(peak > 0.0, Errc::bad_density, "density is identically zero");
    for (double d : density)
        require(d >= -1e-12 * peak, Errc::bad_density, "density has negative entries");

    const int ncorner = 1 << nd;
    auto corner = [&](std::array<std::size_t, 3> idx, int mask) {
        for (int d = 0; d < nd; ++d)
            if (mask & (1 << d)) idx[std::size_t(d)]++;
        return std::max(detail::density_at(density, grid, idx), 0.0);
    };

    std::vector<double> cdf(grid.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < grid.size(); ++f) {
        auto idx = grid.unflatten(f);
        double mean = 0.0;
        for (int m = 0; m < ncorner; ++m) mean += corner(idx, m);
        acc += mean / double(ncorner);
        cdf[f] = acc;
    }
    require(acc > 0.0, Errc::bad_density, "density has no mass");
    const double total = acc;

    EnsembleState ens;
    ens.seed = seed;
    ens.points.resize(n);
    ens.flags.assign(n, 0u);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rs(seed, kStreamPosition + i);
        double u = rs.next_double() * total;
        std::size_t f =
            std::size_t(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (f >= cdf.size()) f = cdf.size() - 1;
        // Skip zero-mass cells that share their cdf value with a predecessor.
        while (f + 1 < cdf.size() && cdf[f] - (f ? cdf[f - 1] : 0.0) <= 0.0) ++f;
        auto idx = grid.unflatten(f);
        Vec p = Vec::zero(nd);
        for (int d = 0; d < nd; ++d) {
            const Axis& ax = grid.axis(d);
            // Linear marginal along axis d: corner means on its two faces.
            double a = 0.0, b = 0.0;
            for (int m = 0; m < ncorner; ++m)
                (m & (1 << d) ? b : a) += corner(idx, m);
            double xi = detail::trapezoid_jitter(a, b, rs.next_double());
            p[d] = ax.lo + (double(idx[std::size_t(d)]) + xi) * ax.spacing();
        }
        ens.points[i] = p;
    }
    return ens;
}

/// Advance every member along its guidance trajectory to t_final. Members are
/// statically partitioned over the worker threads; each member's integration
/// is self-contained, so the outcome is bitwise identical for any worker
/// count. A member whose integration fails is frozen and flagged.
inline void evolve_ensemble(EnsembleState& ens, const Evolution& ev, double t_final,
                            const IntegrateOptions& opt = {}, unsigned workers = 0) {
    require(t_final > ens.time, Errc::invalid_argument, "ensemble must evolve forward");
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, 64u);
    const std::size_t n = ens.size();
    const double t0 = ens.time;

    auto run_range = [&](std::size_t begin, std::size_t end) {
        IntegrateOptions o = opt;
        o.sample_times.clear();
        o.record_steps = false;
        for (std::size_t i = begin; i < end; ++i) {
            if (ens.flags[i] & member_stuck) continue;
            try {
                Trajectory tr = integrate_trajectory(ev, ens.points[i], t0, t_final, o);
                ens.points[i] = tr.back().q;
                ens.flags[i] |= tr.flags;
            } catch (const Error&) {
                ens.flags[i] |= member_stuck;
            }
        }
    };

    if (workers <= 1 || n < 2 * workers) {
        run_range(0, n);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        std::size_t chunk = (n + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            std::size_t b = std::min(n, std::size_t(w) * chunk);
            std::size_t e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(run_range, b, e);
        }
        for (std::thread& th : pool) th.join();
    }
    ens.time = t_final;
}

/// Ensemble and wave densities averaged over a uniform partition into coarse
/// cells (per-axis cell counts must divide the fine grid).
struct CoarseGrain {
    std::array<std::size_t, 3> ncells{1, 1, 1};
    int ndim = 0;
    double cell_volume = 0.0;
    std::vector<double> p_bar; ///< coarse ensemble density per cell
    std::vector<double> d_bar; ///< coarse |psi|^2 per cell
    std::size_t counted = 0;   ///< members that landed in the domain
};

inline CoarseGrain coarse_grain(const EnsembleState& ens, const WaveField& field,
                                std::array<std::size_t, 3> ncells) {
    const Grid& g = field.grid();
    const int nd = g.ndim();
    std::size_t total_cells = 1;
    for (int d = 0; d < nd; ++d) {
        std::size_t nc = ncells[std::size_t(d)];
        require(nc >= 1 && g.axis(d).npoints % nc == 0, Errc::resolution_too_coarse,
                "coarse cells must evenly divide the grid");
        total_cells *= nc;
    }
    CoarseGrain cg;
    cg.ncells = ncells;
    cg.ndim = nd;
    cg.cell_volume = 1.0;
    for (int d = 0; d < nd; ++d)
        cg.cell_volume *= g.axis(d).length() / double(ncells[std::size_t(d)]);
    cg.p_bar.assign(total_cells, 0.0);
    cg.d_bar.assign(total_cells, 0.0);

    auto cell_of = [&](const Vec& q, bool& inside) {
        std::size_t flat = 0;
        inside = true;
        for (int d = 0; d < nd; ++d) {
            const Axis& ax = g.axis(d);
            double u = (q[d] - ax.lo) / ax.length();
            if (ax.boundary == Boundary::periodic) {
                u -= std::floor(u);
            } else if (u < 0.0 || u >= 1.0) {
                inside = false;
                return std::size_t(0);
            }
            std::size_t c = std::min(std::size_t(u * double(ncells[std::size_t(d)])),
                                     ncells[std::size_t(d)] - 1);
            flat = flat * ncells[std::size_t(d)] + c;
        }
        return flat;
    };

    std::size_t usable = 0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        if (ens.flags[i] & member_stuck) continue;
        bool inside = false;
        std::size_t c = cell_of(ens.points[i], inside);
        if (!inside) continue;
        cg.p_bar[c] += 1.0;
        ++usable;
    }
    require(usable > 0, Errc::bad_density, "no usable ensemble members");
    cg.counted = usable;
    for (double& p : cg.p_bar) p /= double(usable) * cg.cell_volume;

    // Average the fine density over each cell.
    std::vector<double> dens = field.density();
    const auto strides = g.strides();
    for (std::size_t f = 0; f < dens.size(); ++f) {
        auto idx = g.unflatten(f);
        std::size_t flat = 0;
        for (int d = 0; d < nd; ++d) {
            std::size_t per = g.axis(d).npoints / ncells[std::size_t(d)];
            flat = flat * ncells[std::size_t(d)] + idx[std::size_t(d)] / per;
        }
        cg.d_bar[flat] += dens[f];
    }
    double pts_per_cell = double(g.size()) / double(total_cells);
    for (double& d : cg.d_bar) d /= pts_per_cell;
    return cg;
}

/// Coarse-grained relative-entropy functional
///   Hbar = sum_cells Pbar ln(Pbar/Dbar) * cell_volume.
/// Empty cells contribute zero; ensemble mass where the wave has none is a
/// support mismatch.
inline double h_function(const CoarseGrain& cg) {
    double h = 0.0;
    for (std::size_t c = 0; c < cg.p_bar.size(); ++c) {
        double p = cg.p_bar[c];
        if (p <= 0.0) continue;
        double d = cg.d_bar[c];
        require(d > 1e-300, Errc::support_mismatch,
                "ensemble occupies cells where the wave density vanishes");
        h += p * std::log(p / d) * cg.cell_volume;
    }
    return h;
}

/// Total-variation distance between the coarse ensemble and wave densities:
/// 0.5 * sum |Pbar - Dbar| * cell_volume.
inline double tv_distance(const CoarseGrain& cg) {
    double tv = 0.0;
    for (std::size_t c = 0; c < cg.p_bar.size(); ++c)
        tv += std::abs(cg.p_bar[c] - cg.d_bar[c]) * cg.cell_volume;
    return 0.5 * tv;
}

/// Fractions of the ensemble inside each disjoint window on one axis, plus
/// the unassigned remainder. Windows must not overlap.
struct OutcomeFractions {
    std::vector<double> fraction;
    double unassigned = 0.0;
    std::vector<std::size_t> count;
    std::size_t total = 0;
};

inline OutcomeFractions outcome_fractions(const EnsembleState& ens, int axis,
                                          const std::vector<std::pair<double, double>>& windows) {
    for (std::size_t a = 0; a < windows.size(); ++a) {
        require(windows[a].first < windows[a].second, Errc::invalid_argument,
                "window bounds out of order");
        for (std::size_t b = a + 1; b < windows.size(); ++b)
            require(windows[a].second <= windows[b].first ||
                        windows[b].second <= windows[a].first,
                    Errc::overlap_error, "outcome windows overlap");
    }
    OutcomeFractions out;
    out.fraction.assign(windows.size(), 0.0);
    out.count.assign(windows.size(), 0);
    std::size_t usable = 0, unassigned = 0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        if (ens.flags[i] & member_stuck) continue;
        ++usable;
        double y = ens.points[i][axis];
        bool hit = false;
        for (std::size_t wdx = 0; wdx < windows.size(); ++wdx)
            if (y >= windows[wdx].first && y < windows[wdx].second) {
                out.count[wdx]++;
                hit = true;
                break;
            }
        if (!hit) ++unassigned;
    }
    require(usable > 0, Errc::bad_density, "no usable ensemble members");
    out.total = usable;
    for (std::size_t wdx = 0; wdx < windows.size(); ++wdx)
        out.fraction[wdx] = double(out.count[wdx]) / double(usable);
    out.unassigned = double(unassigned) / double(usable);
    return out;
}

} // namespace pilotwave
