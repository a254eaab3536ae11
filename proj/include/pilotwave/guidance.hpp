// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/evolution.hpp"
#include "pilotwave/potential.hpp"

namespace pilotwave {

/// Relative density floor: points where |psi|^2 falls below
/// eps_node * ceiling count as node encounters.
inline constexpr double kNodeEpsilon = 1e-12;

enum SampleFlag : unsigned {
    flag_node_grazed = 1u,  ///< a stage saw density below the node threshold
    flag_step_clamped = 2u, ///< speed or position was clamped during a step
};

/// Guidance velocity dq/dt = j/|psi|^2 at one point. Throws NodeProximity
/// when the density is below the node threshold (the field is effectively
/// zero there and the velocity is not usable).
inline Vec guidance_velocity(const Evolution& ev, const Vec& q, double t) {
    double rho = 0.0;
    Vec v = ev.velocity(q, t, &rho);
    require(rho >= kNodeEpsilon * ev.density_ceiling(t), Errc::node_proximity,
            "density too close to a node for a usable velocity");
    return v;
}

struct TrajectoryPoint {
    double t = 0.0;
    Vec q;
    Vec v;
    unsigned flags = 0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    unsigned flags = 0;
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;

    const TrajectoryPoint& back() const { return points.back(); }
};

struct IntegrateOptions {
    double tol = 1e-8;     ///< local error tolerance per step (abs and rel)
    double h_init = 0.0;   ///< 0: choose automatically
    double h_min = 0.0;    ///< 0: 1e-12 * span
    long max_steps = 20'000'000;
    std::vector<double> sample_times; ///< additional record times (sorted)
    bool record_steps = false;        ///< record every accepted step
    int max_node_rejects = 64;        ///< consecutive node rejections before giving up
};

namespace detail {

/// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b* (5th minus embedded 4th order weights), k7 at the new point.
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600;
    static constexpr double e3 = 500.0 / 1113 - 7571.0 / 16695;
    static constexpr double e4 = 125.0 / 192 - 393.0 / 640;
    static constexpr double e5 = -2187.0 / 6784 + 92097.0 / 339200;
    static constexpr double e6 = 11.0 / 84 - 187.0 / 2100;
    static constexpr double e7 = -1.0 / 40;
};

} // namespace detail

/// Integrate the guidance equation dq/dt = v(q, t) from t0 to t1 with the
/// embedded Dormand-Prince 5(4) pair and proportional step control.
///
/// Node safeguard: a start point below the node density floor is refused
/// outright. Mid-flight, any stage whose density falls below the floor
/// rejects the step and halves it; once the step cannot shrink further the
/// integrator pushes through by at most one grid cell and flags the samples
/// node-grazed and clamped. More than max_node_rejects consecutive
/// rejections raise StuckAtNode. The step sequence is a pure function of the
/// inputs, so trajectories are bit-reproducible.
inline Trajectory integrate_trajectory(const Evolution& ev, const Vec& q0, double t0, double t1,
                                       const IntegrateOptions& opt = {}) {
    using T = detail::Dopri5;
    const int nd = ev.dim();
    const double span = t1 - t0;
    require(span > 0, Errc::invalid_argument, "integration window must run forward");
    const double h_min = opt.h_min > 0 ? opt.h_min : 1e-12 * span;
    const double dx_min = ev.grid().min_spacing();

    Trajectory traj;
    auto next_sample = opt.sample_times.begin();
    while (next_sample != opt.sample_times.end() && *next_sample <= t0) ++next_sample;

    double t = t0;
    Vec q = q0;
    unsigned carry_flags = 0;

    double ceiling = ev.density_ceiling(t0);
    const double eps = kNodeEpsilon;

    // Velocity with the node check folded in; returns false when the density
    // is under the floor or the velocity is unusable. Stages are never
    // altered: a bad stage rejects the whole step instead.
    auto stage = [&](const Vec& p, double tt, Vec& v) {
        double rho = 0.0;
        v = ev.velocity(p, tt, &rho);
        return rho >= eps * ceiling && std::isfinite(v.norm());
    };

    Vec k1;
    require(stage(q, t, k1), Errc::node_proximity,
            "trajectory starts below the node density floor");
    traj.points.push_back({t, q, k1, 0});

    // Initial step: conservative fraction of the span scaled by speed.
    double h = opt.h_init > 0 ? opt.h_init
                              : std::min(span / 16.0,
                                         0.1 * dx_min / std::max(k1.norm(), 1e-8));
    h = std::min(h, span);

    int consecutive_node_rejects = 0;
    long steps = 0;
    bool fsal_valid = true;

    while (t < t1 - 1e-14 * span) {
        require(++steps <= opt.max_steps, Errc::stuck_at_node,
                "step budget exhausted before reaching the end time");
        h = std::min(h, t1 - t);
        // Land exactly on the next requested sample time.
        bool hit_sample = false;
        if (next_sample != opt.sample_times.end() && t + h >= *next_sample - 1e-14 * span) {
            h = *next_sample - t;
            hit_sample = true;
            if (h <= 0) { // sample at current t (duplicate); skip it
                ++next_sample;
                continue;
            }
        }

        unsigned fl = 0;
        Vec k2, k3, k4, k5, k6, k7;
        bool ok = true;
        if (!fsal_valid) ok = stage(q, t, k1) && ok;

        Vec p = q;
        if (ok) {
            for (int i = 0; i < nd; ++i) p[i] = q[i] + h * T::a21 * k1[i];
            ok = stage(p, t + T::c2 * h, k2) && ok;
        }
        if (ok) {
            for (int i = 0; i < nd; ++i) p[i] = q[i] + h * (T::a31 * k1[i] + T::a32 * k2[i]);
            ok = stage(p, t + T::c3 * h, k3) && ok;
        }
        if (ok) {
            for (int i = 0; i < nd; ++i)
                p[i] = q[i] + h * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
            ok = stage(p, t + T::c4 * h, k4) && ok;
        }
        if (ok) {
            for (int i = 0; i < nd; ++i)
                p[i] = q[i] +
                       h * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
            ok = stage(p, t + T::c5 * h, k5) && ok;
        }
        if (ok) {
            for (int i = 0; i < nd; ++i)
                p[i] = q[i] + h * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] +
                                   T::a64 * k4[i] + T::a65 * k5[i]);
            ok = stage(p, t + h, k6) && ok;
        }
        Vec qn = q;
        if (ok) {
            for (int i = 0; i < nd; ++i)
                qn[i] = q[i] + h * (T::b1 * k1[i] + T::b3 * k3[i] + T::b4 * k4[i] +
                                    T::b5 * k5[i] + T::b6 * k6[i]);
            ok = stage(qn, t + h, k7) && ok;
        }

        if (!ok) {
            // Node encountered. Shrink the step; once minimal, push through
            // by at most one grid cell along the last usable velocity.
            ++consecutive_node_rejects;
            require(consecutive_node_rejects <= opt.max_node_rejects, Errc::stuck_at_node,
                    "trajectory pinned at a node");
            if (h > 4.0 * h_min) {
                h *= 0.5;
                fsal_valid = false;
                traj.steps_rejected++;
                continue;
            }
            Vec v_adv = k1;
            double speed = v_adv.norm();
            if (!std::isfinite(speed)) {
                v_adv = Vec::zero(nd);
            } else if (speed * h > dx_min) {
                v_adv = (dx_min / (speed * h)) * v_adv;
            }
            fl |= flag_node_grazed | flag_step_clamped;
            t += h;
            for (int i = 0; i < nd; ++i) qn[i] = q[i] + h * v_adv[i];
            q = qn;
            k7 = v_adv;
            fsal_valid = false;
            traj.steps_accepted++;
            traj.flags |= fl;
            carry_flags |= fl;
            bool record_push = opt.record_steps;
            if (hit_sample && next_sample != opt.sample_times.end() &&
                std::abs(t - *next_sample) <= 1e-12 * span) {
                record_push = true;
                ++next_sample;
            }
            if (t >= t1 - 1e-14 * span) record_push = true;
            if (record_push) {
                traj.points.push_back({t, q, k7, carry_flags});
                carry_flags = 0;
            }
            continue;
        }

        double err = 0.0;
        for (int i = 0; i < nd; ++i) {
            double e = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                            T::e6 * k6[i] + T::e7 * k7[i]);
            double scale = opt.tol * (1.0 + std::max(std::abs(q[i]), std::abs(qn[i])));
            err += (e / scale) * (e / scale);
        }
        err = std::sqrt(err / nd);

        if (err > 1.0 && h > h_min) {
            traj.steps_rejected++;
            h = std::max(h_min, h * std::max(0.2, 0.9 * std::pow(err, -0.2)));
            fsal_valid = false;
            continue;
        }

        // Accept.
        consecutive_node_rejects = 0;
        t += h;
        q = qn;
        // Keep box trajectories inside the domain against roundoff.
        for (int i = 0; i < nd; ++i) {
            const Axis& ax = ev.grid().axis(i);
            if (ax.boundary == Boundary::box) {
                double inset = 1e-12 * ax.length();
                if (q[i] < ax.lo + inset || q[i] > ax.hi - inset) {
                    q[i] = std::min(std::max(q[i], ax.lo + inset), ax.hi - inset);
                    fl |= flag_step_clamped;
                }
            }
        }
        k1 = k7;
        fsal_valid = true;
        traj.steps_accepted++;
        traj.flags |= fl;
        carry_flags |= fl;

        bool record = opt.record_steps;
        if (hit_sample && next_sample != opt.sample_times.end() &&
            std::abs(t - *next_sample) <= 1e-12 * span) {
            record = true;
            ++next_sample;
        }
        if (t >= t1 - 1e-14 * span) record = true;
        if (record) {
            traj.points.push_back({t, q, k7, carry_flags});
            carry_flags = 0;
        }

        if (err > 1e-30)
            h = std::min(t1 - t + 1e-30,
                         h * std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))));
        else
            h = std::min(t1 - t + 1e-30, 5.0 * h);
        h = std::max(h, h_min);
    }
    return traj;
}

/// Quantum potential Q = -sum_i (1/2 m_i) (d_i^2 R)/R with R = |psi|.
/// Throws NodeProximity below the density floor.
inline double quantum_potential(const Evolution& ev, const Vec& q, double t) {
    PointEval pe = ev.eval(q, t, 2);
    double rho = std::norm(pe.psi);
    require(rho >= kNodeEpsilon * ev.density_ceiling(t), Errc::node_proximity,
            "quantum potential undefined this close to a node");
    double R = std::sqrt(rho);
    double Q = 0.0;
    for (int i = 0; i < ev.dim(); ++i) {
        double drho = 2.0 * std::real(std::conj(pe.psi) * pe.d1[std::size_t(i)]);
        double ddrho = 2.0 * (std::norm(pe.d1[std::size_t(i)]) +
                              std::real(std::conj(pe.psi) * pe.d2[std::size_t(i)][std::size_t(i)]));
        double dR = drho / (2.0 * R);
        double ddR = (ddrho - 2.0 * dR * dR) / (2.0 * R);
        Q -= ddR / (2.0 * ev.mass()[std::size_t(i)] * R);
    }
    return Q;
}

/// Gradient of the quantum potential (analytic, from third derivatives).
inline Vec grad_quantum_potential(const Evolution& ev, const Vec& q, double t) {
    PointEval pe = ev.eval(q, t, 3);
    const int nd = ev.dim();
    double rho = std::norm(pe.psi);
    require(rho >= kNodeEpsilon * ev.density_ceiling(t), Errc::node_proximity,
            "quantum force undefined this close to a node");
    double R = std::sqrt(rho);

    std::array<double, 3> dR{};
    for (int k = 0; k < nd; ++k) {
        double drho = 2.0 * std::real(std::conj(pe.psi) * pe.d1[std::size_t(k)]);
        dR[std::size_t(k)] = drho / (2.0 * R);
    }
    auto ddrho_at = [&](int a, int b) {
        return 2.0 * (std::real(std::conj(pe.d1[std::size_t(a)]) * pe.d1[std::size_t(b)]) +
                      std::real(std::conj(pe.psi) * pe.d2[std::size_t(a)][std::size_t(b)]));
    };
    auto ddR_at = [&](int a, int b) {
        return (ddrho_at(a, b) - 2.0 * dR[std::size_t(a)] * dR[std::size_t(b)]) / (2.0 * R);
    };

    Vec g = Vec::zero(nd);
    for (int k = 0; k < nd; ++k) {
        double acc = 0.0;
        for (int i = 0; i < nd; ++i) {
            // d_k d_i d_i rho from psi derivatives.
            double d3rho =
                2.0 * (2.0 * std::real(std::conj(pe.d2[std::size_t(k)][std::size_t(i)]) *
                                       pe.d1[std::size_t(i)]) +
                       std::real(std::conj(pe.d1[std::size_t(k)]) *
                                 pe.d2[std::size_t(i)][std::size_t(i)]) +
                       std::real(std::conj(pe.psi) * pe.d3[std::size_t(k)][std::size_t(i)]));
            double ddR_ii = ddR_at(i, i);
            double ddR_ki = ddR_at(k, i);
            double d3R = (d3rho - 4.0 * dR[std::size_t(i)] * ddR_ki) / (2.0 * R) -
                         ddR_ii * dR[std::size_t(k)] / R;
            // d_k of (-1/2m_i * ddR_ii / R)
            acc += (d3R * R - ddR_ii * dR[std::size_t(k)]) /
                   (2.0 * ev.mass()[std::size_t(i)] * R * R);
        }
        g[k] = -acc;
    }
    return g;
}

/// Residual of the second-order law m qdd = -grad(V + Q) along a guidance
/// trajectory: acceleration by centered differences on a uniform resample,
/// force gradients analytic. Node-flagged samples are excluded.
struct NewtonResidual {
    std::vector<double> times;
    std::vector<double> residual;  ///< |m qdd + grad(V+Q)| per interior sample
    double force_scale = 0.0;      ///< max |grad(V+Q)| over the samples
    double max_relative = 0.0;     ///< max residual / force_scale
    std::size_t excluded = 0;      ///< samples skipped due to node flags
};

inline NewtonResidual newton_residual(const Evolution& ev, const PotentialSpec& potential,
                                      const Vec& q0, double t0, double t1, int nsamples,
                                      double tol = 1e-10) {
    require(nsamples >= 5, Errc::invalid_argument, "need at least 5 samples");
    IntegrateOptions opt;
    opt.tol = tol;
    opt.sample_times.resize(std::size_t(nsamples));
    const double dt = (t1 - t0) / double(nsamples - 1);
    for (int i = 0; i < nsamples; ++i)
        opt.sample_times[std::size_t(i)] = t0 + dt * double(i);

    Trajectory traj = integrate_trajectory(ev, q0, t0, t1, opt);
    // Collect the uniform samples (first point is t0 itself).
    std::vector<TrajectoryPoint> s;
    s.reserve(std::size_t(nsamples));
    for (const TrajectoryPoint& p : traj.points) {
        double u = (p.t - t0) / dt;
        if (std::abs(u - std::round(u)) < 1e-6) s.push_back(p);
    }
    require(s.size() == std::size_t(nsamples), Errc::invalid_argument,
            "uniform resample failed");

    NewtonResidual out;
    const int nd = ev.dim();
    for (std::size_t j = 1; j + 1 < s.size(); ++j) {
        if (s[j - 1].flags || s[j].flags || s[j + 1].flags) {
            out.excluded++;
            continue;
        }
        Vec force = grad_quantum_potential(ev, s[j].q, s[j].t);
        Vec vgrad = potential.gradient(s[j].q);
        double rnorm = 0.0, fnorm = 0.0;
        for (int i = 0; i < nd; ++i) {
            double qdd = (s[j + 1].q[i] - 2.0 * s[j].q[i] + s[j - 1].q[i]) / (dt * dt);
            double f = force[i] + vgrad[i];
            double r = ev.mass()[std::size_t(i)] * qdd + f;
            rnorm += r * r;
            fnorm += f * f;
        }
        out.times.push_back(s[j].t);
        out.residual.push_back(std::sqrt(rnorm));
        out.force_scale = std::max(out.force_scale, std::sqrt(fnorm));
    }
    double floor = std::max(out.force_scale, 1e-12);
    for (double r : out.residual)
        out.max_relative = std::max(out.max_relative, r / floor);
    return out;
}

} // namespace pilotwave
