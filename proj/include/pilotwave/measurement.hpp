// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/coupling.hpp"
#include "pilotwave/ensemble.hpp"
#include "pilotwave/guidance.hpp"
#include "pilotwave/rng.hpp"

namespace pilotwave {

/// Parameters of an impulsive pointer coupling H = a omega p_y.
struct CouplingSpec {
    enum class PointerDist {
        equilibrium, ///< pointer coordinate drawn from |g0|^2
        narrow,      ///< uniform over [center - w/2, center + w/2), w << sigma
    };

    double strength = 1.0; ///< a
    double tau = 1.0;      ///< interaction window
    GaussianPacket pointer{0.0, 1.0, 0.0};
    Axis pointer_axis;
    PointerDist pointer_dist = PointerDist::equilibrium;
    double narrow_width = 0.0; ///< 0: defaults to sigma * 1e-3 when narrow
    double pointer_mass = std::numeric_limits<double>::infinity();

    double effective_width() const {
        return narrow_width > 0 ? narrow_width : pointer.sigma * 1e-3;
    }

    void validate() const {
        require(strength != 0.0, Errc::invalid_argument, "coupling strength must be nonzero");
        require(tau > 0.0, Errc::invalid_argument, "coupling window must be positive");
        require(pointer.sigma > 0.0, Errc::invalid_argument, "pointer width must be positive");
        require(pointer.momentum == 0.0, Errc::invalid_argument,
                "pointer packet must start at rest");
        if (pointer_dist == PointerDist::narrow)
            require(effective_width() <= pointer.sigma / 100.0, Errc::invalid_argument,
                    "narrow pointer distribution must be at most sigma/100 wide");
    }

    /// Draw the initial pointer coordinate for ensemble member i.
    double draw_pointer(std::uint64_t seed, std::size_t member) const {
        RandomStream rs(seed, kStreamPointer + member);
        if (pointer_dist == PointerDist::narrow) {
            double w = effective_width();
            return pointer.center + w * (rs.next_double() - 0.5);
        }
        return pointer.center + pointer.sigma * rs.next_normal();
    }
};

/// Result of a conventional (pointer-basis) measurement run.
struct MeasurementRecord {
    std::vector<double> outcome_value; ///< omega_n per branch
    std::vector<std::pair<double, double>> windows;
    OutcomeFractions fractions;
    EnsembleState joint; ///< (x, y) configurations at the end of the run
    double min_gap = 0.0;
    double tau = 0.0;
};

/// Couple a discrete-spectrum system observable to the pointer for one
/// impulsive window and read the outcome windows. `system_points` carries the
/// system configurations (1-D); pointer coordinates are drawn per member from
/// the spec's pointer distribution. Branch pointer packets must separate
/// cleanly: a |d omega|_min tau > 6 sigma, else BranchOverlap.
/// After the window the joint wave is left free (branch sum) for
/// `post_flight` additional time before the windows are read.
inline MeasurementRecord run_quantum_measurement(const ModeExpansion& system,
                                                 const CouplingSpec& spec,
                                                 const EnsembleState& system_points,
                                                 double post_flight = 0.0,
                                                 const IntegrateOptions& opt = {},
                                                 unsigned workers = 0) {
    spec.validate();
    const std::vector<Mode>& modes = system.modes();
    require(modes.size() >= 2, Errc::invalid_argument, "need at least two branches");

    // Distinct eigenvalues and the minimal gap.
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < modes.size(); ++n)
        for (std::size_t m = n + 1; m < modes.size(); ++m)
            min_gap = std::min(min_gap,
                               std::abs(modes[n].eigenvalue - modes[m].eigenvalue));
    double sep = std::abs(spec.strength) * min_gap * spec.tau;
    require(sep > 6.0 * spec.pointer.sigma, Errc::branch_overlap,
            "branch pointer packets would not separate (a d_omega tau <= 6 sigma)");

    CouplingEvolution coupling(system, spec.pointer, spec.pointer_axis, spec.strength,
                               spec.tau);

    // Assemble the joint ensemble with per-member pointer draws.
    EnsembleState joint;
    joint.seed = system_points.seed;
    joint.time = 0.0;
    joint.points.resize(system_points.size());
    joint.flags = system_points.flags;
    for (std::size_t i = 0; i < system_points.size(); ++i) {
        double y = spec.draw_pointer(system_points.seed, i);
        joint.points[i] = Vec::of(system_points.points[i][0], y);
    }

    evolve_ensemble(joint, coupling, spec.tau, opt, workers);

    if (post_flight > 0.0) {
        std::vector<GaussianPacket> released(modes.size());
        for (std::size_t n = 0; n < modes.size(); ++n) {
            released[n] = spec.pointer;
            released[n].center =
                spec.pointer.center + spec.strength * modes[n].eigenvalue * spec.tau;
        }
        BranchSumEvolution after(system, released, spec.pointer_axis, spec.pointer_mass,
                                 spec.tau);
        evolve_ensemble(joint, after, spec.tau + post_flight, opt, workers);
    }

    MeasurementRecord rec;
    rec.tau = spec.tau;
    rec.min_gap = sep;
    for (const Mode& m : modes) rec.outcome_value.push_back(m.eigenvalue);
    // Disjoint windows centered on the displaced pointer packets.
    double half = 0.5 * sep;
    for (const Mode& m : modes) {
        double c = spec.pointer.center + spec.strength * m.eigenvalue * spec.tau;
        rec.windows.emplace_back(c - half, c + half);
    }
    rec.fractions = outcome_fractions(joint, 1, rec.windows);
    rec.joint = std::move(joint);
    return rec;
}

/// Result of one ideal subquantum position measurement.
struct SubquantumRecord {
    double pointer_start = 0.0;   ///< drawn nonequilibrium pointer coordinate
    double pointer_reading = 0.0; ///< pointer coordinate after the window
    double estimate = 0.0;        ///< inferred system position
    double truth = 0.0;           ///< actual system position
    double error = 0.0;           ///< |estimate - truth|
    double error_bound = 0.0;     ///< w/(a tau)
    double fidelity = 0.0;        ///< |<psi|psi'>|^2 against the pre-probe wave
    double disturbance = 0.0;     ///< 1 - fidelity
    WaveField conditioned;        ///< normalized post-probe system wave
};

/// Ideal subquantum measurement of the system position: couple omega = x to a
/// pointer prepared in a narrow nonequilibrium distribution, read it, and
/// condition the system wave on the actual pointer coordinate. The system
/// configuration does not move during the window; the estimate lands within
/// w/(a tau) of the true position while the conditional wave is disturbed
/// only to the extent that g0(y - a x tau) varies over the support of psi.
inline SubquantumRecord run_subquantum_measurement(const Evolution& system, double system_time,
                                                   double x_actual, const CouplingSpec& spec,
                                                   std::uint64_t seed,
                                                   std::size_t member = 0) {
    spec.validate();
    require(spec.pointer_dist == CouplingSpec::PointerDist::narrow, Errc::invalid_argument,
            "subquantum probing needs the narrow nonequilibrium pointer");
    require(system.dim() == 1, Errc::invalid_argument, "probed system must be 1-D");

    SubquantumRecord rec;
    rec.pointer_start = spec.draw_pointer(seed, member);
    // Exact advection: x frozen, pointer moves at a * x_actual.
    rec.truth = x_actual;
    rec.pointer_reading = rec.pointer_start + spec.strength * x_actual * spec.tau;
    rec.estimate = (rec.pointer_reading - spec.pointer.center) / (spec.strength * spec.tau);
    rec.error = std::abs(rec.estimate - rec.truth);
    rec.error_bound = spec.effective_width() / (std::abs(spec.strength) * spec.tau);

    // Condition the system wave on the actual pointer coordinate.
    WaveField pre = system.field_at(system_time);
    WaveField post = pre;
    const Grid& g = pre.grid();
    for (std::size_t j = 0; j < g.size(); ++j) {
        double x = g.coord(0, j);
        GaussianPacket gx = spec.pointer;
        gx.center = spec.pointer.center + spec.strength * x * spec.tau;
        post[j] *= gx.factor(rec.pointer_reading, 0)[0];
    }
    post = post.normalized();
    cplx ov = inner_product(pre.normalized(), post);
    rec.fidelity = std::norm(ov);
    rec.disturbance = 1.0 - rec.fidelity;
    rec.conditioned = std::move(post);
    return rec;
}

/// One probe of a tracked trajectory.
struct TrackPoint {
    double t = 0.0;
    double estimate = 0.0;
    double actual = 0.0;      ///< probed trajectory position
    double unperturbed = 0.0; ///< reference trajectory without any probes
    double fidelity = 0.0;    ///< conditional-wave fidelity at this probe
};

struct TrackRecord {
    std::vector<TrackPoint> probes;
    double rms_error = 0.0;      ///< rms(estimate - actual)
    double max_backaction = 0.0; ///< max |actual - unperturbed|
};

/// Monitor a guided trajectory with repeated ideal subquantum position
/// probes. Between probes the system evolves as the (conditioned) eigenmode
/// expansion; at each probe the wave is conditioned on the actual pointer
/// reading and re-expanded. The reference trajectory integrates the same
/// initial state without any probes.
inline TrackRecord track_trajectory(const ModeExpansion& initial, double x0,
                                    const std::vector<double>& probe_times,
                                    const CouplingSpec& spec, std::uint64_t seed,
                                    const IntegrateOptions& opt = {}) {
    spec.validate();
    require(!probe_times.empty(), Errc::invalid_argument, "need at least one probe");
    require(initial.grid().ndim() == 1, Errc::invalid_argument, "tracked system must be 1-D");

    TrackRecord rec;
    // Reference: no probes at all.
    EigenmodeEvolution ref_ev(initial);
    std::vector<double> ref_at(probe_times.size());
    {
        IntegrateOptions o = opt;
        o.sample_times = probe_times;
        Trajectory tr = integrate_trajectory(ref_ev, Vec::of(x0), 0.0, probe_times.back(), o);
        std::size_t k = 0;
        for (const TrajectoryPoint& p : tr.points) {
            if (k < probe_times.size() && std::abs(p.t - probe_times[k]) < 1e-9)
                ref_at[k++] = p.q[0];
        }
        require(k == probe_times.size(), Errc::invalid_argument, "reference resample failed");
    }

    ModeExpansion current = initial;
    double x = x0;
    double t_base = 0.0; // expansion coefficients are a snapshot at this time
    double acc = 0.0;
    for (std::size_t k = 0; k < probe_times.size(); ++k) {
        double t_probe = probe_times[k];
        EigenmodeEvolution ev(current);
        if (t_probe > t_base + 1e-15) {
            Trajectory tr = integrate_trajectory(ev, Vec::of(x), 0.0, t_probe - t_base, opt);
            x = tr.back().q[0];
        }
        SubquantumRecord sub =
            run_subquantum_measurement(ev, t_probe - t_base, x, spec, seed, k);
        TrackPoint tp;
        tp.t = t_probe;
        tp.estimate = sub.estimate;
        tp.actual = x;
        tp.unperturbed = ref_at[k];
        tp.fidelity = sub.fidelity;
        rec.probes.push_back(tp);
        acc += (sub.estimate - x) * (sub.estimate - x);
        rec.max_backaction = std::max(rec.max_backaction, std::abs(x - ref_at[k]));

        // Re-expand the conditioned wave for the next leg.
        ModeExpansion next = ModeExpansion::project_box(sub.conditioned, 1e-9);
        current = next.normalized();
        t_base = t_probe;
    }
    rec.rms_error = std::sqrt(acc / double(rec.probes.size()));
    return rec;
}

/// Verdict of a branch-occupancy probe.
struct OccupancyRecord {
    bool occupied = false;
    double reading = 0.0;        ///< final pointer coordinate
    double threshold = 0.0;      ///< decision threshold on the pointer axis
    double margin_sigmas = 0.0;  ///< |reading - threshold| / sigma
    double indicator_value = 0.0;///< smoothed indicator at the actual position
};

/// Ask "is the configuration inside [lo, hi]?" without touching it: couple
/// the smoothed window indicator (shoulder width 2 dx) to an equilibrium
/// pointer strongly enough that occupied and empty verdicts cannot be
/// confused (a tau well beyond the pointer spread).
inline OccupancyRecord occupancy_probe(const std::shared_ptr<const Evolution>& system,
                                       double system_time, double x_actual, double lo,
                                       double hi, const CouplingSpec& spec,
                                       std::uint64_t seed, std::size_t member = 0) {
    spec.validate();
    require(system->dim() == 1, Errc::invalid_argument, "probed system must be 1-D");
    double smooth = 2.0 * system->grid().axis(0).spacing();
    ScalarObservable chi = ScalarObservable::smoothed_indicator(lo, hi, smooth);
    double shift = std::abs(spec.strength) * spec.tau;
    require(shift > 8.0 * spec.pointer.sigma, Errc::branch_overlap,
            "occupancy verdicts need a tau > 8 sigma");
    // The advection handle checks pointer overflow on construction.
    AdvectionEvolution probe(system, system_time, chi, spec.pointer, spec.pointer_axis,
                             spec.strength, spec.tau);

    OccupancyRecord rec;
    rec.indicator_value = chi.value(x_actual);
    double y0 = spec.draw_pointer(seed, member);
    rec.reading = y0 + spec.strength * rec.indicator_value * spec.tau;
    rec.threshold = spec.pointer.center + 0.5 * spec.strength * spec.tau;
    rec.occupied = spec.strength > 0 ? rec.reading > rec.threshold
                                     : rec.reading < rec.threshold;
    rec.margin_sigmas = std::abs(rec.reading - rec.threshold) / spec.pointer.sigma;
    return rec;
}

} // namespace pilotwave
