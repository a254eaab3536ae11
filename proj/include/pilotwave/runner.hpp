// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pilotwave/common.hpp"
#include "pilotwave/coupling.hpp"
#include "pilotwave/ensemble.hpp"
#include "pilotwave/evolution.hpp"
#include "pilotwave/guidance.hpp"
#include "pilotwave/measurement.hpp"
#include "pilotwave/scenario.hpp"
#include "pilotwave/snapshot.hpp"
#include "pilotwave/splitstep.hpp"

namespace pilotwave {

inline constexpr char kLibraryVersion[] = "0.1.0";

struct RunOptions {
    std::string out_dir = ".";
    bool seed_overridden = false;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    bool quiet = false;
};

/// One built-in assertion: `value` against `bound` (direction is encoded in
/// `pass`, the manifest keeps both numbers for inspection).
struct RunCheck {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double bound = 0.0;
};

struct RunReport {
    std::string scenario;
    ExperimentKind experiment = ExperimentKind::evolve;
    std::uint64_t seed = 0;
    std::vector<RunCheck> checks;
    std::vector<std::string> outputs; ///< file names relative to the output dir
    double wall_seconds = 0.0;

    bool ok() const {
        for (const RunCheck& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

/// Shortest round-trip decimal form; locale-independent, so identical seeds
/// give byte-identical CSVs on any host.
inline std::string fmt(double v) {
    std::array<char, 32> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(unsigned v) { return std::to_string(v); }

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary) {
        require(out_.good(), Errc::invalid_argument,
                "cannot open output file `" + path.string() + "`");
        write_row(header);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void check(RunReport& rep, const std::string& name, bool pass, double value,
                  double bound) {
    rep.checks.push_back(RunCheck{name, pass, value, bound});
}

inline long window_of(double y, const std::vector<std::pair<double, double>>& windows) {
    for (std::size_t w = 0; w < windows.size(); ++w)
        if (y >= windows[w].first && y < windows[w].second) return long(w);
    return -1;
}

inline EnsembleState sample_state(const WaveField& field, long n, std::uint64_t seed) {
    return sample_from_density(field.density(), field.grid(), std::size_t(n), seed);
}

inline std::vector<double> uniform_times(double t0, double t1, long n) {
    std::vector<double> out;
    for (long k = 1; k < n; ++k) out.push_back(t0 + (t1 - t0) * double(k) / double(n));
    out.push_back(t1);
    return out;
}

/// Ensemble CSV rows for the current state of `ens`. `pointer_column` names
/// the second coordinate "y" (measurement pointer) instead of "q2".
inline void write_ensemble_rows(CsvFile& csv, const EnsembleState& ens) {
    int nd = ens.points.empty() ? 0 : ens.points[0].dim;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        std::vector<std::string> row{fmt(i), fmt(ens.time)};
        for (int d = 0; d < nd; ++d) row.push_back(fmt(ens.points[i][d]));
        row.push_back(fmt(ens.flags[i]));
        csv.write_row(row);
    }
}

inline std::vector<std::string> ensemble_header(int ndim, bool pointer_column) {
    std::vector<std::string> h{"member_id", "t", "q1"};
    if (ndim == 2) h.push_back(pointer_column ? "y" : "q2");
    h.push_back("flag");
    return h;
}

/// Per-axis norm, mean and variance of a gridded density.
struct FieldMoments {
    double norm = 0.0;
    std::array<double, 3> mean{0, 0, 0};
    std::array<double, 3> var{0, 0, 0};
};

inline FieldMoments field_moments(const WaveField& field) {
    const Grid& g = field.grid();
    std::vector<double> dens = field.density();
    FieldMoments m;
    double dv = g.cell_volume();
    std::array<double, 3> sx{0, 0, 0}, sxx{0, 0, 0};
    for (std::size_t f = 0; f < dens.size(); ++f) {
        auto idx = g.unflatten(f);
        m.norm += dens[f] * dv;
        for (int d = 0; d < g.ndim(); ++d) {
            double x = g.coord(d, idx[std::size_t(d)]);
            sx[std::size_t(d)] += dens[f] * x * dv;
            sxx[std::size_t(d)] += dens[f] * x * x * dv;
        }
    }
    for (int d = 0; d < g.ndim(); ++d) {
        m.mean[std::size_t(d)] = sx[std::size_t(d)] / m.norm;
        m.var[std::size_t(d)] =
            sxx[std::size_t(d)] / m.norm - m.mean[std::size_t(d)] * m.mean[std::size_t(d)];
    }
    return m;
}

// ---------------------------------------------------------------------------
// Experiment bodies. Each writes its CSVs/snapshots under `out` and appends
// pass/fail checks to the report.

inline void run_evolve(const Scenario& s, std::uint64_t seed, const RunOptions&,
                       const std::filesystem::path& out, RunReport& rep) {
    (void)seed;
    ModeExpansion ex = make_expansion(s);
    WaveField psi0 = ex.synthesize(0.0);
    SplitStepEvolution ev(std::move(psi0), s.potential, s.evolve.dt);

    std::vector<double> times = s.evolve.snapshot_times;
    times.push_back(0.0);
    times.push_back(s.evolve.t_final);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    CsvFile moments(out / "moments.csv", {"t", "norm", "mean_q1", "var_q1"});
    std::size_t snap = 0;
    std::string last_snapshot;
    WaveField last_written;
    for (double t : times) {
        WaveField f = ev.field_at(t);
        FieldMoments m = field_moments(f);
        moments.write_row({fmt(t), fmt(m.norm), fmt(m.mean[0]), fmt(m.var[0])});
        bool requested = false;
        for (double ts : s.evolve.snapshot_times)
            if (ts == t) requested = true;
        if (requested) {
            char name[32];
            std::snprintf(name, sizeof name, "snapshot_%02zu.pwf", snap++);
            write_snapshot(f, (out / name).string());
            rep.outputs.push_back(name);
            last_snapshot = (out / name).string();
            last_written = f;
        }
    }
    rep.outputs.push_back("moments.csv");

    WaveField fin = ev.field_at(s.evolve.t_final);
    check(rep, "unitary_norm_drift", std::abs(fin.norm_squared() - 1.0) < 1e-9,
          std::abs(fin.norm_squared() - 1.0), 1e-9);
    if (!last_snapshot.empty()) {
        // Snapshots carry raw binary doubles, so the round trip is bitwise.
        WaveField back = read_snapshot(last_snapshot);
        double dist = l2_distance(back, last_written);
        check(rep, "snapshot_roundtrip", dist == 0.0, dist, 0.0);
    }
}

inline void run_trajectories(const Scenario& s, std::uint64_t seed, const RunOptions&,
                             const std::filesystem::path& out, RunReport& rep) {
    const Scenario::TrajectoryParams& p = s.trajectories;
    ModeExpansion ex = make_expansion(s);
    EigenmodeEvolution ev(ex);
    const int nd = ev.dim();

    std::vector<Vec> starts;
    if (!p.starts.empty()) {
        require(nd == 1, Errc::validation_error,
                "explicit `trajectories.starts` need a 1-D grid");
        for (double x : p.starts) starts.push_back(Vec::of(x));
    } else {
        EnsembleState ens = sample_state(ex.synthesize(0.0), p.n_starts, seed);
        starts = ens.points;
    }

    IntegrateOptions opt;
    opt.tol = p.tol;
    opt.sample_times = uniform_times(0.0, p.t_final, p.samples);

    // All trajectories share the sample grid so ordering can be compared
    // column by column.
    std::vector<std::vector<double>> q1_at(starts.size());
    std::size_t failed = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03zu.csv", i);
        std::vector<std::string> header{"t", "q1"};
        if (nd == 2) header.push_back("q2");
        header.push_back("flag");
        CsvFile csv(out / name, header);
        try {
            Trajectory tr = integrate_trajectory(ev, starts[i], 0.0, p.t_final, opt);
            for (const TrajectoryPoint& pt : tr.points) {
                std::vector<std::string> row{fmt(pt.t), fmt(pt.q[0])};
                if (nd == 2) row.push_back(fmt(pt.q[1]));
                row.push_back(fmt(pt.flags));
                csv.write_row(row);
                q1_at[i].push_back(pt.q[0]);
            }
        } catch (const Error&) {
            ++failed;
        }
        rep.outputs.push_back(name);
    }
    check(rep, "all_trajectories_finished", failed == 0, double(failed), 0.0);

    if (nd == 1 && starts.size() >= 2 && failed == 0) {
        // Strict order preservation at every shared sample time.
        std::vector<std::size_t> order(starts.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return starts[a][0] < starts[b][0]; });
        std::size_t violations = 0;
        std::size_t rows = q1_at[0].size();
        for (std::size_t i = 0; i < starts.size() && !violations; ++i)
            if (q1_at[i].size() != rows) ++violations; // sample grids must agree
        for (std::size_t r = 0; r < rows && !violations; ++r)
            for (std::size_t i = 1; i < order.size(); ++i)
                if (!(q1_at[order[i - 1]][r] < q1_at[order[i]][r])) ++violations;
        check(rep, "non_crossing", violations == 0, double(violations), 0.0);
    }

    if (p.newton_samples > 0) {
        NewtonResidual nr = newton_residual(ev, s.potential, starts[0], 0.0, p.t_final,
                                            int(p.newton_samples));
        check(rep, "newton_residual_max_relative", nr.max_relative < p.newton_bound,
              nr.max_relative, p.newton_bound);
    }
}

inline void run_relax(const Scenario& s, std::uint64_t seed, const RunOptions& o,
                      const std::filesystem::path& out, RunReport& rep) {
    const Scenario::RelaxParams& p = s.relax;
    ModeExpansion ex = make_expansion(s);
    EigenmodeEvolution ev(ex);

    WaveField init_density_field = [&] {
        if (p.initial == "equilibrium") return ex.synthesize(0.0);
        std::vector<Mode> one(1);
        one[0].index = {int(p.initial_mode[0]), int(p.initial_mode[1]), 0};
        one[0].coeff = 1.0;
        ModeExpansion ground = ModeExpansion::box(Grid(s.axes), s.mass, std::move(one));
        return ground.synthesize(0.0);
    }();

    EnsembleState ens = sample_state(init_density_field, p.members, seed);
    IntegrateOptions opt;
    opt.tol = p.tol;

    CsvFile hs(out / "h_series.csv", {"t", "H", "n_effective"});
    std::vector<double> h_at, tv_at;
    for (long k = 0; k <= p.checkpoints; ++k) {
        double t = p.t_final * double(k) / double(p.checkpoints);
        if (k > 0) evolve_ensemble(ens, ev, t, opt, o.workers);
        CoarseGrain cg = coarse_grain(ens, ev.field_at(t), p.cells);
        double h = h_function(cg);
        h_at.push_back(h);
        tv_at.push_back(tv_distance(cg));
        hs.write_row({fmt(t), fmt(h), fmt(cg.counted)});
    }
    rep.outputs.push_back("h_series.csv");

    CsvFile fin(out / "ensemble_final.csv", ensemble_header(ev.dim(), false));
    write_ensemble_rows(fin, ens);
    rep.outputs.push_back("ensemble_final.csv");

    std::size_t stuck = 0;
    for (unsigned f : ens.flags)
        if (f & member_stuck) ++stuck;
    check(rep, "stuck_member_fraction", double(stuck) <= 0.02 * double(ens.size()),
          double(stuck) / double(ens.size()), 0.02);

    if (p.initial == "equilibrium") {
        double worst = *std::max_element(tv_at.begin(), tv_at.end());
        check(rep, "equivariance_tv_max", worst < p.tv_bound, worst, p.tv_bound);
    } else {
        double h0 = h_at.front();
        double worst_rise = 0.0;
        for (std::size_t k = 1; k < h_at.size(); ++k)
            worst_rise = std::max(worst_rise, h_at[k] - h_at[k - 1]);
        check(rep, "h_monotone_within_band", worst_rise <= p.h_band * h0, worst_rise,
              p.h_band * h0);
        check(rep, "h_final_decay", h_at.back() <= p.h_final_ratio * h0, h_at.back(),
              p.h_final_ratio * h0);
    }
}

inline CouplingSpec coupling_from(const Scenario::MeasurementParams& m, bool narrow) {
    CouplingSpec cs;
    cs.strength = m.strength;
    cs.tau = m.tau;
    cs.pointer = GaussianPacket{m.pointer_center, m.sigma, 0.0};
    cs.pointer_axis = m.pointer_axis;
    if (narrow) {
        cs.pointer_dist = CouplingSpec::PointerDist::narrow;
        cs.narrow_width = m.narrow_width;
    }
    return cs;
}

inline void write_measurement_rows(CsvFile& csv, const MeasurementRecord& rec,
                                   const CouplingSpec& cs,
                                   const std::vector<std::size_t>* ids = nullptr) {
    for (std::size_t i = 0; i < rec.joint.size(); ++i) {
        double y = rec.joint.points[i][1];
        long w = window_of(y, rec.windows);
        double inferred = (y - cs.pointer.center) / (cs.strength * cs.tau);
        std::size_t run_id = ids ? (*ids)[i] : i;
        csv.write_row({fmt(run_id), fmt(w), fmt(y), fmt(inferred), fmt(0.0)});
    }
}

inline void run_born_branches(const Scenario& s, std::uint64_t seed, const RunOptions& o,
                              const std::filesystem::path& out, RunReport& rep) {
    const Scenario::MeasurementParams& m = s.measurement;
    ModeExpansion ex = make_expansion(s);
    CouplingSpec cs = coupling_from(m, false);
    IntegrateOptions opt;
    opt.tol = m.tol;

    EnsembleState sys = sample_state(ex.synthesize(0.0), m.members, seed);
    MeasurementRecord rec =
        run_quantum_measurement(ex, cs, sys, m.post_flight, opt, o.workers);

    double norm2 = ex.coeff_norm_squared();
    CsvFile csv(out / "measurement.csv",
                {"run_id", "outcome_index", "pointer_reading", "inferred_value",
                 "wave_disturbance"});

    if (m.prepare == "equilibrium") {
        write_measurement_rows(csv, rec, cs);
        check(rep, "all_members_assigned", rec.fractions.unassigned == 0.0,
              rec.fractions.unassigned, 0.0);
        for (std::size_t n = 0; n < rec.fractions.fraction.size(); ++n) {
            double w = std::norm(ex.modes()[n].coeff) / norm2;
            double sigma = std::sqrt(w * (1.0 - w) / double(rec.fractions.total));
            double dev = std::abs(rec.fractions.fraction[n] - w);
            check(rep, "born_fraction_" + std::to_string(n), dev <= 3.0 * sigma, dev,
                  3.0 * sigma);
        }
    } else {
        // Nonequilibrium preparation: keep the members that landed in the
        // chosen branch and rerun the same coupling from their initial joint
        // configurations. That ensemble starts entirely inside one branch's
        // basin, so the outcome statistics collapse to that branch.
        std::size_t branch = std::size_t(m.branch);
        require(branch < rec.windows.size(), Errc::validation_error,
                "key `measurement.branch` is out of range");
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < rec.joint.size(); ++i) {
            if (rec.joint.flags[i] & member_stuck) continue;
            if (window_of(rec.joint.points[i][1], rec.windows) == long(branch))
                keep.push_back(i);
        }
        require(!keep.empty(), Errc::bad_density, "no members landed in the chosen branch");

        EnsembleState replay;
        replay.seed = seed;
        replay.time = 0.0;
        for (std::size_t i : keep) {
            double y0 = cs.draw_pointer(seed, i);
            replay.points.push_back(Vec::of(sys.points[i][0], y0));
            replay.flags.push_back(0);
        }
        CouplingEvolution coupling(ex, cs.pointer, cs.pointer_axis, cs.strength, cs.tau);
        evolve_ensemble(replay, coupling, cs.tau, opt, o.workers);
        if (m.post_flight > 0.0) {
            std::vector<GaussianPacket> released(ex.modes().size(), cs.pointer);
            for (std::size_t n = 0; n < released.size(); ++n)
                released[n].center += cs.strength * ex.modes()[n].eigenvalue * cs.tau;
            BranchSumEvolution after(ex, released, cs.pointer_axis, cs.pointer_mass, cs.tau);
            evolve_ensemble(replay, after, cs.tau + m.post_flight, opt, o.workers);
        }
        OutcomeFractions frac = outcome_fractions(replay, 1, rec.windows);

        MeasurementRecord rrec = rec;
        rrec.joint = replay;
        write_measurement_rows(csv, rrec, cs, &keep);

        double born_weight = std::norm(ex.modes()[branch].coeff) / norm2;
        check(rep, "branch_fraction", frac.fraction[branch] >= 0.99,
              frac.fraction[branch], 0.99);
        check(rep, "violates_born_weight",
              std::abs(frac.fraction[branch] - born_weight) > 0.25,
              std::abs(frac.fraction[branch] - born_weight), 0.25);
    }
    rep.outputs.push_back("measurement.csv");

    CsvFile ens(out / "ensemble.csv", ensemble_header(2, true));
    write_ensemble_rows(ens, rec.joint);
    rep.outputs.push_back("ensemble.csv");
}

inline void run_momentum_split(const Scenario& s, std::uint64_t seed, const RunOptions& o,
                               const std::filesystem::path& out, RunReport& rep) {
    const Scenario::MeasurementParams& m = s.measurement;
    ModeExpansion ex = make_expansion(s);
    CouplingSpec cs = coupling_from(m, false);
    IntegrateOptions opt;
    opt.tol = m.tol;

    EnsembleState sys = sample_state(ex.synthesize(0.0), m.members, seed);
    MeasurementRecord rec =
        run_quantum_measurement(ex, cs, sys, m.slope_t1, opt, o.workers);

    CsvFile ens(out / "ensemble.csv", ensemble_header(2, true));
    write_ensemble_rows(ens, rec.joint);
    std::vector<double> x1(rec.joint.size());
    for (std::size_t i = 0; i < rec.joint.size(); ++i) x1[i] = rec.joint.points[i][0];

    std::vector<GaussianPacket> released(ex.modes().size(), cs.pointer);
    for (std::size_t n = 0; n < released.size(); ++n)
        released[n].center += cs.strength * ex.modes()[n].eigenvalue * cs.tau;
    BranchSumEvolution after(ex, released, cs.pointer_axis, cs.pointer_mass, cs.tau);
    EnsembleState joint = rec.joint;
    evolve_ensemble(joint, after, cs.tau + m.slope_t2, opt, o.workers);
    write_ensemble_rows(ens, joint);
    rep.outputs.push_back("ensemble.csv");

    CsvFile csv(out / "measurement.csv",
                {"run_id", "outcome_index", "pointer_reading", "inferred_value",
                 "wave_disturbance"});
    write_measurement_rows(csv, rec, cs);
    rep.outputs.push_back("measurement.csv");

    double dt = m.slope_t2 - m.slope_t1;
    double worst_rel = 0.0;
    std::size_t unassigned = 0, stuck = 0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        if (joint.flags[i] & member_stuck) {
            ++stuck;
            continue;
        }
        long w = window_of(joint.points[i][1], rec.windows);
        if (w < 0) {
            ++unassigned;
            continue;
        }
        double slope = (joint.points[i][0] - x1[i]) / dt;
        double expect = rec.outcome_value[std::size_t(w)] / s.mass[0];
        worst_rel = std::max(worst_rel, std::abs(slope - expect) / std::abs(expect));
    }
    check(rep, "no_stuck_members", stuck == 0, double(stuck), 0.0);
    check(rep, "all_members_assigned", unassigned == 0, double(unassigned), 0.0);
    check(rep, "slope_max_relative_error", worst_rel < 1e-3, worst_rel, 1e-3);
    double norm2 = ex.coeff_norm_squared();
    for (std::size_t n = 0; n < rec.fractions.fraction.size(); ++n) {
        double w = std::norm(ex.modes()[n].coeff) / norm2;
        double sigma = std::sqrt(w * (1.0 - w) / double(rec.fractions.total));
        double dev = std::abs(rec.fractions.fraction[n] - w);
        check(rep, "branch_fraction_" + std::to_string(n), dev <= 3.0 * sigma, dev,
              3.0 * sigma);
    }
}

inline void run_kinetic_energy_pointer(const Scenario& s, std::uint64_t seed,
                                       const RunOptions& o,
                                       const std::filesystem::path& out, RunReport& rep) {
    const Scenario::MeasurementParams& m = s.measurement;
    ModeExpansion ex = make_expansion(s);
    require(ex.modes().size() >= 2, Errc::validation_error,
            "kinetic-energy-pointer needs a superposition");
    double energy = ex.modes()[0].energy;
    for (const Mode& md : ex.modes())
        require(std::abs(md.energy - energy) < 1e-12, Errc::validation_error,
                "kinetic-energy-pointer needs degenerate mode energies");

    // The bare state: velocity vanishes identically away from nodes.
    EigenmodeEvolution bare(ex);
    const Axis& ax = s.axes[0];
    double ceiling = bare.density_ceiling(0.0);
    double vmax = 0.0;
    long collected = 0;
    for (long j = 0; j < 8 * m.velocity_samples && collected < m.velocity_samples; ++j) {
        double x = ax.lo + ax.length() * (double(j) + 0.5) / double(8 * m.velocity_samples);
        try {
            double rho = 0.0;
            Vec v = bare.velocity(Vec::of(x), 0.0, &rho);
            if (rho < 1e-3 * ceiling) continue; // node neighborhood
            vmax = std::max(vmax, std::abs(v[0]));
            ++collected;
        } catch (const Error&) {
            continue; // sample landed on a node
        }
    }
    check(rep, "bare_velocity_sample_count", collected == m.velocity_samples,
          double(collected), double(m.velocity_samples));
    check(rep, "bare_velocity_max", vmax < 1e-8, vmax, 1e-8);

    // Degenerate eigenvalues: the branches never separate, so the coupled
    // flow is driven directly (the windowed-outcome reader would refuse it).
    CouplingSpec cs = coupling_from(m, false);
    cs.validate();
    CouplingEvolution coupling(ex, cs.pointer, cs.pointer_axis, cs.strength, cs.tau);
    EnsembleState sys = sample_state(ex.synthesize(0.0), m.members, seed);
    EnsembleState joint;
    joint.seed = seed;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        joint.points.push_back(Vec::of(sys.points[i][0], cs.draw_pointer(seed, i)));
        joint.flags.push_back(0);
    }
    std::vector<Vec> start = joint.points;
    IntegrateOptions opt;
    opt.tol = m.tol;
    evolve_ensemble(joint, coupling, cs.tau, opt, o.workers);

    double expect = cs.strength * energy * cs.tau;
    double worst_pointer = 0.0, worst_particle = 0.0;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        worst_pointer = std::max(worst_pointer,
                                 std::abs(joint.points[i][1] - start[i][1] - expect));
        worst_particle = std::max(worst_particle, std::abs(joint.points[i][0] - start[i][0]));
    }
    check(rep, "pointer_displacement_rel_error", worst_pointer <= 0.01 * std::abs(expect),
          worst_pointer / std::abs(expect), 0.01);
    check(rep, "particle_displacement_max", worst_particle < 1e-6, worst_particle, 1e-6);

    CsvFile csv(out / "measurement.csv",
                {"run_id", "outcome_index", "pointer_reading", "inferred_value",
                 "wave_disturbance"});
    for (std::size_t i = 0; i < joint.size(); ++i) {
        double y = joint.points[i][1];
        double inferred = (y - start[i][1]) / (cs.strength * cs.tau);
        csv.write_row({fmt(i), fmt(long(0)), fmt(y), fmt(inferred), fmt(0.0)});
    }
    rep.outputs.push_back("measurement.csv");

    CsvFile ens(out / "ensemble.csv", ensemble_header(2, true));
    write_ensemble_rows(ens, joint);
    rep.outputs.push_back("ensemble.csv");
}

inline void run_double_slit(const Scenario& s, std::uint64_t seed, const RunOptions& o,
                            const std::filesystem::path& out, RunReport& rep) {
    const Scenario::SlitParams& p = s.slit;
    ModeExpansion slits = make_expansion(s);
    GaussianPacket beam{p.beam_center, p.beam_sigma, p.beam_momentum};
    BranchSumEvolution ev(slits, {beam, beam}, p.beam_axis, s.mass[0], 0.0);

    IntegrateOptions opt;
    opt.tol = p.tol;

    // Equilibrium ensemble through the full two-slit wave.
    WaveField j0 = ev.field_at(0.0);
    EnsembleState ens = sample_state(j0, p.members, seed);
    evolve_ensemble(ens, ev, p.t_screen, opt, o.workers);
    CsvFile screen(out / "screen_ensemble.csv", ensemble_header(2, false));
    write_ensemble_rows(screen, ens);
    rep.outputs.push_back("screen_ensemble.csv");

    // Transverse marginal of the wave at the screen: the beam factor is
    // common to both branches, so it integrates out exactly.
    WaveField marginal(Grid({s.axes[0]}), {s.mass[0], 1.0, 1.0}, p.t_screen);
    const Grid& mg = marginal.grid();
    for (std::size_t j = 0; j < mg.size(); ++j) {
        cplx amp = 0.0;
        for (std::size_t n = 0; n < slits.modes().size(); ++n) {
            const Mode& md = slits.modes()[n];
            amp += md.coeff * slits.packet_family()[std::size_t(md.index[0])].free_factor(
                                  mg.coord(0, j), p.t_screen, s.mass[0], 0)[0];
        }
        marginal[j] = amp;
    }
    EnsembleState transverse;
    transverse.time = p.t_screen;
    transverse.seed = seed;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        transverse.points.push_back(Vec::of(ens.points[i][0]));
        transverse.flags.push_back(ens.flags[i]);
    }
    CoarseGrain cg = coarse_grain(transverse, marginal, {std::size_t(p.cells), 1, 1});
    double tv = tv_distance(cg);
    check(rep, "screen_tv_vs_wave", tv < p.tv_bound, tv, p.tv_bound);

    // Trajectories seeded in the upper aperture, guided by the full wave:
    // none may cross the symmetry axis.
    std::size_t upper = slits.packet_family()[0].center > slits.packet_family()[1].center
                            ? 0
                            : 1;
    std::vector<Mode> one(1);
    one[0].index = {int(upper), 0, 0};
    one[0].coeff = 1.0;
    ModeExpansion upper_only =
        ModeExpansion::packets(Grid({s.axes[0]}), s.mass, slits.packet_family(),
                               std::move(one));
    BranchSumEvolution upper_ev(upper_only, {beam}, p.beam_axis, s.mass[0], 0.0);
    std::uint64_t aperture_seed = seed ^ 0x9e3779b97f4a7c15ull;
    EnsembleState starts = sample_state(upper_ev.field_at(0.0), p.aperture_members,
                                        aperture_seed);

    IntegrateOptions traced = opt;
    traced.sample_times = uniform_times(0.0, p.t_screen, p.samples);
    CsvFile aper(out / "aperture_ensemble.csv", ensemble_header(2, false));
    double min_transverse = std::numeric_limits<double>::infinity();
    std::size_t crossed = 0, failed = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        try {
            Trajectory tr = integrate_trajectory(ev, starts.points[i], 0.0, p.t_screen,
                                                 traced);
            bool below = false;
            for (const TrajectoryPoint& pt : tr.points) {
                aper.write_row({fmt(i), fmt(pt.t), fmt(pt.q[0]), fmt(pt.q[1]),
                                fmt(pt.flags)});
                min_transverse = std::min(min_transverse, pt.q[0]);
                if (pt.q[0] <= 0.0) below = true;
            }
            if (below) ++crossed;
        } catch (const Error&) {
            ++failed;
        }
    }
    rep.outputs.push_back("aperture_ensemble.csv");
    check(rep, "aperture_trajectories_finished", failed == 0, double(failed), 0.0);
    check(rep, "aperture_crossings", crossed == 0, double(crossed), 0.0);
    check(rep, "aperture_min_transverse", min_transverse > 0.0, min_transverse, 0.0);
}

inline void run_two_packet(const Scenario& s, std::uint64_t seed, const RunOptions&,
                           const std::filesystem::path& out, RunReport& rep) {
    const Scenario::TrajectoryParams& p = s.trajectories;
    ModeExpansion ex = make_expansion(s);
    EigenmodeEvolution ev(ex);
    const GaussianPacket& a = ex.packet_family()[0];
    const GaussianPacket& b = ex.packet_family()[1];
    double half_gap = 0.5 * std::abs(a.center - b.center);

    EnsembleState starts = sample_state(ex.synthesize(0.0), p.n_starts, seed);
    IntegrateOptions opt;
    opt.tol = p.tol;
    opt.sample_times = uniform_times(0.0, p.t_final, p.samples);

    // Per-packet single-branch handles for the empty-wave comparison.
    auto solo = [&](std::size_t which) {
        std::vector<Mode> one(1);
        one[0].index = {int(which), 0, 0};
        one[0].coeff = 1.0;
        return EigenmodeEvolution(ModeExpansion::packets(Grid(s.axes), s.mass,
                                                         ex.packet_family(), std::move(one)));
    };
    EigenmodeEvolution only_a = solo(0), only_b = solo(1);

    CsvFile csv(out / "ensemble.csv", ensemble_header(1, false));
    double worst_excursion = 0.0, worst_velocity_gap = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        double x0 = starts.points[i][0];
        const GaussianPacket& home =
            std::abs(x0 - a.center) < std::abs(x0 - b.center) ? a : b;
        const EigenmodeEvolution& occupied =
            std::abs(x0 - a.center) < std::abs(x0 - b.center) ? only_a : only_b;
        Trajectory tr = integrate_trajectory(ev, starts.points[i], 0.0, p.t_final, opt);
        for (const TrajectoryPoint& pt : tr.points) {
            csv.write_row({fmt(i), fmt(pt.t), fmt(pt.q[0]), fmt(pt.flags)});
            worst_excursion = std::max(worst_excursion, std::abs(pt.q[0] - home.center));
            Vec vf = ev.velocity(pt.q, pt.t);
            Vec vs = occupied.velocity(pt.q, pt.t);
            worst_velocity_gap = std::max(worst_velocity_gap, std::abs(vf[0] - vs[0]));
        }
    }
    rep.outputs.push_back("ensemble.csv");
    check(rep, "packet_confinement", worst_excursion < half_gap, worst_excursion, half_gap);
    check(rep, "empty_wave_velocity_gap", worst_velocity_gap <= 1e-8, worst_velocity_gap,
          1e-8);
}

inline void run_subquantum_track(const Scenario& s, std::uint64_t seed, const RunOptions&,
                                 const std::filesystem::path& out, RunReport& rep) {
    const Scenario::MeasurementParams& m = s.measurement;
    require(s.axes[0].boundary == Boundary::box, Errc::validation_error,
            "subquantum tracking needs a box axis");
    // Tracking re-expands the conditioned wave in box modes after every probe,
    // so the state is projected onto that basis up front: reference and probed
    // trajectories then follow the same dynamics.
    ModeExpansion ex =
        ModeExpansion::project_box(make_expansion(s).synthesize(0.0), 1e-9).normalized();
    CouplingSpec cs = coupling_from(m, true);
    IntegrateOptions opt;
    opt.tol = m.tol;

    std::vector<double> probe_times;
    for (long k = 1; k <= m.probes; ++k)
        probe_times.push_back(m.probe_span * double(k) / double(m.probes));

    TrackRecord rec = track_trajectory(ex, m.x0, probe_times, cs, seed, opt);

    CsvFile csv(out / "measurement.csv",
                {"run_id", "outcome_index", "pointer_reading", "inferred_value",
                 "wave_disturbance", "estimate"});
    double bound = cs.effective_width() / (std::abs(cs.strength) * cs.tau);
    double worst_err = 0.0, min_fidelity = 1.0;
    double rms_ref = 0.0;
    for (std::size_t k = 0; k < rec.probes.size(); ++k) {
        const TrackPoint& tp = rec.probes[k];
        double reading = cs.pointer.center + cs.strength * cs.tau * tp.estimate;
        csv.write_row({fmt(k), fmt(long(0)), fmt(reading), fmt(tp.estimate),
                       fmt(1.0 - tp.fidelity), fmt(tp.estimate)});
        worst_err = std::max(worst_err, std::abs(tp.estimate - tp.actual));
        min_fidelity = std::min(min_fidelity, tp.fidelity);
        rms_ref += (tp.estimate - tp.unperturbed) * (tp.estimate - tp.unperturbed);
    }
    rms_ref = std::sqrt(rms_ref / double(rec.probes.size()));
    rep.outputs.push_back("measurement.csv");

    double dx = s.axes[0].spacing();
    check(rep, "probe_error_within_bound", worst_err <= bound, worst_err, bound);
    check(rep, "probe_error_max", worst_err <= 2.0 * dx, worst_err, 2.0 * dx);
    check(rep, "fidelity_min", min_fidelity >= 0.999, min_fidelity, 0.999);
    check(rep, "track_rms_vs_reference", rms_ref < 5.0 * dx, rms_ref, 5.0 * dx);
    check(rep, "max_backaction", rec.max_backaction < 5.0 * dx, rec.max_backaction,
          5.0 * dx);
}

inline void run_occupancy(const Scenario& s, std::uint64_t seed, const RunOptions&,
                          const std::filesystem::path& out, RunReport& rep) {
    const Scenario::MeasurementParams& m = s.measurement;
    ModeExpansion ex = make_expansion(s);
    auto ev = std::make_shared<EigenmodeEvolution>(ex);
    CouplingSpec cs = coupling_from(m, false);

    // Which packet sits inside the probed window?
    const GaussianPacket& a = ex.packet_family()[0];
    const GaussianPacket& b = ex.packet_family()[1];
    bool a_inside = a.center > m.window.first && a.center < m.window.second;
    bool b_inside = b.center > m.window.first && b.center < m.window.second;
    require(a_inside != b_inside, Errc::validation_error,
            "key `measurement.window` must contain exactly one packet");
    const GaussianPacket& inside = a_inside ? a : b;
    const GaussianPacket& outside = a_inside ? b : a;

    CsvFile csv(out / "measurement.csv",
                {"run_id", "outcome_index", "pointer_reading", "inferred_value",
                 "wave_disturbance"});
    std::size_t correct_occupied = 0, correct_empty = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (long r = 0; r < m.repetitions; ++r) {
        RandomStream occ_draw(seed, (std::uint64_t(3) << 32) + std::uint64_t(r));
        RandomStream emp_draw(seed, (std::uint64_t(4) << 32) + std::uint64_t(r));
        double x_in = inside.center + inside.sigma * occ_draw.next_normal();
        double x_out = outside.center + outside.sigma * emp_draw.next_normal();

        OccupancyRecord occ = occupancy_probe(ev, 0.0, x_in, m.window.first,
                                              m.window.second, cs, seed, std::size_t(r));
        OccupancyRecord emp =
            occupancy_probe(ev, 0.0, x_out, m.window.first, m.window.second, cs, seed,
                            std::size_t(m.repetitions + r));
        if (occ.occupied) ++correct_occupied;
        if (!emp.occupied) ++correct_empty;
        min_margin = std::min({min_margin, occ.margin_sigmas, emp.margin_sigmas});
        csv.write_row({fmt(2 * r), fmt(long(occ.occupied ? 1 : 0)), fmt(occ.reading),
                       fmt(occ.indicator_value), fmt(0.0)});
        csv.write_row({fmt(2 * r + 1), fmt(long(emp.occupied ? 1 : 0)), fmt(emp.reading),
                       fmt(emp.indicator_value), fmt(0.0)});
    }
    rep.outputs.push_back("measurement.csv");

    check(rep, "occupied_verdicts", correct_occupied == std::size_t(m.repetitions),
          double(correct_occupied), double(m.repetitions));
    check(rep, "empty_verdicts", correct_empty == std::size_t(m.repetitions),
          double(correct_empty), double(m.repetitions));
    check(rep, "verdict_margin_sigmas", min_margin > 2.0, min_margin, 2.0);
}

} // namespace detail

/// Execute a scenario: write its CSVs, snapshots, and `manifest.json` under
/// `opt.out_dir`, and return the built-in assertion results. All tabular
/// outputs are byte-deterministic for a fixed seed; only the manifest's
/// timing block varies between runs.
inline RunReport run_scenario(const Scenario& s, const RunOptions& opt) {
    namespace fs = std::filesystem;
    auto t_begin = std::chrono::steady_clock::now();

    RunReport rep;
    rep.scenario = s.name;
    rep.experiment = s.experiment;
    rep.seed = opt.seed_overridden ? opt.seed : s.seed;

    fs::path out(opt.out_dir);
    fs::create_directories(out);

    switch (s.experiment) {
    case ExperimentKind::evolve: detail::run_evolve(s, rep.seed, opt, out, rep); break;
    case ExperimentKind::trajectories:
        detail::run_trajectories(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::relax: detail::run_relax(s, rep.seed, opt, out, rep); break;
    case ExperimentKind::born_branches:
        detail::run_born_branches(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::momentum_split:
        detail::run_momentum_split(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::kinetic_energy_pointer:
        detail::run_kinetic_energy_pointer(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::double_slit:
        detail::run_double_slit(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::two_packet:
        detail::run_two_packet(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::subquantum_track:
        detail::run_subquantum_track(s, rep.seed, opt, out, rep);
        break;
    case ExperimentKind::occupancy: detail::run_occupancy(s, rep.seed, opt, out, rep); break;
    }

    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();

    nlohmann::json manifest;
    manifest["scenario"] = rep.scenario;
    manifest["experiment"] = experiment_token(rep.experiment);
    manifest["seed"] = rep.seed;
    manifest["workers"] = opt.workers;
    manifest["versions"] = {{"pilotwave", kLibraryVersion},
                            {"snapshot_format", kSnapshotVersion}};
    nlohmann::json checks = nlohmann::json::array();
    for (const RunCheck& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"value", c.value},
                          {"bound", c.bound}});
    manifest["checks"] = checks;
    manifest["outputs"] = rep.outputs;
    manifest["ok"] = rep.ok();
    manifest["timings"] = {{"wall_seconds", rep.wall_seconds}};

    std::ofstream mf(out / "manifest.json", std::ios::binary);
    require(mf.good(), Errc::invalid_argument, "cannot write manifest.json");
    mf << manifest.dump(2) << '\n';
    rep.outputs.push_back("manifest.json");
    return rep;
}

} // namespace pilotwave
