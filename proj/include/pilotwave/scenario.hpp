// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/grid.hpp"
#include "pilotwave/modes.hpp"
#include "pilotwave/potential.hpp"
#include "pilotwave/rng.hpp"

namespace pilotwave {

/// Experiment kinds the runner knows how to execute.
enum class ExperimentKind {
    evolve,
    trajectories,
    relax,
    born_branches,
    momentum_split,
    kinetic_energy_pointer,
    double_slit,
    two_packet,
    subquantum_track,
    occupancy,
};

inline const char* experiment_token(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::evolve: return "evolve";
    case ExperimentKind::trajectories: return "trajectories";
    case ExperimentKind::relax: return "relax";
    case ExperimentKind::born_branches: return "born-branches";
    case ExperimentKind::momentum_split: return "momentum-split";
    case ExperimentKind::kinetic_energy_pointer: return "kinetic-energy-pointer";
    case ExperimentKind::double_slit: return "double-slit";
    case ExperimentKind::two_packet: return "two-packet";
    case ExperimentKind::subquantum_track: return "subquantum-track";
    case ExperimentKind::occupancy: return "occupancy";
    }
    return "?";
}

namespace detail {

/// Raw `[section]` / `key = value` document. Keys are tracked so that the
/// scenario builder can reject anything it did not consume: a misspelled key
/// is an error, never a silently ignored default.
class ConfigDoc {
public:
    struct Entry {
        std::string value;
        std::size_t line = 0;
        mutable bool used = false;
    };

    static ConfigDoc parse(const std::string& text) {
        ConfigDoc doc;
        std::istringstream in(text);
        std::string raw;
        std::size_t lineno = 0;
        std::string section;
        while (std::getline(in, raw)) {
            ++lineno;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            if (line.front() == '[') {
                require(line.back() == ']' && line.size() > 2, Errc::parse_error,
                        "line " + std::to_string(lineno) + ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                require(!section.empty(), Errc::parse_error,
                        "line " + std::to_string(lineno) + ": empty section name");
                doc.sections_[section]; // remember even if it stays empty
                continue;
            }
            std::size_t eq = line.find('=');
            require(eq != std::string::npos, Errc::parse_error,
                    "line " + std::to_string(lineno) + ": expected `key = value`");
            require(!section.empty(), Errc::parse_error,
                    "line " + std::to_string(lineno) + ": key outside any [section]");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            require(!key.empty(), Errc::parse_error,
                    "line " + std::to_string(lineno) + ": empty key");
            auto& sec = doc.sections_[section];
            require(!sec.count(key), Errc::parse_error,
                    "line " + std::to_string(lineno) + ": duplicate key `" + key + "`");
            sec[key] = Entry{value, lineno, false};
        }
        return doc;
    }

    bool has(const std::string& sec, const std::string& key) const {
        auto s = sections_.find(sec);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    /// Fetch and mark consumed; null when absent.
    const Entry* find(const std::string& sec, const std::string& key) const {
        auto s = sections_.find(sec);
        if (s == sections_.end()) return nullptr;
        auto e = s->second.find(key);
        if (e == s->second.end()) return nullptr;
        e->second.used = true;
        return &e->second;
    }

    const Entry& need(const std::string& sec, const std::string& key) const {
        const Entry* e = find(sec, key);
        require(e != nullptr, Errc::validation_error,
                "missing required key `" + sec + "." + key + "`");
        return *e;
    }

    std::string get_string(const std::string& sec, const std::string& key) const {
        return need(sec, key).value;
    }
    std::string get_string(const std::string& sec, const std::string& key,
                           const std::string& def) const {
        const Entry* e = find(sec, key);
        return e ? e->value : def;
    }

    double get_real(const std::string& sec, const std::string& key) const {
        return to_real(need(sec, key), sec, key);
    }
    double get_real(const std::string& sec, const std::string& key, double def) const {
        const Entry* e = find(sec, key);
        return e ? to_real(*e, sec, key) : def;
    }

    long get_int(const std::string& sec, const std::string& key) const {
        return to_int(need(sec, key), sec, key);
    }
    long get_int(const std::string& sec, const std::string& key, long def) const {
        const Entry* e = find(sec, key);
        return e ? to_int(*e, sec, key) : def;
    }

    std::vector<double> get_reals(const std::string& sec, const std::string& key) const {
        return to_reals(need(sec, key), sec, key);
    }
    std::vector<double> get_reals(const std::string& sec, const std::string& key,
                                  std::vector<double> def) const {
        const Entry* e = find(sec, key);
        return e ? to_reals(*e, sec, key) : def;
    }

    std::vector<long> get_ints(const std::string& sec, const std::string& key) const {
        const Entry& e = need(sec, key);
        std::vector<double> reals = to_reals(e, sec, key);
        std::vector<long> out;
        out.reserve(reals.size());
        for (double r : reals) {
            long v = long(r);
            require(double(v) == r, Errc::validation_error,
                    "key `" + sec + "." + key + "` must hold integers");
            out.push_back(v);
        }
        return out;
    }
    std::vector<long> get_ints(const std::string& sec, const std::string& key,
                               std::vector<long> def) const {
        return has(sec, key) ? get_ints(sec, key) : def;
    }

    /// Every seen section must be allowed and every key consumed.
    void finish(const std::vector<std::string>& allowed_sections) const {
        for (const auto& [sec, entries] : sections_) {
            bool known = false;
            for (const std::string& a : allowed_sections)
                if (a == sec) known = true;
            require(known, Errc::validation_error, "unknown section [" + sec + "]");
            for (const auto& [key, entry] : entries)
                require(entry.used, Errc::validation_error,
                        "unknown key `" + sec + "." + key + "` (line " +
                            std::to_string(entry.line) + ")");
        }
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double to_real(const Entry& e, const std::string& sec, const std::string& key) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(e.value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        require(pos == e.value.size() && !e.value.empty(), Errc::validation_error,
                "key `" + sec + "." + key + "` must be a real number, got `" + e.value + "`");
        return v;
    }

    static long to_int(const Entry& e, const std::string& sec, const std::string& key) {
        std::size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(e.value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        require(pos == e.value.size() && !e.value.empty(), Errc::validation_error,
                "key `" + sec + "." + key + "` must be an integer, got `" + e.value + "`");
        return v;
    }

    static std::vector<double> to_reals(const Entry& e, const std::string& sec,
                                        const std::string& key) {
        const std::string& v = e.value;
        require(v.size() >= 2 && v.front() == '[' && v.back() == ']', Errc::validation_error,
                "key `" + sec + "." + key + "` must be a bracketed list `[a, b, ...]`");
        std::vector<double> out;
        std::string body = v.substr(1, v.size() - 2);
        if (trim(body).empty()) return out;
        std::istringstream in(body);
        std::string item;
        while (std::getline(in, item, ',')) {
            std::string t = trim(item);
            std::size_t pos = 0;
            double x = 0.0;
            try {
                x = std::stod(t, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            require(pos == t.size() && !t.empty(), Errc::validation_error,
                    "key `" + sec + "." + key + "` has a non-numeric list item `" + t + "`");
            out.push_back(x);
        }
        return out;
    }

    std::map<std::string, std::map<std::string, Entry>> sections_;
};

inline Axis axis_from(const std::vector<double>& spec, Boundary b, const std::string& what) {
    require(spec.size() == 3, Errc::validation_error,
            "key `" + what + "` must be [npoints, lo, hi]");
    double n = spec[0];
    require(n >= 2 && double(std::size_t(n)) == n, Errc::validation_error,
            "key `" + what + "` needs an integer npoints >= 2");
    require(spec[1] < spec[2], Errc::validation_error, "key `" + what + "` needs lo < hi");
    return Axis{std::size_t(n), spec[1], spec[2], b};
}

inline Boundary boundary_from(const std::string& tok, const std::string& what) {
    if (tok == "box") return Boundary::box;
    if (tok == "periodic") return Boundary::periodic;
    fail(Errc::validation_error, "key `" + what + "` must be box or periodic, got `" + tok + "`");
}

} // namespace detail

/// How a state section chooses the measured-observable value per mode.
enum class ObservableKind { energy, momentum, values };

/// A parsed and validated experiment description. Field groups mirror the
/// config sections; only the group for the selected experiment is populated.
struct Scenario {
    std::string name;
    ExperimentKind experiment = ExperimentKind::evolve;
    std::uint64_t seed = 0;

    // [grid]
    std::vector<Axis> axes;
    std::array<double, 3> mass{1.0, 1.0, 1.0};

    // [state]
    ModeExpansion::BasisKind basis = ModeExpansion::BasisKind::box_sine;
    std::vector<std::array<int, 3>> mode_indices;
    std::vector<cplx> mode_coeffs;
    ObservableKind observable = ObservableKind::energy;
    std::vector<double> eigenvalues;     ///< only for ObservableKind::values
    std::vector<GaussianPacket> family;  ///< packets basis
    std::array<long, 2> random_modes{0, 0}; ///< equal-|c| random-phase box family

    // [potential]
    PotentialSpec potential = PotentialSpec::free_space();

    struct EvolveParams {
        double dt = 0.0;
        double t_final = 0.0;
        std::vector<double> snapshot_times;
    } evolve;

    struct TrajectoryParams {
        std::vector<double> starts;
        long n_starts = 0;
        double t_final = 0.0;
        long samples = 50;
        double tol = 1e-8;
        long newton_samples = 0; ///< 0: skip the second-order consistency check
        double newton_bound = 1e-3;
    } trajectories;

    struct RelaxParams {
        long members = 0;
        double t_final = 0.0;
        long checkpoints = 10;
        std::array<std::size_t, 3> cells{1, 1, 1};
        std::string initial = "mode"; ///< "mode": P0 = |phi_initial_mode|^2; "equilibrium": P0 = |Psi0|^2
        std::array<long, 2> initial_mode{1, 1};
        double tol = 1e-6;
        double tv_bound = 0.05;      ///< equilibrium runs: max TV at any checkpoint
        double h_band = 0.10;        ///< nonequilibrium runs: allowed uphill fluctuation, x H(0)
        double h_final_ratio = 0.5;  ///< nonequilibrium runs: required final decay
    } relax;

    struct MeasurementParams {
        double strength = 1.0;
        double tau = 1.0;
        double sigma = 1.0;
        double pointer_center = 0.0;
        Axis pointer_axis;
        double post_flight = 0.0;
        long members = 0;
        std::string prepare = "equilibrium"; ///< or "branch"
        long branch = 0;                     ///< replayed branch index
        double slope_t1 = 0.0, slope_t2 = 0.0;
        long velocity_samples = 1000;
        double narrow_width = 0.0;
        long probes = 0;
        double probe_span = 0.0;
        double x0 = 0.0;
        std::pair<double, double> window{0.0, 0.0};
        long repetitions = 0;
        double tol = 1e-8;
    } measurement;

    struct SlitParams {
        double beam_center = 0.0;
        double beam_sigma = 1.0;
        double beam_momentum = 0.0;
        Axis beam_axis;
        double t_screen = 0.0;
        long members = 0;
        long aperture_members = 0;
        long cells = 32;
        long samples = 40;
        double tol = 1e-7;
        double tv_bound = 0.08; ///< screen-pattern mismatch ceiling
    } slit;
};

namespace detail {

inline ExperimentKind experiment_from(const std::string& tok) {
    for (ExperimentKind k :
         {ExperimentKind::evolve, ExperimentKind::trajectories, ExperimentKind::relax,
          ExperimentKind::born_branches, ExperimentKind::momentum_split,
          ExperimentKind::kinetic_energy_pointer, ExperimentKind::double_slit,
          ExperimentKind::two_packet, ExperimentKind::subquantum_track,
          ExperimentKind::occupancy})
        if (tok == experiment_token(k)) return k;
    fail(Errc::validation_error, "key `scenario.experiment`: unknown experiment `" + tok + "`");
}

inline void read_grid(const ConfigDoc& doc, Scenario& s) {
    Boundary b1 = boundary_from(doc.get_string("grid", "boundary1"), "grid.boundary1");
    s.axes.push_back(axis_from(doc.get_reals("grid", "axis1"), b1, "grid.axis1"));
    if (doc.has("grid", "axis2")) {
        Boundary b2 = boundary_from(doc.get_string("grid", "boundary2"), "grid.boundary2");
        s.axes.push_back(axis_from(doc.get_reals("grid", "axis2"), b2, "grid.axis2"));
    }
    std::vector<double> m = doc.get_reals("grid", "mass", std::vector<double>(s.axes.size(), 1.0));
    require(m.size() == s.axes.size(), Errc::validation_error,
            "key `grid.mass` must list one mass per axis");
    for (std::size_t i = 0; i < m.size(); ++i) {
        require(m[i] > 0.0, Errc::validation_error, "key `grid.mass` entries must be positive");
        s.mass[i] = m[i];
    }
}

inline void read_state(const ConfigDoc& doc, Scenario& s) {
    if (doc.has("state", "random_modes")) {
        std::vector<long> rm = doc.get_ints("state", "random_modes");
        require(rm.size() == 2 && rm[0] >= 1 && rm[1] >= 1, Errc::validation_error,
                "key `state.random_modes` must be [n1, n2] with n >= 1");
        require(s.axes.size() == 2, Errc::validation_error,
                "key `state.random_modes` needs a 2-D grid");
        s.basis = ModeExpansion::BasisKind::box_sine;
        s.random_modes = {rm[0], rm[1]};
        return;
    }

    std::string basis = doc.get_string("state", "basis");
    if (basis == "box") s.basis = ModeExpansion::BasisKind::box_sine;
    else if (basis == "plane") s.basis = ModeExpansion::BasisKind::plane_wave;
    else if (basis == "packets") s.basis = ModeExpansion::BasisKind::packet;
    else fail(Errc::validation_error, "key `state.basis` must be box, plane or packets");

    std::size_t nmodes = 0;
    if (s.basis == ModeExpansion::BasisKind::packet) {
        require(s.axes.size() == 1, Errc::validation_error, "packet states are 1-D");
        std::vector<double> centers = doc.get_reals("state", "centers");
        std::vector<double> sigmas = doc.get_reals("state", "sigmas");
        std::vector<double> momenta =
            doc.get_reals("state", "momenta", std::vector<double>(centers.size(), 0.0));
        require(!centers.empty() && sigmas.size() == centers.size() &&
                    momenta.size() == centers.size(),
                Errc::validation_error,
                "keys `state.centers/sigmas/momenta` must have equal lengths");
        for (std::size_t i = 0; i < centers.size(); ++i) {
            require(sigmas[i] > 0.0, Errc::validation_error,
                    "key `state.sigmas` entries must be positive");
            s.family.push_back(GaussianPacket{centers[i], sigmas[i], momenta[i]});
            s.mode_indices.push_back({int(i), 0, 0});
        }
        nmodes = centers.size();
    } else {
        std::vector<long> idx1 = doc.get_ints("state", "indices1");
        require(!idx1.empty(), Errc::validation_error, "key `state.indices1` must be non-empty");
        nmodes = idx1.size();
        std::vector<long> idx2(nmodes, 0);
        if (s.axes.size() == 2) {
            idx2 = doc.get_ints("state", "indices2");
            require(idx2.size() == nmodes, Errc::validation_error,
                    "key `state.indices2` must match indices1 in length");
        }
        for (std::size_t i = 0; i < nmodes; ++i)
            s.mode_indices.push_back({int(idx1[i]), int(idx2[i]), 0});
    }

    std::vector<double> re = doc.get_reals("state", "amp_re");
    std::vector<double> im =
        doc.get_reals("state", "amp_im", std::vector<double>(re.size(), 0.0));
    require(re.size() == nmodes && im.size() == nmodes, Errc::validation_error,
            "keys `state.amp_re/amp_im` must list one amplitude per mode");
    for (std::size_t i = 0; i < nmodes; ++i) s.mode_coeffs.emplace_back(re[i], im[i]);

    std::string obs = doc.get_string("state", "observable", "energy");
    if (obs == "energy") s.observable = ObservableKind::energy;
    else if (obs == "momentum") s.observable = ObservableKind::momentum;
    else if (obs == "values") s.observable = ObservableKind::values;
    else fail(Errc::validation_error, "key `state.observable` must be energy, momentum or values");
    if (s.observable == ObservableKind::values) {
        s.eigenvalues = doc.get_reals("state", "eigenvalues");
        require(s.eigenvalues.size() == nmodes, Errc::validation_error,
                "key `state.eigenvalues` must list one value per mode");
    }
    if (s.observable == ObservableKind::momentum)
        require(s.basis == ModeExpansion::BasisKind::plane_wave && s.axes.size() == 1,
                Errc::validation_error,
                "key `state.observable` = momentum needs a 1-D plane basis");
}

inline void read_potential(const ConfigDoc& doc, Scenario& s) {
    std::string kind = doc.get_string("potential", "kind", "free");
    if (kind == "free") {
        s.potential = PotentialSpec::free_space();
        return;
    }
    require(kind == "harmonic", Errc::validation_error,
            "key `potential.kind` must be free or harmonic");
    std::vector<double> omega = doc.get_reals("potential", "omega");
    std::vector<double> center =
        doc.get_reals("potential", "center", std::vector<double>(omega.size(), 0.0));
    require(omega.size() == s.axes.size() && center.size() == s.axes.size(),
            Errc::validation_error, "keys `potential.omega/center` must list one entry per axis");
    std::array<double, 3> w{0, 0, 0}, c{0, 0, 0};
    for (std::size_t i = 0; i < omega.size(); ++i) {
        w[i] = omega[i];
        c[i] = center[i];
    }
    s.potential = PotentialSpec::harmonic(w, c, s.mass);
}

inline Axis read_pointer_axis(const ConfigDoc& doc, const std::string& sec,
                              const std::string& key) {
    return axis_from(doc.get_reals(sec, key), Boundary::periodic, sec + "." + key);
}

inline void read_measurement(const ConfigDoc& doc, Scenario& s) {
    Scenario::MeasurementParams& m = s.measurement;
    m.strength = doc.get_real("measurement", "strength");
    m.tau = doc.get_real("measurement", "tau");
    m.sigma = doc.get_real("measurement", "sigma");
    m.pointer_center = doc.get_real("measurement", "pointer_center", 0.0);
    m.pointer_axis = read_pointer_axis(doc, "measurement", "pointer_axis");
    m.tol = doc.get_real("measurement", "tol", 1e-8);
    switch (s.experiment) {
    case ExperimentKind::born_branches:
        m.members = doc.get_int("measurement", "members");
        m.post_flight = doc.get_real("measurement", "post_flight", 0.0);
        m.prepare = doc.get_string("measurement", "prepare", "equilibrium");
        require(m.prepare == "equilibrium" || m.prepare == "branch", Errc::validation_error,
                "key `measurement.prepare` must be equilibrium or branch");
        m.branch = doc.get_int("measurement", "branch", 0);
        break;
    case ExperimentKind::momentum_split:
        m.members = doc.get_int("measurement", "members");
        m.slope_t1 = doc.get_real("measurement", "slope_t1");
        m.slope_t2 = doc.get_real("measurement", "slope_t2");
        require(0.0 < m.slope_t1 && m.slope_t1 < m.slope_t2, Errc::validation_error,
                "keys `measurement.slope_t1/slope_t2` must satisfy 0 < t1 < t2");
        break;
    case ExperimentKind::kinetic_energy_pointer:
        m.members = doc.get_int("measurement", "members");
        m.velocity_samples = doc.get_int("measurement", "velocity_samples", 1000);
        break;
    case ExperimentKind::subquantum_track: {
        m.narrow_width = doc.get_real("measurement", "narrow_width");
        m.probes = doc.get_int("measurement", "probes");
        m.probe_span = doc.get_real("measurement", "probe_span");
        m.x0 = doc.get_real("measurement", "x0");
        require(m.probes >= 1 && m.probe_span > 0.0, Errc::validation_error,
                "keys `measurement.probes/probe_span` must be positive");
        break;
    }
    case ExperimentKind::occupancy: {
        std::vector<double> w = doc.get_reals("measurement", "window");
        require(w.size() == 2 && w[0] < w[1], Errc::validation_error,
                "key `measurement.window` must be [lo, hi] with lo < hi");
        m.window = {w[0], w[1]};
        m.repetitions = doc.get_int("measurement", "repetitions", 100);
        break;
    }
    default:
        break;
    }
    if (m.members < 0 || (m.members == 0 && (s.experiment == ExperimentKind::born_branches ||
                                             s.experiment == ExperimentKind::momentum_split ||
                                             s.experiment == ExperimentKind::kinetic_energy_pointer)))
        fail(Errc::validation_error, "key `measurement.members` must be positive");
}

inline void read_double_slit(const ConfigDoc& doc, Scenario& s) {
    Scenario::SlitParams& p = s.slit;
    p.beam_center = doc.get_real("double_slit", "beam_center");
    p.beam_sigma = doc.get_real("double_slit", "beam_sigma");
    p.beam_momentum = doc.get_real("double_slit", "beam_momentum");
    p.beam_axis = read_pointer_axis(doc, "double_slit", "beam_axis");
    p.t_screen = doc.get_real("double_slit", "t_screen");
    p.members = doc.get_int("double_slit", "members");
    p.aperture_members = doc.get_int("double_slit", "aperture_members");
    p.cells = doc.get_int("double_slit", "cells", 32);
    p.samples = doc.get_int("double_slit", "samples", 40);
    p.tol = doc.get_real("double_slit", "tol", 1e-7);
    p.tv_bound = doc.get_real("double_slit", "tv_bound", 0.08);
    require(p.tv_bound > 0.0, Errc::validation_error,
            "key `double_slit.tv_bound` must be positive");
    require(p.beam_sigma > 0.0 && p.t_screen > 0.0, Errc::validation_error,
            "keys `double_slit.beam_sigma/t_screen` must be positive");
    require(p.members >= 1 && p.aperture_members >= 1, Errc::validation_error,
            "keys `double_slit.members/aperture_members` must be positive");
    require(p.cells >= 2 && p.samples >= 2, Errc::validation_error,
            "keys `double_slit.cells/samples` must be at least 2");
    require(s.basis == ModeExpansion::BasisKind::packet && s.family.size() == 2,
            Errc::validation_error, "double-slit needs a two-packet state");
}

} // namespace detail

/// Parse and validate a scenario document. Unknown sections or keys, type
/// mismatches, and out-of-range values are all hard errors.
inline Scenario parse_scenario(const std::string& text) {
    detail::ConfigDoc doc = detail::ConfigDoc::parse(text);
    Scenario s;
    s.name = doc.get_string("scenario", "name");
    s.experiment = detail::experiment_from(doc.get_string("scenario", "experiment"));
    long seed = doc.get_int("scenario", "seed", 0);
    require(seed >= 0, Errc::validation_error, "key `scenario.seed` must be non-negative");
    s.seed = std::uint64_t(seed);

    detail::read_grid(doc, s);
    detail::read_state(doc, s);
    detail::read_potential(doc, s);

    std::vector<std::string> allowed{"scenario", "grid", "state", "potential"};
    switch (s.experiment) {
    case ExperimentKind::evolve: {
        allowed.push_back("evolve");
        s.evolve.dt = doc.get_real("evolve", "dt");
        s.evolve.t_final = doc.get_real("evolve", "t_final");
        s.evolve.snapshot_times =
            doc.get_reals("evolve", "snapshot_times", std::vector<double>{});
        require(s.evolve.dt > 0.0 && s.evolve.t_final > 0.0, Errc::validation_error,
                "keys `evolve.dt/t_final` must be positive");
        for (double t : s.evolve.snapshot_times)
            require(t >= 0.0 && t <= s.evolve.t_final, Errc::validation_error,
                    "key `evolve.snapshot_times` entries must lie in [0, t_final]");
        break;
    }
    case ExperimentKind::trajectories: {
        allowed.push_back("trajectories");
        Scenario::TrajectoryParams& p = s.trajectories;
        if (doc.has("trajectories", "starts"))
            p.starts = doc.get_reals("trajectories", "starts");
        else
            p.n_starts = doc.get_int("trajectories", "n_starts");
        p.t_final = doc.get_real("trajectories", "t_final");
        p.samples = doc.get_int("trajectories", "samples", 50);
        p.tol = doc.get_real("trajectories", "tol", 1e-8);
        p.newton_samples = doc.get_int("trajectories", "newton_samples", 0);
        p.newton_bound = doc.get_real("trajectories", "newton_bound", 1e-3);
        require(p.t_final > 0.0, Errc::validation_error,
                "key `trajectories.t_final` must be positive");
        require(!p.starts.empty() || p.n_starts >= 1, Errc::validation_error,
                "need `trajectories.starts` or a positive `trajectories.n_starts`");
        require(p.samples >= 2, Errc::validation_error,
                "key `trajectories.samples` must be at least 2");
        require(p.newton_samples == 0 || p.newton_samples >= 5, Errc::validation_error,
                "key `trajectories.newton_samples` must be 0 or at least 5");
        break;
    }
    case ExperimentKind::relax: {
        allowed.push_back("relax");
        Scenario::RelaxParams& p = s.relax;
        p.members = doc.get_int("relax", "members");
        p.t_final = doc.get_real("relax", "t_final");
        p.checkpoints = doc.get_int("relax", "checkpoints", 10);
        std::vector<long> cells = doc.get_ints("relax", "cells");
        p.initial = doc.get_string("relax", "initial", "mode");
        p.tol = doc.get_real("relax", "tol", 1e-6);
        p.tv_bound = doc.get_real("relax", "tv_bound", 0.05);
        p.h_band = doc.get_real("relax", "h_band", 0.10);
        p.h_final_ratio = doc.get_real("relax", "h_final_ratio", 0.5);
        require(p.members >= 100, Errc::validation_error,
                "key `relax.members` must be at least 100");
        require(p.t_final > 0.0 && p.checkpoints >= 2, Errc::validation_error,
                "keys `relax.t_final/checkpoints` out of range");
        require(cells.size() == s.axes.size(), Errc::validation_error,
                "key `relax.cells` must list one count per axis");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            require(cells[i] >= 2, Errc::validation_error,
                    "key `relax.cells` entries must be at least 2");
            p.cells[i] = std::size_t(cells[i]);
        }
        require(p.initial == "mode" || p.initial == "equilibrium", Errc::validation_error,
                "key `relax.initial` must be mode or equilibrium");
        if (p.initial == "mode") {
            std::vector<long> init = doc.get_ints("relax", "initial_mode");
            require(init.size() == s.axes.size(), Errc::validation_error,
                    "key `relax.initial_mode` must list one index per axis");
            for (long m : init)
                require(m >= 1, Errc::validation_error,
                        "key `relax.initial_mode` entries must be at least 1");
            p.initial_mode = {init[0], init.size() > 1 ? init[1] : 1};
        }
        break;
    }
    case ExperimentKind::born_branches:
    case ExperimentKind::momentum_split:
    case ExperimentKind::kinetic_energy_pointer:
    case ExperimentKind::subquantum_track:
    case ExperimentKind::occupancy:
        allowed.push_back("measurement");
        detail::read_measurement(doc, s);
        break;
    case ExperimentKind::two_packet: {
        allowed.push_back("two_packet");
        // Reuses the trajectory parameter block under its own section name.
        Scenario::TrajectoryParams& p = s.trajectories;
        p.n_starts = doc.get_int("two_packet", "n_starts");
        p.t_final = doc.get_real("two_packet", "t_final");
        p.samples = doc.get_int("two_packet", "samples", 20);
        p.tol = doc.get_real("two_packet", "tol", 1e-8);
        require(p.n_starts >= 2 && p.t_final > 0.0 && p.samples >= 2, Errc::validation_error,
                "keys `two_packet.n_starts/t_final/samples` out of range");
        require(s.basis == ModeExpansion::BasisKind::packet && s.family.size() == 2,
                Errc::validation_error, "two-packet needs a two-packet state");
        break;
    }
    case ExperimentKind::double_slit:
        allowed.push_back("double_slit");
        detail::read_double_slit(doc, s);
        break;
    }

    doc.finish(allowed);
    return s;
}

/// Load a scenario from a file path.
inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::invalid_argument, "cannot open scenario file `" + path + "`");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

/// Build the mode expansion a scenario describes. Box and plane bases get
/// their energies from the factory; eigenvalues follow the observable choice.
/// The random-phase family draws phases from the scenario seed (its own
/// stream, so position sampling stays independent).
inline ModeExpansion make_expansion(const Scenario& s) {
    Grid grid(s.axes);
    std::vector<Mode> modes;

    if (s.random_modes[0] > 0) {
        RandomStream phases(s.seed, std::uint64_t(2) << 32);
        double amp = 1.0 / std::sqrt(double(s.random_modes[0] * s.random_modes[1]));
        for (long m1 = 1; m1 <= s.random_modes[0]; ++m1)
            for (long m2 = 1; m2 <= s.random_modes[1]; ++m2) {
                double th = phases.next_double(0.0, kTwoPi);
                Mode m;
                m.index = {int(m1), int(m2), 0};
                m.coeff = amp * std::exp(cplx(0.0, th));
                modes.push_back(m);
            }
        return ModeExpansion::box(std::move(grid), s.mass, std::move(modes));
    }

    for (std::size_t i = 0; i < s.mode_indices.size(); ++i) {
        Mode m;
        m.index = s.mode_indices[i];
        m.coeff = s.mode_coeffs[i];
        modes.push_back(m);
    }

    ModeExpansion ex = [&] {
        switch (s.basis) {
        case ModeExpansion::BasisKind::box_sine:
            return ModeExpansion::box(std::move(grid), s.mass, std::move(modes));
        case ModeExpansion::BasisKind::plane_wave:
            return ModeExpansion::plane(std::move(grid), s.mass, std::move(modes));
        case ModeExpansion::BasisKind::packet:
            return ModeExpansion::packets(std::move(grid), s.mass, s.family, std::move(modes));
        }
        fail(Errc::invalid_argument, "unreachable basis kind");
    }();

    for (std::size_t i = 0; i < ex.modes().size(); ++i) {
        Mode& m = ex.modes()[i];
        switch (s.observable) {
        case ObservableKind::energy: m.eigenvalue = m.energy; break;
        case ObservableKind::momentum:
            m.eigenvalue = kTwoPi * double(m.index[0]) / ex.grid().axis(0).length();
            break;
        case ObservableKind::values: m.eigenvalue = s.eigenvalues[i]; break;
        }
    }
    return ex.normalized();
}

} // namespace pilotwave
