// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: twelve numbered criteria, printed one [PASS]/[FAIL] line
// each. Every tolerance is pinned in this file. Criteria 1-11 run the canned
// scenario files shipped in scenarios/ and re-judge the reported check values
// against the pinned bounds; each file's physics parameters are verified
// first, so the catalog and the gate cannot drift apart silently. Criterion
// 12 exercises the phase-space table directly.
//
//   acceptance                 run all twelve criteria
//   acceptance --criterion N   run one criterion
//
// Exit status: 0 if every line printed is [PASS], 1 otherwise.

#include "pilotwave/runner.hpp"
#include "pilotwave/wigner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace pilotwave;

namespace {

/// One criterion's verdict plus the human-readable evidence trail.
struct Gate {
    bool pass = true;
    std::string detail;

    void note(const std::string& text) {
        if (!detail.empty()) detail += "; ";
        detail += text;
    }
    void claim(bool ok, const std::string& text) {
        pass = pass && ok;
        note(text);
    }
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string count(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%lld", (long long)(v));
    return buf;
}

Scenario canned(const char* file) {
    std::filesystem::path p = std::filesystem::path(PILOTWAVE_SOURCE_DIR) / "scenarios" / file;
    return load_scenario(p.string());
}

/// Scratch directory for one criterion's run, kept criterion-private so the
/// gate behaves under a parallel test driver.
std::filesystem::path gate_out(int criterion, const Scenario& s) {
    return std::filesystem::path("acceptance_out") / ("criterion_" + std::to_string(criterion)) /
           s.name;
}

RunReport run_canned(int criterion, const Scenario& s) {
    RunOptions opt;
    opt.out_dir = gate_out(criterion, s).string();
    opt.quiet = true;
    return run_scenario(s, opt);
}

const RunCheck& find_check(const RunReport& rep, const std::string& name) {
    for (const RunCheck& c : rep.checks)
        if (c.name == name) return c;
    throw std::runtime_error("runner produced no check named `" + name + "`");
}

/// Guard the gate against edits to the canned files: a criterion is only
/// meaningful at its published parameters.
void expect(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error("scenario drifted from the gate: " + what);
}

void claim_budget(Gate& g, const RunReport& rep, double seconds) {
    g.claim(rep.wall_seconds < seconds,
            num(rep.wall_seconds) + "s < " + num(seconds) + "s budget");
}

/// H column of a relaxation series CSV (t,H,n_effective).
std::vector<double> h_column(const std::filesystem::path& file) {
    std::ifstream in(file);
    expect(in.good(), "cannot open " + file.string());
    std::string line;
    std::getline(in, line); // header
    std::vector<double> h;
    while (std::getline(in, line)) {
        std::size_t c1 = line.find(',');
        std::size_t c2 = line.find(',', c1 + 1);
        expect(c1 != std::string::npos && c2 != std::string::npos, "malformed h_series row");
        h.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    }
    return h;
}

// --- criterion 1: equilibrium ensemble reproduces the branch weights -------

Gate criterion_1() {
    Scenario s = canned("born_branches.scn");
    expect(s.mode_coeffs.size() == 2 && s.mode_coeffs[0] == cplx(0.6, 0.0) &&
               s.mode_coeffs[1] == cplx(0.8, 0.0),
           "state must be the (0.6, 0.8) two-mode superposition");
    expect(s.measurement.members == 10000, "ensemble size must be 10^4");
    expect(s.measurement.prepare == "equilibrium", "preparation must be equilibrium");

    RunReport rep = run_canned(1, s);
    Gate g;
    g.claim(find_check(rep, "all_members_assigned").pass, "all 10000 members assigned");
    const double weight[2] = {0.36, 0.64};
    for (int b = 0; b < 2; ++b) {
        double cap = 3.0 * std::sqrt(weight[b] * (1.0 - weight[b]) / 10000.0);
        double dev = find_check(rep, "born_fraction_" + std::to_string(b)).value;
        g.claim(dev <= cap, "|fraction-" + num(weight[b]) + "| " + num(dev) + " <= 3sigma " +
                                num(cap));
    }
    claim_budget(g, rep, 120.0);
    return g;
}

// --- criterion 2: equivariant transport of the equilibrium density ---------

Gate criterion_2() {
    Scenario s = canned("equivariance_box.scn");
    expect(s.relax.initial == "equilibrium", "density must start at |Psi_0|^2");
    expect(s.relax.members == 50000, "ensemble size must be 5x10^4");
    expect(s.relax.checkpoints == 5, "five checkpoints required");
    expect(s.relax.cells == std::array<std::size_t, 3>{32, 1, 1}, "32 histogram cells required");

    RunReport rep = run_canned(2, s);
    Gate g;
    g.claim(find_check(rep, "stuck_member_fraction").pass, "stuck fraction within 2%");
    double worst = find_check(rep, "equivariance_tv_max").value;
    g.claim(worst < 0.05, "max TV over 5 checkpoints " + num(worst) + " < 0.05");
    claim_budget(g, rep, 180.0);
    return g;
}

// --- criterion 3: nonequilibrium ensemble breaks the branch weights --------

Gate criterion_3() {
    Scenario s = canned("born_nonequilibrium.scn");
    expect(s.mode_coeffs.size() == 2 && s.mode_coeffs[0] == cplx(0.6, 0.0) &&
               s.mode_coeffs[1] == cplx(0.8, 0.0),
           "state must be the (0.6, 0.8) two-mode superposition");
    expect(s.measurement.prepare == "branch" && s.measurement.branch == 0,
           "density must start inside the first branch");
    expect(s.measurement.members == 10000, "ensemble size must be 10^4");

    RunReport rep = run_canned(3, s);
    Gate g;
    double fraction = find_check(rep, "branch_fraction").value;
    g.claim(fraction >= 0.99, "first-branch fraction " + num(fraction) + " >= 0.99");
    g.claim(std::abs(fraction - 0.36) > 0.25,
            "|fraction - 0.36 weight| " + num(std::abs(fraction - 0.36)) + " > 0.25");
    claim_budget(g, rep, 120.0);
    return g;
}

// --- criterion 4: coarse-grained H decays under the 16-mode flow -----------

Gate criterion_4() {
    Scenario s = canned("relax_box2d.scn");
    expect(s.relax.initial == "mode", "density must start out of equilibrium");
    expect(s.random_modes == std::array<long, 2>{4, 4}, "wave must carry 16 modes");
    expect(s.relax.checkpoints == 10, "ten checkpoints required");

    RunReport rep = run_canned(4, s);
    Gate g;
    std::vector<double> h = h_column(gate_out(4, s) / "h_series.csv");
    expect(h.size() == 11, "h_series must hold t=0 plus 10 checkpoints");
    double h0 = h.front();
    double worst_rise = 0.0;
    for (std::size_t k = 1; k < h.size(); ++k)
        worst_rise = std::max(worst_rise, h[k] - h[k - 1]);
    g.claim(worst_rise <= 0.10 * h0, "worst checkpoint rise " + num(worst_rise) +
                                         " <= 10% of H(0)=" + num(h0));
    g.claim(h.back() <= 0.5 * h0, "final H " + num(h.back()) + " <= 0.5*H(0) " + num(0.5 * h0));
    claim_budget(g, rep, 300.0);
    return g;
}

// --- criterion 5: standing wave at rest, pointer registers the energy ------

Gate criterion_5() {
    Scenario s = canned("kinetic_pointer.scn");
    expect(s.measurement.velocity_samples == 1000, "velocity scan must use 10^3 samples");

    RunReport rep = run_canned(5, s);
    Gate g;
    double collected = find_check(rep, "bare_velocity_sample_count").value;
    g.claim(collected == 1000.0, count(collected) + "/1000 non-nodal samples");
    double vmax = find_check(rep, "bare_velocity_max").value;
    g.claim(vmax < 1e-8, "max |velocity| " + num(vmax) + " < 1e-08");
    double prel = find_check(rep, "pointer_displacement_rel_error").value;
    g.claim(prel <= 0.01, "pointer shift within " + num(prel) + " of a*E*tau (<= 1%)");
    double part = find_check(rep, "particle_displacement_max").value;
    g.claim(part < 1e-6, "max particle displacement " + num(part) + " < 1e-06");
    return g;
}

// --- criterion 6: momentum measurement imparts +-p/m slopes ----------------

Gate criterion_6() {
    Scenario s = canned("momentum_split.scn");
    expect(s.observable == ObservableKind::momentum, "observable must be momentum");
    expect(s.mode_coeffs.size() == 2 &&
               std::norm(s.mode_coeffs[0]) == std::norm(s.mode_coeffs[1]),
           "branch weights must be (0.5, 0.5)");
    expect(s.measurement.members == 10000, "ensemble size must be 10^4");

    RunReport rep = run_canned(6, s);
    Gate g;
    g.claim(find_check(rep, "no_stuck_members").pass &&
                find_check(rep, "all_members_assigned").pass,
            "all 10000 members assigned");
    double slope = find_check(rep, "slope_max_relative_error").value;
    g.claim(slope < 1e-3, "slope = +-p/m, sign-matched, rel error " + num(slope) + " < 0.001");
    double cap = 3.0 * std::sqrt(0.5 * 0.5 / 10000.0);
    for (int b = 0; b < 2; ++b) {
        double dev = find_check(rep, "branch_fraction_" + std::to_string(b)).value;
        g.claim(dev <= cap,
                "|fraction-0.5| " + num(dev) + " <= 3sigma " + num(cap));
    }
    return g;
}

// --- criterion 7: double-slit fringes and half-plane confinement -----------

Gate criterion_7() {
    Scenario s = canned("double_slit.scn");
    expect(s.slit.aperture_members == 1000, "10^3 upper-aperture trajectories required");
    expect(s.slit.members == 20000, "screen ensemble must hold 2x10^4 members");

    RunReport rep = run_canned(7, s);
    Gate g;
    double failed = find_check(rep, "aperture_trajectories_finished").value;
    g.claim(failed == 0.0, count(1000 - failed) + "/1000 aperture trajectories finished");
    double crossed = find_check(rep, "aperture_crossings").value;
    g.claim(crossed == 0.0, count(crossed) + " crossings of the symmetry axis");
    double tv = find_check(rep, "screen_tv_vs_wave").value;
    g.claim(tv < 0.08, "screen TV vs |Psi|^2 " + num(tv) + " < 0.08");
    claim_budget(g, rep, 300.0);
    return g;
}

// --- criterion 8: gentle probes track the configuration faithfully ---------

Gate criterion_8() {
    Scenario s = canned("subquantum_track.scn");
    double dx = s.axes[0].spacing();
    double at = s.measurement.strength * s.measurement.tau;
    expect(std::abs(at - 1e-3) < 1e-15, "probe transfer a*tau must be 1e-3");
    expect(std::abs(s.measurement.narrow_width - at * dx) < 1e-18,
           "pointer width must satisfy w/(a*tau) = dx");
    expect(s.measurement.probes == 10, "track must use 10 probes");

    RunReport rep = run_canned(8, s);
    Gate g;
    double err = find_check(rep, "probe_error_max").value;
    g.claim(err <= 2.0 * dx, "max estimate error " + num(err) + " <= 2dx " + num(2.0 * dx));
    double fid = find_check(rep, "fidelity_min").value;
    g.claim(fid >= 0.999, "min wave fidelity " + num(fid) + " >= 0.999");
    double rms = find_check(rep, "track_rms_vs_reference").value;
    g.claim(rms < 5.0 * dx,
            "10-probe RMS vs reference " + num(rms) + " < 5dx " + num(5.0 * dx));
    return g;
}

// --- criterion 9: occupancy verdicts are deterministic ---------------------

Gate criterion_9() {
    Scenario s = canned("occupancy.scn");
    expect(s.measurement.repetitions == 100, "100 repetitions per side required");

    RunReport rep = run_canned(9, s);
    Gate g;
    double occ = find_check(rep, "occupied_verdicts").value;
    g.claim(occ == 100.0, count(occ) + "/100 occupied probes read occupied");
    double emp = find_check(rep, "empty_verdicts").value;
    g.claim(emp == 100.0, count(emp) + "/100 empty probes read empty");
    return g;
}

// --- criterion 10: trajectories satisfy the second-order force law ---------

Gate criterion_10() {
    Scenario s = canned("trajectories_box.scn");
    expect(s.trajectories.newton_samples > 0, "second-order residual must be enabled");

    RunReport rep = run_canned(10, s);
    Gate g;
    double nr = find_check(rep, "newton_residual_max_relative").value;
    g.claim(nr < 1e-3, "max |m q'' + grad(V+Q)| / max |grad(V+Q)| " + num(nr) +
                           " < 0.001 (node-flagged samples excluded)");
    return g;
}

// --- criterion 11: single-axis trajectories never cross --------------------

Gate criterion_11() {
    Scenario s = canned("trajectories_box.scn");
    expect(s.trajectories.n_starts == 1000, "10^3 ordered starts required");

    RunReport rep = run_canned(11, s);
    Gate g;
    double failed = find_check(rep, "all_trajectories_finished").value;
    g.claim(failed == 0.0, count(1000 - failed) + "/1000 trajectories finished");
    double violations = find_check(rep, "non_crossing").value;
    g.claim(violations == 0.0,
            count(violations) + " ordering violations at shared sample times (exact)");
    return g;
}

// --- criterion 12: phase-space table identities ----------------------------

Gate criterion_12() {
    Gate g;
    Grid ring({Axis{256, -8.0, 8.0, Boundary::periodic}});

    // Gaussian state: peak value and both marginal identities.
    GaussianPacket packet{0.25, 0.7, 0.0};
    WaveField f(ring, {1.0, 1.0, 1.0});
    for (std::size_t j = 0; j < ring.size(); ++j)
        f[j] = packet.factor(ring.coord(0, j), 0)[0];
    f = f.normalized();
    WignerTable w = wigner(f);

    std::size_t iq = std::size_t((packet.center + 8.0) / w.dq + 0.5);
    std::size_t ip = w.p.size() / 2; // p = 0
    double peak_err = std::abs(w.at(iq, ip) - 1.0 / kPi);
    g.claim(peak_err <= 1e-6, "peak |W - 1/pi| " + num(peak_err) + " <= 1e-06");

    std::vector<double> mq = wigner_position_marginal(w);
    double worst_q = 0.0;
    for (std::size_t a = 0; a < w.q.size(); ++a) {
        double want = std::norm(packet.factor(w.q[a], 0)[0]);
        worst_q = std::max(worst_q, std::abs(mq[a] - want));
    }
    g.claim(worst_q <= 1e-6, "position marginal error " + num(worst_q) + " <= 1e-06");

    // The momentum lattice is twice as fine as the ring quantum, so even
    // nodes carry double the continuum density and odd nodes none.
    std::vector<double> mp = wigner_momentum_marginal(w);
    double s2 = packet.sigma * packet.sigma;
    double worst_p = 0.0;
    for (std::size_t m = 0; m < w.p.size(); ++m) {
        bool even = (long(m) - long(ip)) % 2 == 0;
        double want = even ? 2.0 * std::sqrt(2.0 * s2 / kPi) *
                                 std::exp(-2.0 * s2 * w.p[m] * w.p[m])
                           : 0.0;
        worst_p = std::max(worst_p, std::abs(mp[m] - want));
    }
    g.claim(worst_p <= 1e-6, "momentum marginal error " + num(worst_p) + " <= 1e-06");

    // Two-packet superposition: midpoint fringes alternate sign across the
    // first four extrema of the interference factor.
    const double d = 2.5, sigma = 0.5;
    GaussianPacket gl{-d, sigma, 0.0}, gr{d, sigma, 0.0};
    WaveField cat(ring, {1.0, 1.0, 1.0});
    for (std::size_t j = 0; j < ring.size(); ++j) {
        double x = ring.coord(0, j);
        cat[j] = gl.factor(x, 0)[0] + gr.factor(x, 0)[0];
    }
    cat = cat.normalized();
    WignerTable wc = wigner(cat);

    std::size_t mid = wc.q.size() / 2; // q = 0, halfway between the packets
    bool alternate = true;
    std::string trail;
    for (int k = 1; k <= 4; ++k) {
        double pk = double(k) * kPi / (2.0 * d); // extrema of the fringe factor
        std::size_t m = std::size_t(pk / wc.dp + 0.5) + wc.p.size() / 2;
        double v = wc.at(mid, m);
        bool want_negative = (k % 2) == 1;
        alternate = alternate && (want_negative ? v < 0.0 : v > 0.0);
        trail += (k > 1 ? "," : "") + num(v);
    }
    g.claim(alternate, "midpoint fringes alternate sign (W = " + trail + ")");
    return g;
}

const char* kTitle[13] = {
    "",
    "equilibrium branch weights",
    "equivariant density transport",
    "nonequilibrium branch capture",
    "coarse-grained H decay",
    "static wave, moving pointer",
    "momentum branch slopes",
    "double-slit confinement",
    "gentle tracking probes",
    "occupancy verdicts",
    "second-order consistency",
    "trajectory non-crossing",
    "phase-space identities",
};

Gate run_gate(int n) {
    try {
        switch (n) {
        case 1: return criterion_1();
        case 2: return criterion_2();
        case 3: return criterion_3();
        case 4: return criterion_4();
        case 5: return criterion_5();
        case 6: return criterion_6();
        case 7: return criterion_7();
        case 8: return criterion_8();
        case 9: return criterion_9();
        case 10: return criterion_10();
        case 11: return criterion_11();
        case 12: return criterion_12();
        }
        throw std::runtime_error("no such criterion");
    } catch (const std::exception& e) {
        Gate g;
        g.pass = false;
        g.note(std::string("error: ") + e.what());
        return g;
    }
}

} // namespace

int main(int argc, char** argv) {
    long only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atol(argv[++i]);
            if (only < 1 || only > 12) {
                std::fprintf(stderr, "acceptance: criterion must be 1..12\n");
                return 2;
            }
        } else {
            std::fprintf(stderr, "usage: acceptance [--criterion N]\n");
            return 2;
        }
    }

    int failures = 0;
    for (int n = 1; n <= 12; ++n) {
        if (only != 0 && n != only) continue;
        Gate g = run_gate(n);
        std::printf("[%s] criterion %2d  %-30s  %s\n", g.pass ? "PASS" : "FAIL", n, kTitle[n],
                    g.detail.c_str());
        std::fflush(stdout);
        failures += g.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
