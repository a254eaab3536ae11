// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "pilotwave/ensemble.hpp"
#include "pilotwave/evolution.hpp"

#include "oracles.hpp"

using namespace pilotwave;

TEST_CASE("position sampling follows the density", "[ensemble]") {
    // rho = (2/pi) sin^2(x) on [0, pi]: cdf = (x - sin x cos x)/pi.
    Grid g({Axis{128, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms{{{1, 0, 0}, cplx(1.0, 0.0), 0, 0}};
    WaveField f = ModeExpansion::box(g, {1, 1, 1}, ms).synthesize(0.0);

    EnsembleState ens = sample_from_density(f.density(), g, 20000, 77);
    std::vector<double> xs;
    for (const Vec& p : ens.points) xs.push_back(p[0]);
    double ks = oracle::ks_statistic(
        xs, [](double x) { return (x - std::sin(x) * std::cos(x)) / kPi; });
    REQUIRE(ks < 0.012); // 5% KS critical value at n=20000 is 0.0096

    // Same seed, same cloud; different seed, different cloud.
    EnsembleState again = sample_from_density(f.density(), g, 20000, 77);
    REQUIRE(std::memcmp(again.points.data(), ens.points.data(),
                        ens.points.size() * sizeof(Vec)) == 0);
    EnsembleState other = sample_from_density(f.density(), g, 20000, 78);
    REQUIRE(std::memcmp(other.points.data(), ens.points.data(),
                        ens.points.size() * sizeof(Vec)) != 0);
}

TEST_CASE("sampling rejects unusable densities", "[ensemble]") {
    Grid g({Axis{16, 0.0, 1.0, Boundary::box}});
    auto expect_bad = [&](std::vector<double> d) {
        try {
            sample_from_density(d, g, 10, 1);
            FAIL("expected a density rejection");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::bad_density);
        }
    };
    expect_bad(std::vector<double>(16, 0.0));              // no mass
    expect_bad(std::vector<double>(8, 1.0));               // wrong size
    std::vector<double> neg(16, 1.0);
    neg[3] = -0.5;
    expect_bad(neg);                                       // negative entries
}

TEST_CASE("ensemble evolution is worker-count independent", "[ensemble]") {
    const double L = 10.0;
    Grid g({Axis{32, 0.0, L, Boundary::periodic}});
    std::vector<Mode> ms;
    ms.push_back({{1, 0, 0}, cplx(1.0, 0.0), 0, 0});
    ms.push_back({{2, 0, 0}, cplx(0.5, 0.5), 0, 0});
    EigenmodeEvolution ev(ModeExpansion::plane(g, {1, 1, 1}, ms));
    WaveField f0 = ev.field_at(0.0);

    EnsembleState a = sample_from_density(f0.density(), g, 300, 5);
    EnsembleState b = a;
    evolve_ensemble(a, ev, 0.8, {}, 1);
    evolve_ensemble(b, ev, 0.8, {}, 7);
    REQUIRE(a.time == 0.8);
    REQUIRE(std::memcmp(a.points.data(), b.points.data(), a.size() * sizeof(Vec)) == 0);
    REQUIRE(a.flags == b.flags);
}

TEST_CASE("a member that cannot start is frozen and flagged", "[ensemble]") {
    Grid g({Axis{32, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms{{{2, 0, 0}, cplx(1.0, 0.0), 0, 0}};
    EigenmodeEvolution ev(ModeExpansion::box(g, {1, 1, 1}, ms));

    EnsembleState ens;
    ens.points = {Vec::of(0.7), Vec::of(kPi / 2), Vec::of(2.5)}; // middle one at the node
    ens.flags = {0, 0, 0};
    evolve_ensemble(ens, ev, 1.0, {}, 1);
    REQUIRE((ens.flags[0] & member_stuck) == 0);
    REQUIRE((ens.flags[1] & member_stuck) != 0);
    REQUIRE((ens.flags[2] & member_stuck) == 0);
    REQUIRE(ens.points[1][0] == kPi / 2); // frozen where it started
    // Stuck members drop out of statistics.
    WaveField f = ev.field_at(1.0);
    CoarseGrain cg = coarse_grain(ens, f, {8, 1, 1});
    REQUIRE(cg.counted == 2);
}

TEST_CASE("coarse graining averages counts and wave density", "[ensemble]") {
    Grid g({Axis{8, 0.0, 2.0, Boundary::box}});
    WaveField f(g, {1, 1, 1});
    for (std::size_t j = 0; j < 8; ++j) f[j] = std::sqrt(0.5); // rho = 1/2, normalized

    EnsembleState ens;
    ens.points = {Vec::of(0.1), Vec::of(0.3), Vec::of(0.6), Vec::of(1.7)};
    ens.flags.assign(4, 0u);

    CoarseGrain cg = coarse_grain(ens, f, {2, 1, 1});
    REQUIRE(cg.p_bar.size() == 2);
    // Three of four members in [0,1): p_bar = 0.75 / 1.0 cell volume.
    REQUIRE(cg.p_bar[0] == Catch::Approx(0.75));
    REQUIRE(cg.p_bar[1] == Catch::Approx(0.25));
    REQUIRE(cg.d_bar[0] == Catch::Approx(0.5));
    REQUIRE(cg.d_bar[1] == Catch::Approx(0.5));

    try {
        coarse_grain(ens, f, {3, 1, 1});
        FAIL("expected a divisibility rejection");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::resolution_too_coarse);
    }
}

TEST_CASE("relative entropy and distance behave on synthetic cells", "[ensemble]") {
    CoarseGrain cg;
    cg.ndim = 1;
    cg.cell_volume = 0.5;
    cg.p_bar = {1.0, 0.6, 0.4};
    cg.d_bar = {1.0, 0.6, 0.4};
    REQUIRE(h_function(cg) == 0.0);
    REQUIRE(tv_distance(cg) == 0.0);

    cg.p_bar = {1.2, 0.4, 0.4};
    REQUIRE(h_function(cg) > 0.0); // Gibbs: relative entropy is nonnegative
    REQUIRE(tv_distance(cg) ==
            Catch::Approx(0.5 * (0.2 + 0.2) * 0.5));

    cg.p_bar = {0.0, 1.0, 1.0};
    REQUIRE(std::isfinite(h_function(cg))); // empty cells contribute nothing

    cg.p_bar = {1.0, 1.0, 0.0};
    cg.d_bar = {1.0, 0.0, 1.0};
    try {
        h_function(cg);
        FAIL("expected support mismatch");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::support_mismatch);
    }
}

TEST_CASE("equilibrium ensembles stay equilibrated", "[ensemble]") {
    Grid g({Axis{64, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms;
    ms.push_back({{1, 0, 0}, cplx(0.8, 0.0), 0, 0});
    ms.push_back({{2, 0, 0}, cplx(0.0, 0.6), 0, 0});
    EigenmodeEvolution ev(ModeExpansion::box(g, {1, 1, 1}, ms));

    EnsembleState ens = sample_from_density(ev.field_at(0.0).density(), g, 8000, 11);
    IntegrateOptions opt;
    opt.tol = 1e-6;
    evolve_ensemble(ens, ev, 0.3, opt, 1);

    CoarseGrain cg = coarse_grain(ens, ev.field_at(0.3), {8, 1, 1});
    REQUIRE(tv_distance(cg) < 0.03); // sampling noise scale, no systematic drift
    REQUIRE(h_function(cg) < 0.01);
}

TEST_CASE("outcome fractions split the cloud between windows", "[ensemble]") {
    EnsembleState ens;
    for (double y : {-3.0, -2.9, -3.1, 2.8, 3.0, 3.3, 0.1}) // 3 low, 3 high, 1 stray
        ens.points.push_back(Vec::of(0.0, y));
    ens.flags.assign(7, 0u);
    ens.flags[6] = 0;

    OutcomeFractions of =
        outcome_fractions(ens, 1, {{-4.0, -2.0}, {2.0, 4.0}});
    REQUIRE(of.total == 7);
    REQUIRE(of.count[0] == 3);
    REQUIRE(of.count[1] == 3);
    REQUIRE(of.fraction[0] == Catch::Approx(3.0 / 7));
    REQUIRE(of.unassigned == Catch::Approx(1.0 / 7));

    try {
        outcome_fractions(ens, 1, {{-4.0, 0.0}, {-1.0, 4.0}});
        FAIL("expected window overlap rejection");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::overlap_error);
    }
}
