// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "pilotwave/guidance.hpp"
#include "pilotwave/splitstep.hpp"

#include "oracles.hpp"

using namespace pilotwave;
using oracle::lcplx;

namespace {

WaveField sample_packet(const Grid& g, const GaussianPacket& p, double mass) {
    WaveField f(g, {mass, 1, 1});
    for (std::size_t j = 0; j < g.size(); ++j) f[j] = p.factor(g.coord(0, j), 0)[0];
    return f;
}

} // namespace

TEST_CASE("plane wave carries a trajectory at constant speed", "[guidance]") {
    const double L = 10.0, mass = 1.3;
    Grid g({Axis{32, 0.0, L, Boundary::periodic}});
    std::vector<Mode> ms{{{2, 0, 0}, cplx(1.0, 0.0), 0, 0}};
    EigenmodeEvolution ev(ModeExpansion::plane(g, {mass, 1, 1}, ms));
    const double v = kTwoPi * 2 / L / mass;

    IntegrateOptions opt;
    opt.sample_times = {0.5, 1.0, 1.5};
    Trajectory tr = integrate_trajectory(ev, Vec::of(1.0), 0.0, 2.0, opt);
    REQUIRE(tr.points.size() == 5); // start, three samples, end
    REQUIRE(tr.points[1].t == 0.5); // exact landing, not approximate
    REQUIRE(tr.points[3].t == 1.5);
    for (const TrajectoryPoint& p : tr.points) {
        REQUIRE(p.q[0] == Catch::Approx(1.0 + v * p.t).epsilon(1e-12));
        REQUIRE(p.v[0] == Catch::Approx(v).epsilon(1e-12));
        REQUIRE(p.flags == 0);
    }
    REQUIRE(tr.back().t == Catch::Approx(2.0));
}

TEST_CASE("trajectories ride a dispersing packet self-similarly", "[guidance]") {
    // For the centered free Gaussian the flow is x(t) = x0 sigma(t)/sigma(0).
    const double sigma = 1.0, mass = 1.0;
    Grid g({Axis{256, -20.0, 20.0, Boundary::periodic}});
    SplitStepEvolution ev(sample_packet(g, {0.0, sigma, 0.0}, mass),
                          PotentialSpec::free_space(), 1e-2);
    const double t1 = 2.0;
    for (double x0 : {-1.5, 0.7, 2.0}) {
        Trajectory tr = integrate_trajectory(ev, Vec::of(x0), 0.0, t1);
        GaussianPacket p{0.0, sigma, 0.0};
        double want = x0 * p.free_sigma(t1, mass) / sigma;
        REQUIRE(tr.back().q[0] == Catch::Approx(want).margin(2e-6));
    }
}

TEST_CASE("coherent-state trajectories swing rigidly with the packet", "[guidance]") {
    const double mass = 1.0, w = 1.0, A = 1.0;
    Grid g({Axis{256, -12.0, 12.0, Boundary::periodic}});
    WaveField f0(g, {mass, 1, 1});
    for (std::size_t j = 0; j < g.size(); ++j) {
        lcplx v = oracle::coherent_state(g.coord(0, j), 0.0L, mass, w, A);
        f0[j] = cplx(double(v.real()), double(v.imag()));
    }
    SplitStepEvolution ev(f0, PotentialSpec::harmonic({w, 0, 0}, {0, 0, 0}, {mass, 1, 1}),
                          2e-3);
    // Guidance velocity of a coherent state is x-independent, so every
    // trajectory is x0 + A (cos(w t) - 1).
    const double t1 = kPi; // half a period: displacement -2A
    for (double x0 : {0.4, 1.0, 2.2}) {
        Trajectory tr = integrate_trajectory(ev, Vec::of(x0), 0.0, t1);
        REQUIRE(tr.back().q[0] == Catch::Approx(x0 - 2.0 * A).margin(5e-5));
    }
}

TEST_CASE("guidance velocity refuses a node", "[guidance]") {
    Grid g({Axis{32, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms{{{2, 0, 0}, cplx(1.0, 0.0), 0, 0}};
    EigenmodeEvolution ev(ModeExpansion::box(g, {1, 1, 1}, ms));
    // sin(2x) vanishes at x = pi/2 for all times.
    try {
        guidance_velocity(ev, Vec::of(kPi / 2), 0.3);
        FAIL("expected node rejection");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::node_proximity);
    }
    // Fine away from the node (real wave: v = 0 up to roundoff).
    Vec v = guidance_velocity(ev, Vec::of(0.9), 0.3);
    REQUIRE(std::abs(v[0]) < 1e-14);
}

TEST_CASE("integration refuses to start below the node floor", "[guidance]") {
    Grid g({Axis{32, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms{{{2, 0, 0}, cplx(1.0, 0.0), 0, 0}};
    EigenmodeEvolution ev(ModeExpansion::box(g, {1, 1, 1}, ms));
    try {
        integrate_trajectory(ev, Vec::of(kPi / 2), 0.0, 1.0);
        FAIL("expected the integrator to refuse the node start");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::node_proximity);
    }
}

TEST_CASE("one-dimensional trajectories never cross", "[guidance]") {
    Grid g({Axis{64, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms;
    ms.push_back({{1, 0, 0}, cplx(0.7, 0.1), 0, 0});
    ms.push_back({{2, 0, 0}, cplx(0.0, 0.6), 0, 0});
    ms.push_back({{3, 0, 0}, cplx(-0.2, 0.35), 0, 0});
    EigenmodeEvolution ev(ModeExpansion::box(g, {1, 1, 1}, ms));

    IntegrateOptions opt;
    for (int i = 0; i < 40; ++i) opt.sample_times.push_back(0.1 * (i + 1));
    std::vector<std::vector<double>> paths;
    for (double x0 : {0.5, 0.9, 1.3, 1.9, 2.4}) {
        Trajectory tr = integrate_trajectory(ev, Vec::of(x0), 0.0, 4.0, opt);
        std::vector<double> xs;
        for (const TrajectoryPoint& p : tr.points) xs.push_back(p.q[0]);
        paths.push_back(xs);
    }
    for (std::size_t k = 0; k + 1 < paths.size(); ++k) {
        REQUIRE(paths[k].size() == paths[k + 1].size());
        for (std::size_t j = 0; j < paths[k].size(); ++j)
            REQUIRE(paths[k][j] < paths[k + 1][j]);
    }
}

TEST_CASE("quantum potential of a box eigenmode is its kinetic eigenvalue", "[guidance]") {
    const double mass = 1.7;
    Grid g({Axis{32, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms{{{3, 0, 0}, cplx(1.0, 0.0), 0, 0}};
    EigenmodeEvolution ev(ModeExpansion::box(g, {mass, 1, 1}, ms));
    // R = |sin(3x)| away from nodes: Q = 9/(2 mass), position independent.
    for (double x : {0.2, 0.4, 0.8, 1.3})
        REQUIRE(quantum_potential(ev, Vec::of(x), 0.6) ==
                Catch::Approx(9.0 / (2.0 * mass)).epsilon(1e-10));
}

TEST_CASE("quantum potential of a static packet is the inverted well", "[guidance]") {
    const double sigma = 0.9, mass = 2.0;
    Grid g({Axis{64, -20.0, 20.0, Boundary::box}});
    std::vector<Mode> ms{{{0, 0, 0}, cplx(1.0, 0.0), 0.0, 0.0}};
    EigenmodeEvolution ev(
        ModeExpansion::packets(g, {mass, 1, 1}, {GaussianPacket{0.0, sigma, 0.0}}, ms));
    for (double x : {-1.2, 0.0, 0.5, 1.8}) {
        double want =
            (1.0 / (2.0 * mass)) * (1.0 / (2 * sigma * sigma) - x * x / (4 * std::pow(sigma, 4)));
        REQUIRE(quantum_potential(ev, Vec::of(x), 0.0) == Catch::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("quantum force matches differentiating the quantum potential", "[guidance]") {
    Grid g({Axis{32, 0.0, kPi, Boundary::box}, Axis{32, 0.0, 2.0, Boundary::box}});
    std::vector<Mode> ms;
    ms.push_back({{1, 1, 0}, cplx(0.8, 0.0), 0, 0});
    ms.push_back({{2, 3, 0}, cplx(0.0, 0.5), 0, 0});
    ms.push_back({{4, 2, 0}, cplx(-0.3, 0.2), 0, 0});
    EigenmodeEvolution ev(ModeExpansion::box(g, {1.0, 2.5, 1.0}, ms));

    const double t = 0.41, h = 1e-5;
    for (double x : {0.8, 1.7}) {
        for (double y : {0.5, 1.3}) {
            Vec grad = grad_quantum_potential(ev, Vec::of(x, y), t);
            double fx = (quantum_potential(ev, Vec::of(x + h, y), t) -
                         quantum_potential(ev, Vec::of(x - h, y), t)) /
                        (2 * h);
            double fy = (quantum_potential(ev, Vec::of(x, y + h), t) -
                         quantum_potential(ev, Vec::of(x, y - h), t)) /
                        (2 * h);
            REQUIRE(grad[0] == Catch::Approx(fx).margin(1e-5 * (1 + std::abs(fx))));
            REQUIRE(grad[1] == Catch::Approx(fy).margin(1e-5 * (1 + std::abs(fy))));
        }
    }
}

TEST_CASE("guidance trajectories satisfy the second-order law", "[guidance]") {
    Grid g({Axis{64, 0.0, kPi, Boundary::box}});
    std::vector<Mode> ms;
    ms.push_back({{1, 0, 0}, cplx(0.8, 0.0), 0, 0});
    ms.push_back({{2, 0, 0}, cplx(0.0, 0.6), 0, 0});
    EigenmodeEvolution ev(ModeExpansion::box(g, {1, 1, 1}, ms));

    NewtonResidual nr =
        newton_residual(ev, PotentialSpec::free_space(), Vec::of(1.1), 0.0, 1.0, 201, 1e-11);
    REQUIRE(nr.excluded == 0);
    REQUIRE(nr.force_scale > 0.1); // the force is genuinely nonzero here
    REQUIRE(nr.max_relative < 1e-3);
}
