// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "pilotwave/fft.hpp"
#include "pilotwave/grid.hpp"
#include "pilotwave/rng.hpp"
#include "pilotwave/snapshot.hpp"

#include "oracles.hpp"

using namespace pilotwave;

namespace {

std::vector<cplx> random_signal(std::size_t n, std::uint64_t seed) {
    RandomStream rs(seed, 0);
    std::vector<cplx> v(n);
    for (auto& a : v) a = cplx(rs.next_double(-1, 1), rs.next_double(-1, 1));
    return v;
}

} // namespace

TEST_CASE("fft matches the direct transform", "[fft]") {
    for (std::size_t n : {8u, 64u, 128u}) {
        std::vector<cplx> x = random_signal(n, 11 + n);
        std::vector<cplx> want = oracle::dft_slow(x);
        Fft plan(n);
        std::vector<cplx> got = x;
        plan.forward(got.data());
        for (std::size_t k = 0; k < n; ++k)
            REQUIRE(std::abs(got[k] - want[k]) < 1e-11 * double(n));
    }
}

TEST_CASE("fft round trip and Parseval", "[fft]") {
    const std::size_t n = 1024;
    std::vector<cplx> x = random_signal(n, 7);
    std::vector<cplx> y = x;
    Fft plan(n);
    plan.forward(y.data());

    double sum_x = 0, sum_y = 0;
    for (std::size_t j = 0; j < n; ++j) sum_x += std::norm(x[j]);
    for (std::size_t k = 0; k < n; ++k) sum_y += std::norm(y[k]);
    REQUIRE(sum_y / double(n) == Catch::Approx(sum_x).epsilon(1e-12));

    plan.inverse(y.data());
    for (std::size_t j = 0; j < n; ++j) REQUIRE(std::abs(y[j] - x[j]) < 1e-12);
}

TEST_CASE("fft rejects non-power-of-two sizes", "[fft]") {
    REQUIRE_THROWS_AS(Fft(12), Error);
    try {
        Fft bad(12);
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::invalid_argument);
    }
}

TEST_CASE("sine analysis inverts sine synthesis", "[fft]") {
    const std::size_t n = 64;
    RandomStream rs(3, 0);
    std::vector<cplx> c(n, cplx(0, 0));
    for (std::size_t m = 1; m < n; ++m) c[m] = cplx(rs.next_double(-1, 1), rs.next_double(-1, 1));
    std::vector<cplx> f = sine_synthesize(c.data(), n);
    REQUIRE(std::abs(f[0]) < 1e-12); // wall value
    std::vector<cplx> c2 = sine_analyze(f.data(), n);
    for (std::size_t m = 1; m < n; ++m) REQUIRE(std::abs(c2[m] - c[m]) < 1e-11);
}

TEST_CASE("sine analysis projects grid samples of a single mode", "[fft]") {
    const std::size_t n = 32;
    const long double L = 2.5L;
    for (int mode : {1, 5, 17, 31}) {
        std::vector<cplx> f(n);
        for (std::size_t j = 0; j < n; ++j) {
            long double x = L * (long double)j / (long double)n;
            f[j] = double(std::sin((long double)mode * oracle::kPi * x / L));
        }
        std::vector<cplx> c = sine_analyze(f.data(), n);
        for (std::size_t m = 1; m < n; ++m) {
            double want = (int(m) == mode) ? 1.0 : 0.0;
            REQUIRE(std::abs(c[m] - cplx(want, 0)) < 1e-12);
        }
    }
}

TEST_CASE("cosine synthesis differentiates a sine series", "[fft]") {
    const std::size_t n = 64;
    const double L = 1.7;
    // f = sin(3 pi x / L): f' = (3 pi / L) cos(3 pi x / L)
    std::vector<cplx> c(n, cplx(0, 0));
    c[3] = 1.0;
    std::vector<cplx> d(n, cplx(0, 0));
    d[3] = 3.0 * kPi / L;
    std::vector<cplx> got = cosine_synthesize(d.data(), n);
    for (std::size_t j = 0; j < n; ++j) {
        double x = L * double(j) / double(n);
        REQUIRE(std::abs(got[j] - cplx(3.0 * kPi / L * std::cos(3.0 * kPi * x / L), 0)) <
                1e-11);
    }
}

TEST_CASE("fourier mode numbering is the natural fft order", "[fft]") {
    REQUIRE(fourier_mode(0, 8) == 0.0);
    REQUIRE(fourier_mode(3, 8) == 3.0);
    REQUIRE(fourier_mode(4, 8) == -4.0);
    REQUIRE(fourier_mode(7, 8) == -1.0);
}

TEST_CASE("grid flatten/unflatten round trip and strides", "[grid]") {
    Grid g({Axis{8, 0.0, 1.0, Boundary::periodic}, Axis{16, -2.0, 2.0, Boundary::box},
            Axis{8, 0.0, 4.0, Boundary::periodic}});
    REQUIRE(g.ndim() == 3);
    REQUIRE(g.size() == 8u * 16u * 8u);
    auto st = g.strides();
    REQUIRE(st[0] == 16u * 8u);
    REQUIRE(st[1] == 8u);
    REQUIRE(st[2] == 1u);
    for (std::size_t f : {0ul, 1ul, 137ul, 1023ul}) {
        auto idx = g.unflatten(f);
        REQUIRE(g.flatten(idx) == f);
    }
    REQUIRE(g.cell_volume() == Catch::Approx((1.0 / 8) * (4.0 / 16) * (4.0 / 8)));
}

TEST_CASE("grid rejects bad axes", "[grid]") {
    auto expect = [](std::vector<Axis> axes, Errc code) {
        try {
            Grid g(std::move(axes));
            FAIL("expected an error");
        } catch (const Error& e) {
            REQUIRE(e.code() == code);
        }
    };
    expect({Axis{12, 0, 1, Boundary::periodic}}, Errc::invalid_argument); // not a power of two
    expect({Axis{4, 0, 1, Boundary::periodic}}, Errc::invalid_argument);  // too small
    expect({Axis{8, 1, 1, Boundary::periodic}}, Errc::invalid_argument);  // empty extent
    expect({}, Errc::invalid_argument);
}

TEST_CASE("grid wrap and contains", "[grid]") {
    Grid g({Axis{8, 0.0, 2.0, Boundary::periodic}, Axis{8, 0.0, 1.0, Boundary::box}});
    Vec q = Vec::of(2.7, 0.5);
    Vec w = g.wrap(q);
    REQUIRE(w[0] == Catch::Approx(0.7));
    REQUIRE(w[1] == 0.5);
    REQUIRE(g.contains(Vec::of(-5.0, 0.5)));  // periodic axis never excludes
    REQUIRE(!g.contains(Vec::of(0.5, 1.5)));  // box axis does
}

TEST_CASE("random streams are schedule independent", "[rng]") {
    // Stream i's draws do not depend on what other streams consumed.
    RandomStream a(42, 7);
    double first = a.next_double();
    for (std::uint64_t s = 0; s < 20; ++s) {
        RandomStream other(42, s);
        other.next_double();
        other.next_double();
    }
    RandomStream b(42, 7);
    REQUIRE(b.next_double() == first);

    // Different seeds and streams decorrelate.
    RandomStream c(43, 7);
    REQUIRE(c.next_double() != first);
}

TEST_CASE("uniform and normal draws have sane moments", "[rng]") {
    RandomStream rs(1234, 0);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double u = rs.next_double();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    REQUIRE(sum / n == Catch::Approx(0.5).margin(0.005));
    REQUIRE(sum2 / n == Catch::Approx(1.0 / 3).margin(0.005));

    double nsum = 0, nsum2 = 0;
    for (int i = 0; i < n; ++i) {
        double g = rs.next_normal();
        nsum += g;
        nsum2 += g * g;
    }
    REQUIRE(nsum / n == Catch::Approx(0.0).margin(0.01));
    REQUIRE(nsum2 / n == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("snapshot round trip is bit exact", "[snapshot]") {
    Grid g({Axis{8, 0.0, 1.0, Boundary::periodic}, Axis{16, -1.0, 3.0, Boundary::box}});
    WaveField f(g, {1.0, 2.5, 1.0}, 0.625);
    RandomStream rs(99, 0);
    for (auto& a : f.amplitudes()) a = cplx(rs.next_double(-1, 1), rs.next_double(-1, 1));

    auto path = std::filesystem::temp_directory_path() / "pwf_roundtrip.pwf";
    write_snapshot(f, path.string());
    WaveField r = read_snapshot(path.string());

    REQUIRE(r.grid() == f.grid());
    REQUIRE(r.time() == f.time());
    REQUIRE(r.mass()[0] == f.mass()[0]);
    REQUIRE(r.mass()[1] == f.mass()[1]);
    REQUIRE(std::memcmp(r.amplitudes().data(), f.amplitudes().data(),
                        f.amplitudes().size() * sizeof(cplx)) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("snapshot rejects foreign and damaged files", "[snapshot]") {
    namespace fs = std::filesystem;
    Grid g({Axis{8, 0.0, 1.0, Boundary::periodic}});
    WaveField f(g, {1, 1, 1}, 0.0);
    auto path = fs::temp_directory_path() / "pwf_damaged.pwf";
    write_snapshot(f, path.string());

    auto patch_byte = [&](long offset, char value) {
        std::FILE* fp = std::fopen(path.string().c_str(), "r+b");
        REQUIRE(fp != nullptr);
        std::fseek(fp, offset, SEEK_SET);
        std::fwrite(&value, 1, 1, fp);
        std::fclose(fp);
    };

    patch_byte(0, 'X'); // wrong magic
    try {
        read_snapshot(path.string());
        FAIL("expected magic mismatch");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::magic_mismatch);
    }
    patch_byte(0, 'P');

    patch_byte(4, 9); // unsupported version
    try {
        read_snapshot(path.string());
        FAIL("expected version error");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::version_unsupported);
    }
    patch_byte(4, 1);

    fs::resize_file(path, fs::file_size(path) - 7); // cut the payload short
    try {
        read_snapshot(path.string());
        FAIL("expected truncation error");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::truncated_file);
    }
    fs::remove(path);
}
