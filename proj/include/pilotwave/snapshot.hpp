// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "pilotwave/common.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

// On-disk field snapshot, little-endian throughout:
//   "PWF1" | u32 version=1 | u32 ndim
//   per axis: u64 npoints | f64 lo | f64 hi | u8 boundary (0 periodic, 1 box)
//   f64 time | per axis f64 mass
//   grid.size() interleaved (re, im) f64 pairs, row-major (axis 0 slowest)
static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

inline constexpr char kSnapshotMagic[4] = {'P', 'W', 'F', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

template <typename T>
void put(std::FILE* f, const T& v) {
    require(std::fwrite(&v, sizeof(T), 1, f) == 1, Errc::truncated_file,
            "short write while saving snapshot");
}

template <typename T>
T get(std::FILE* f) {
    T v{};
    require(std::fread(&v, sizeof(T), 1, f) == 1, Errc::truncated_file,
            "snapshot ends before the declared content");
    return v;
}

} // namespace detail

inline void write_snapshot(const WaveField& field, const std::string& path) {
    detail::FileHandle f(std::fopen(path.c_str(), "wb"));
    require(f != nullptr, Errc::invalid_argument, "cannot open '" + path + "' for writing");
    require(std::fwrite(kSnapshotMagic, 1, 4, f.get()) == 4, Errc::truncated_file,
            "short write while saving snapshot");
    detail::put<std::uint32_t>(f.get(), kSnapshotVersion);
    const Grid& g = field.grid();
    detail::put<std::uint32_t>(f.get(), std::uint32_t(g.ndim()));
    for (int i = 0; i < g.ndim(); ++i) {
        detail::put<std::uint64_t>(f.get(), g.axis(i).npoints);
        detail::put<double>(f.get(), g.axis(i).lo);
        detail::put<double>(f.get(), g.axis(i).hi);
        detail::put<std::uint8_t>(f.get(), std::uint8_t(g.axis(i).boundary));
    }
    detail::put<double>(f.get(), field.time());
    for (int i = 0; i < g.ndim(); ++i)
        detail::put<double>(f.get(), field.mass()[std::size_t(i)]);
    // std::complex<double> is layout-compatible with double[2] (re, im).
    const auto& amp = field.amplitudes();
    require(std::fwrite(amp.data(), sizeof(cplx), amp.size(), f.get()) == amp.size(),
            Errc::truncated_file, "short write while saving snapshot");
    require(std::fflush(f.get()) == 0, Errc::truncated_file, "flush failed while saving");
}

inline WaveField read_snapshot(const std::string& path) {
    detail::FileHandle f(std::fopen(path.c_str(), "rb"));
    require(f != nullptr, Errc::invalid_argument, "cannot open '" + path + "' for reading");
    char magic[4] = {0, 0, 0, 0};
    require(std::fread(magic, 1, 4, f.get()) == 4, Errc::truncated_file,
            "file too short for a snapshot header");
    require(std::memcmp(magic, kSnapshotMagic, 4) == 0, Errc::magic_mismatch,
            "'" + path + "' is not a field snapshot");
    auto version = detail::get<std::uint32_t>(f.get());
    require(version == kSnapshotVersion, Errc::version_unsupported,
            "snapshot version " + std::to_string(version) + " is not supported");
    auto ndim = detail::get<std::uint32_t>(f.get());
    require(ndim >= 1 && ndim <= 3, Errc::truncated_file, "snapshot has invalid dimension");
    std::vector<Axis> axes(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) {
        axes[i].npoints = detail::get<std::uint64_t>(f.get());
        axes[i].lo = detail::get<double>(f.get());
        axes[i].hi = detail::get<double>(f.get());
        auto b = detail::get<std::uint8_t>(f.get());
        require(b <= 1, Errc::truncated_file, "snapshot has invalid boundary tag");
        axes[i].boundary = Boundary(b);
    }
    double time = detail::get<double>(f.get());
    std::array<double, 3> mass{1, 1, 1};
    for (std::uint32_t i = 0; i < ndim; ++i) mass[i] = detail::get<double>(f.get());
    WaveField field(Grid(std::move(axes)), mass, time);
    auto& amp = field.amplitudes();
    require(std::fread(amp.data(), sizeof(cplx), amp.size(), f.get()) == amp.size(),
            Errc::truncated_file, "snapshot ends before the declared content");
    return field;
}

} // namespace pilotwave
