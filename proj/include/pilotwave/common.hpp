// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pilotwave {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Failure categories surfaced by the library. Each maps to one of the
/// documented error conditions of the public operations.
enum class Errc {
    zero_norm,
    basis_mismatch,
    boundary_unsupported,
    pointer_overflow,
    node_proximity,
    stuck_at_node,
    bad_density,
    overlap_error,
    support_mismatch,
    branch_overlap,
    resolution_too_coarse,
    packet_overlap,
    magic_mismatch,
    truncated_file,
    version_unsupported,
    parse_error,
    validation_error,
    invalid_argument,
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::zero_norm: return "ZeroNorm";
    case Errc::basis_mismatch: return "BasisMismatch";
    case Errc::boundary_unsupported: return "BoundaryUnsupported";
    case Errc::pointer_overflow: return "PointerOverflow";
    case Errc::node_proximity: return "NodeProximity";
    case Errc::stuck_at_node: return "StuckAtNode";
    case Errc::bad_density: return "BadDensity";
    case Errc::overlap_error: return "OverlapError";
    case Errc::support_mismatch: return "SupportMismatch";
    case Errc::branch_overlap: return "BranchOverlap";
    case Errc::resolution_too_coarse: return "ResolutionTooCoarse";
    case Errc::packet_overlap: return "PacketOverlap";
    case Errc::magic_mismatch: return "MagicMismatch";
    case Errc::truncated_file: return "TruncatedFile";
    case Errc::version_unsupported: return "VersionUnsupported";
    case Errc::parse_error: return "ParseError";
    case Errc::validation_error: return "ValidationError";
    case Errc::invalid_argument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

/// Configuration-space point for up to three axes (system dims plus an
/// optional pointer dim). Fixed storage keeps trajectory inner loops
/// allocation-free.
struct Vec {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    int dim = 0;

    Vec() = default;
    Vec(double a, double b, double c, int d) : x{a, b, c}, dim(d) {}
    static Vec zero(int d) {
        Vec v;
        v.dim = d;
        return v;
    }
    static Vec of(double a) { return Vec(a, 0, 0, 1); }
    static Vec of(double a, double b) { return Vec(a, b, 0, 2); }
    static Vec of(double a, double b, double c) { return Vec(a, b, c, 3); }

    double& operator[](int i) { return x[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return x[static_cast<std::size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < dim; ++i) x[std::size_t(i)] += o.x[std::size_t(i)];
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator*(double s, Vec a) {
        for (int i = 0; i < a.dim; ++i) a.x[std::size_t(i)] *= s;
        return a;
    }
    double norm2() const {
        double s = 0;
        for (int i = 0; i < dim; ++i) s += x[std::size_t(i)] * x[std::size_t(i)];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }
};

} // namespace pilotwave
