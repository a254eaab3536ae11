// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/fft.hpp"
#include "pilotwave/grid.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

/// Value and partial derivatives of a complex field at one configuration
/// point. d2 is the full symmetric Hessian; d3[k][i] = d_k d_i d_i psi (the
/// mixed thirds needed for quantum-potential gradients). Entries beyond the
/// requested order are left untouched.
struct PointEval {
    cplx psi{0, 0};
    std::array<cplx, 3> d1{};
    std::array<std::array<cplx, 3>, 3> d2{};
    std::array<std::array<cplx, 3>, 3> d3{};
};

/// Normalized 1-D Gaussian wave packet
///   phi(x) = (2 pi sigma^2)^(-1/4) exp(-(x-c)^2/(4 sigma^2) + i p (x-c)).
struct GaussianPacket {
    double center = 0.0;
    double sigma = 1.0;
    double momentum = 0.0;

    /// Value plus derivatives up to `order` (<= 3).
    std::array<cplx, 4> factor(double x, int order) const {
        std::array<cplx, 4> f{};
        double u = x - center;
        double amp = std::pow(kTwoPi * sigma * sigma, -0.25);
        cplx val = amp * std::exp(cplx(-u * u / (4.0 * sigma * sigma), momentum * u));
        f[0] = val;
        if (order >= 1) {
            cplx h(-u / (2.0 * sigma * sigma), momentum);
            double hp = -1.0 / (2.0 * sigma * sigma);
            f[1] = h * val;
            if (order >= 2) f[2] = (h * h + hp) * val;
            if (order >= 3) f[3] = (h * h * h + 3.0 * h * hp) * val;
        }
        return f;
    }

    double value_abs(double x) const {
        double u = x - center;
        return std::pow(kTwoPi * sigma * sigma, -0.25) *
               std::exp(-u * u / (4.0 * sigma * sigma));
    }

    /// Free-flight closed form: value and x-derivatives of the packet evolved
    /// for time t under H = p^2/(2 mass). mass may be infinite (frozen shape).
    ///   psi(x,t) = N w^{-1/2} exp(-(x-c-pt/m)^2/(4 sigma^2 w) + i p (x-c) - i p^2 t/(2m)),
    ///   w = 1 + i t / (2 mass sigma^2).
    std::array<cplx, 4> free_factor(double x, double t, double mass, int order) const {
        cplx w(1.0, std::isinf(mass) ? 0.0 : t / (2.0 * mass * sigma * sigma));
        double drift = std::isinf(mass) ? 0.0 : momentum * t / mass;
        double u = x - center - drift;
        double amp = std::pow(kTwoPi * sigma * sigma, -0.25);
        cplx kin = std::isinf(mass) ? cplx(0, 0)
                                    : cplx(0.0, -momentum * momentum * t / (2.0 * mass));
        cplx val = amp / std::sqrt(w) *
                   std::exp(-u * u / (4.0 * sigma * sigma * w) +
                            cplx(0.0, momentum * (x - center)) + kin);
        std::array<cplx, 4> f{};
        f[0] = val;
        if (order >= 1) {
            cplx two_a = -1.0 / (2.0 * sigma * sigma * w);
            cplx h = two_a * u + cplx(0.0, momentum);
            f[1] = h * val;
            if (order >= 2) f[2] = (h * h + two_a) * val;
            if (order >= 3) f[3] = (h * h * h + 3.0 * h * two_a) * val;
        }
        return f;
    }

    /// Spread width after free flight: sigma(t) = sigma |w|.
    double free_sigma(double t, double mass) const {
        if (std::isinf(mass)) return sigma;
        double im = t / (2.0 * mass * sigma * sigma);
        return sigma * std::sqrt(1.0 + im * im);
    }

    double free_center(double t, double mass) const {
        return center + (std::isinf(mass) ? 0.0 : momentum * t / mass);
    }
};

/// One term of a superposition over an orthonormal basis.
struct Mode {
    std::array<int, 3> index{0, 0, 0}; ///< per-axis mode number (basis-dependent)
    cplx coeff{0, 0};
    double energy = 0.0;     ///< self-Hamiltonian eigenvalue (hbar = 1)
    double eigenvalue = 0.0; ///< measured-observable value carried by this mode
};

/// Superposition over one of three orthonormal families:
///  - box_sine:  phi_m(x) = sqrt(2/L) sin(m pi (x-lo)/L) per box axis, m >= 1
///  - plane_wave: phi_m(x) = exp(i k_m (x-lo))/sqrt(L), k_m = 2 pi m/L per
///    periodic axis, m in [-n/2, n/2)
///  - packet: explicit 1-D Gaussian packets (orthonormal only when the
///    packets are far apart; construction checks overlap)
class ModeExpansion {
public:
    enum class BasisKind { box_sine, plane_wave, packet };

    static ModeExpansion box(Grid grid, std::array<double, 3> mass, std::vector<Mode> modes) {
        ModeExpansion e(BasisKind::box_sine, std::move(grid), mass, std::move(modes));
        for (int i = 0; i < e.grid_.ndim(); ++i)
            require(e.grid_.axis(i).boundary == Boundary::box, Errc::basis_mismatch,
                    "box_sine basis needs box axes");
        for (Mode& m : e.modes_) {
            double energy = 0.0;
            for (int i = 0; i < e.grid_.ndim(); ++i) {
                int mi = m.index[std::size_t(i)];
                require(mi >= 1 && std::size_t(mi) < e.grid_.axis(i).npoints,
                        Errc::invalid_argument, "box mode index out of range");
                double mu = double(mi) * kPi / e.grid_.axis(i).length();
                energy += mu * mu / (2.0 * mass[std::size_t(i)]);
            }
            m.energy = energy;
        }
        return e;
    }

    static ModeExpansion plane(Grid grid, std::array<double, 3> mass, std::vector<Mode> modes) {
        ModeExpansion e(BasisKind::plane_wave, std::move(grid), mass, std::move(modes));
        for (int i = 0; i < e.grid_.ndim(); ++i)
            require(e.grid_.axis(i).boundary == Boundary::periodic, Errc::basis_mismatch,
                    "plane_wave basis needs periodic axes");
        for (Mode& m : e.modes_) {
            double energy = 0.0;
            for (int i = 0; i < e.grid_.ndim(); ++i) {
                long n = long(e.grid_.axis(i).npoints);
                long mi = m.index[std::size_t(i)];
                require(mi >= -n / 2 && mi < n / 2, Errc::invalid_argument,
                        "plane mode index out of range");
                double k = kTwoPi * double(mi) / e.grid_.axis(i).length();
                energy += k * k / (2.0 * mass[std::size_t(i)]);
            }
            m.energy = energy;
        }
        return e;
    }

    /// 1-D packet basis; mode index selects a packet. Overlap between distinct
    /// packets must be negligible for the family to act orthonormal.
    static ModeExpansion packets(Grid grid, std::array<double, 3> mass,
                                 std::vector<GaussianPacket> family, std::vector<Mode> modes) {
        ModeExpansion e(BasisKind::packet, std::move(grid), mass, std::move(modes));
        require(e.grid_.ndim() == 1, Errc::invalid_argument, "packet basis is 1-D");
        e.packets_ = std::move(family);
        for (std::size_t a = 0; a < e.packets_.size(); ++a)
            for (std::size_t b = a + 1; b < e.packets_.size(); ++b) {
                const GaussianPacket& pa = e.packets_[a];
                const GaussianPacket& pb = e.packets_[b];
                double gap = std::abs(pa.center - pb.center);
                require(gap > 8.0 * (pa.sigma + pb.sigma), Errc::packet_overlap,
                        "packet modes overlap too strongly to be orthonormal");
            }
        for (const Mode& m : e.modes_)
            require(m.index[0] >= 0 && std::size_t(m.index[0]) < e.packets_.size(),
                    Errc::invalid_argument, "packet mode index out of range");
        return e;
    }

    BasisKind basis() const { return kind_; }
    const Grid& grid() const { return grid_; }
    const std::array<double, 3>& mass() const { return mass_; }
    const std::vector<Mode>& modes() const { return modes_; }
    std::vector<Mode>& modes() { return modes_; }
    const std::vector<GaussianPacket>& packet_family() const { return packets_; }

    double coeff_norm_squared() const {
        double s = 0.0;
        for (const Mode& m : modes_) s += std::norm(m.coeff);
        return s;
    }

    /// Rescale coefficients to unit total weight.
    ModeExpansion normalized() const {
        double n2 = coeff_norm_squared();
        require(n2 > 1e-300, Errc::zero_norm, "cannot normalize an empty expansion");
        ModeExpansion out = *this;
        double s = 1.0 / std::sqrt(n2);
        for (Mode& m : out.modes_) m.coeff *= s;
        return out;
    }

    /// Advance coefficients by the self-Hamiltonian phases: c -> c e^{-i E dt}.
    ModeExpansion evolved(double dt) const {
        ModeExpansion out = *this;
        for (Mode& m : out.modes_)
            m.coeff *= std::exp(cplx(0.0, -m.energy * dt));
        return out;
    }

    /// Sum the superposition onto the grid at time t (phases e^{-iEt} applied).
    WaveField synthesize(double time) const {
        WaveField field(grid_, mass_, time);
        std::vector<cplx>& amp = field.amplitudes();
        if (kind_ == BasisKind::box_sine) {
            for (const Mode& m : modes_) {
                cplx c = m.coeff * std::exp(cplx(0.0, -m.energy * time));
                scatter_box(amp, m.index, c);
            }
            for (int ax = 0; ax < grid_.ndim(); ++ax)
                detail::for_each_line(grid_, amp, ax, [&](cplx* line, std::size_t n) {
                    std::vector<cplx> s = sine_synthesize(line, n);
                    std::copy(s.begin(), s.end(), line);
                });
        } else if (kind_ == BasisKind::plane_wave) {
            for (const Mode& m : modes_) {
                cplx c = m.coeff * std::exp(cplx(0.0, -m.energy * time));
                std::array<std::size_t, 3> bin{0, 0, 0};
                double invroot = 1.0;
                for (int i = 0; i < grid_.ndim(); ++i) {
                    long n = long(grid_.axis(i).npoints);
                    long mi = m.index[std::size_t(i)];
                    bin[std::size_t(i)] = std::size_t(mi >= 0 ? mi : mi + n);
                    invroot /= std::sqrt(grid_.axis(i).length());
                }
                amp[grid_.flatten(bin)] += c * invroot;
            }
            for (int ax = 0; ax < grid_.ndim(); ++ax) {
                Fft plan(grid_.axis(ax).npoints);
                detail::for_each_line(grid_, amp, ax, [&](cplx* line, std::size_t n) {
                    plan.inverse(line);
                    for (std::size_t j = 0; j < n; ++j) line[j] *= double(n);
                });
            }
        } else {
            for (const Mode& m : modes_) {
                cplx c = m.coeff * std::exp(cplx(0.0, -m.energy * time));
                const GaussianPacket& p = packets_[std::size_t(m.index[0])];
                for (std::size_t j = 0; j < grid_.axis(0).npoints; ++j)
                    amp[j] += c * p.factor(grid_.coord(0, j), 0)[0];
            }
        }
        return field;
    }

    /// Coefficients <phi_n|field> for every mode of this expansion's basis.
    std::vector<cplx> project_onto(const WaveField& field) const {
        require(field.grid() == grid_, Errc::basis_mismatch, "projection grid mismatch");
        std::vector<cplx> out(modes_.size(), cplx(0, 0));
        if (kind_ == BasisKind::packet) {
            const double dv = grid_.cell_volume();
            for (std::size_t n = 0; n < modes_.size(); ++n) {
                const GaussianPacket& p = packets_[std::size_t(modes_[n].index[0])];
                cplx s(0, 0);
                for (std::size_t j = 0; j < grid_.axis(0).npoints; ++j)
                    s += std::conj(p.factor(grid_.coord(0, j), 0)[0]) * field[j];
                out[n] = s * dv;
            }
            return out;
        }
        std::vector<cplx> spec = basis_spectrum(field);
        for (std::size_t n = 0; n < modes_.size(); ++n)
            out[n] = spec[spectrum_slot(modes_[n].index)];
        return out;
    }

    /// Expand `field` over the full box_sine family of its grid, keeping modes
    /// with |coeff| > drop_tol * max|coeff|. Eigenvalues default to energies.
    static ModeExpansion project_box(const WaveField& field, double drop_tol) {
        ModeExpansion probe(BasisKind::box_sine, field.grid(), field.mass(), {});
        std::vector<cplx> spec = probe.basis_spectrum(field);
        std::vector<Mode> kept = keep_above(probe, spec, drop_tol);
        ModeExpansion out = box(field.grid(), field.mass(), std::move(kept));
        for (Mode& m : out.modes_) m.eigenvalue = m.energy;
        return out;
    }

    /// Same over the plane_wave family; 1-D eigenvalues default to k (momentum).
    static ModeExpansion project_plane(const WaveField& field, double drop_tol) {
        ModeExpansion probe(BasisKind::plane_wave, field.grid(), field.mass(), {});
        std::vector<cplx> spec = probe.basis_spectrum(field);
        std::vector<Mode> kept = keep_above(probe, spec, drop_tol);
        ModeExpansion out = plane(field.grid(), field.mass(), std::move(kept));
        if (out.grid_.ndim() == 1)
            for (Mode& m : out.modes_)
                m.eigenvalue = kTwoPi * double(m.index[0]) / out.grid_.axis(0).length();
        return out;
    }

private:
    ModeExpansion(BasisKind k, Grid g, std::array<double, 3> mass, std::vector<Mode> modes)
        : kind_(k), grid_(std::move(g)), mass_(mass), modes_(std::move(modes)) {}

    void scatter_box(std::vector<cplx>& amp, const std::array<int, 3>& index, cplx c) const {
        std::array<std::size_t, 3> slot{0, 0, 0};
        double scale = 1.0;
        for (int i = 0; i < grid_.ndim(); ++i) {
            slot[std::size_t(i)] = std::size_t(index[std::size_t(i)]);
            scale *= std::sqrt(2.0 / grid_.axis(i).length());
        }
        amp[grid_.flatten(slot)] += c * scale;
    }

    /// Flat index into the per-grid coefficient array for a mode index.
    std::size_t spectrum_slot(const std::array<int, 3>& index) const {
        std::array<std::size_t, 3> slot{0, 0, 0};
        for (int i = 0; i < grid_.ndim(); ++i) {
            long n = long(grid_.axis(i).npoints);
            long mi = index[std::size_t(i)];
            slot[std::size_t(i)] =
                kind_ == BasisKind::box_sine ? std::size_t(mi) : std::size_t(mi >= 0 ? mi : mi + n);
        }
        return grid_.flatten(slot);
    }

    /// Orthonormal-basis coefficients of `field` arranged on the grid layout.
    std::vector<cplx> basis_spectrum(const WaveField& field) const {
        std::vector<cplx> spec = field.amplitudes();
        if (kind_ == BasisKind::box_sine) {
            double scale = 1.0;
            for (int ax = 0; ax < grid_.ndim(); ++ax) {
                scale *= std::sqrt(grid_.axis(ax).length() / 2.0);
                detail::for_each_line(grid_, spec, ax, [&](cplx* line, std::size_t n) {
                    std::vector<cplx> c = sine_analyze(line, n);
                    std::copy(c.begin(), c.end(), line);
                });
            }
            for (cplx& s : spec) s *= scale;
        } else {
            double scale = 1.0;
            for (int ax = 0; ax < grid_.ndim(); ++ax) {
                const Axis& a = grid_.axis(ax);
                scale *= a.spacing() / std::sqrt(a.length());
                Fft plan(a.npoints);
                detail::for_each_line(grid_, spec, ax,
                                      [&](cplx* line, std::size_t) { plan.forward(line); });
            }
            for (cplx& s : spec) s *= scale;
        }
        return spec;
    }

    static std::vector<Mode> keep_above(const ModeExpansion& probe, const std::vector<cplx>& spec,
                                        double drop_tol) {
        double peak = 0.0;
        for (const cplx& c : spec) peak = std::max(peak, std::abs(c));
        require(peak > 0.0, Errc::zero_norm, "cannot expand a zero field");
        std::vector<Mode> kept;
        const Grid& g = probe.grid_;
        for (std::size_t f = 0; f < spec.size(); ++f) {
            if (std::abs(spec[f]) <= drop_tol * peak) continue;
            auto idx = g.unflatten(f);
            Mode m;
            bool valid = true;
            for (int i = 0; i < g.ndim(); ++i) {
                long n = long(g.axis(i).npoints);
                long mi = long(idx[std::size_t(i)]);
                if (probe.kind_ == BasisKind::box_sine) {
                    if (mi < 1) valid = false;
                } else if (mi >= n / 2) {
                    mi -= n;
                }
                m.index[std::size_t(i)] = int(mi);
            }
            if (!valid) continue;
            m.coeff = spec[f];
            kept.push_back(m);
        }
        return kept;
    }

    BasisKind kind_;
    Grid grid_;
    std::array<double, 3> mass_{1, 1, 1};
    std::vector<Mode> modes_;
    std::vector<GaussianPacket> packets_;
};

} // namespace pilotwave
