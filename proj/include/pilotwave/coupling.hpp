// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/evolution.hpp"
#include "pilotwave/grid.hpp"
#include "pilotwave/modes.hpp"

namespace pilotwave {

/// A scalar function of the system coordinate acting as a multiplication
/// operator (the measured quantity for continuous-spectrum couplings).
struct ScalarObservable {
    std::function<double(double)> value;
    std::function<double(double)> slope;

    static ScalarObservable position() {
        return {[](double x) { return x; }, [](double) { return 1.0; }};
    }

    /// Indicator of [lo, hi] smoothed over width s (error-function shoulders).
    static ScalarObservable smoothed_indicator(double lo, double hi, double s) {
        return {[=](double x) {
                    return 0.5 * (std::erf((x - lo) / (std::sqrt(2.0) * s)) -
                                  std::erf((x - hi) / (std::sqrt(2.0) * s)));
                },
                [=](double x) {
                    const double c = 1.0 / (std::sqrt(kTwoPi) * s);
                    auto sq = [](double u) { return u * u; };
                    return c * (std::exp(-0.5 * sq((x - lo) / s)) -
                                std::exp(-0.5 * sq((x - hi) / s)));
                }};
    }
};

namespace detail {

/// Prefix overlap F_nm(x) = integral from the domain edge of phi_n phi_m^*.
/// Closed forms per basis; the plane-wave form uses the mean-free primitive
/// (the choice that reproduces the symmetrized operator current).
inline cplx pair_prefix(const ModeExpansion& ex, int n_index, int m_index, double x) {
    const Axis& ax = ex.grid().axis(0);
    const double xi = x - ax.lo;
    const double L = ax.length();
    switch (ex.basis()) {
    case ModeExpansion::BasisKind::box_sine: {
        double mu = kPi / L;
        double d = double(n_index - m_index);
        double s = double(n_index + m_index);
        return cplx((std::sin(d * mu * xi) / (d * mu) - std::sin(s * mu * xi) / (s * mu)) / L,
                    0.0);
    }
    case ModeExpansion::BasisKind::plane_wave: {
        double dk = kTwoPi * double(n_index - m_index) / L;
        return std::exp(cplx(0.0, dk * xi)) / (cplx(0.0, dk) * L);
    }
    case ModeExpansion::BasisKind::packet:
        // Packet families are far-separated by construction; distinct packets
        // have negligible overlap everywhere.
        return cplx(0.0, 0.0);
    }
    return cplx(0.0, 0.0);
}

} // namespace detail

/// Impulsive measurement interaction H = a * omega * p_y between a 1-D system
/// with a discrete measured spectrum and a 1-D pointer (system self-evolution
/// suppressed during the window). The joint wave is the exactly advected
/// superposition
///   Psi(x, y, t) = sum_n c_n phi_n(x) g0(y - a w_n t),  t in [0, tau],
/// and the guidance velocity comes from the conserved current of this
/// Hamiltonian: the pointer component transports each branch at a w_n, while
/// the system component is the pair term that keeps the continuity equation
/// exact while branches still overlap on the pointer axis.
class CouplingEvolution final : public Evolution {
public:
    CouplingEvolution(ModeExpansion system, GaussianPacket pointer, Axis pointer_axis,
                      double strength, double tau)
        : sys_(std::move(system)), g0_(pointer), strength_(strength), tau_(tau) {
        require(sys_.grid().ndim() == 1, Errc::invalid_argument, "coupled system must be 1-D");
        require(g0_.momentum == 0.0, Errc::invalid_argument,
                "pointer packet must start at rest");
        require(tau_ > 0, Errc::invalid_argument, "coupling window must be positive");
        std::vector<Axis> axes{sys_.grid().axis(0), pointer_axis};
        grid_ = Grid(std::move(axes));
        mass_ = {sys_.mass()[0], std::numeric_limits<double>::infinity(), 1.0};
        // The pointer must stay clear of its grid edge for the whole window.
        double wmax = 0.0;
        for (const Mode& m : sys_.modes()) wmax = std::max(wmax, std::abs(m.eigenvalue));
        double reach = std::abs(strength_) * wmax * tau_ + 6.0 * g0_.sigma;
        require(g0_.center - reach > pointer_axis.lo && g0_.center + reach < pointer_axis.hi,
                Errc::pointer_overflow, "pointer excursion would leave the pointer grid");
    }

    const ModeExpansion& system() const { return sys_; }
    const GaussianPacket& pointer() const { return g0_; }
    double strength() const { return strength_; }
    double tau() const { return tau_; }

    const Grid& grid() const override { return grid_; }
    const std::array<double, 3>& mass() const override { return mass_; }
    std::pair<double, double> time_window() const override { return {0.0, tau_}; }

    double density_ceiling(double) const override {
        double amp = 0.0;
        double gpk = g0_.value_abs(g0_.center);
        for (const Mode& m : sys_.modes())
            amp += std::abs(m.coeff) * mode_peak(sys_, m) * gpk;
        return amp * amp;
    }

    PointEval eval(const Vec& q, double t, int order) const override {
        PointEval out;
        const std::vector<Mode>& modes = sys_.modes();
        for (std::size_t n = 0; n < modes.size(); ++n) {
            std::array<cplx, 4> fx = system_factor(q[0], n, order);
            GaussianPacket gn = g0_;
            gn.center = g0_.center + strength_ * modes[n].eigenvalue * t;
            std::array<cplx, 4> fy = gn.factor(q[1], order);
            cplx c = modes[n].coeff;
            out.psi += c * fx[0] * fy[0];
            if (order >= 1) {
                out.d1[0] += c * fx[1] * fy[0];
                out.d1[1] += c * fx[0] * fy[1];
            }
            if (order >= 2) {
                out.d2[0][0] += c * fx[2] * fy[0];
                out.d2[1][1] += c * fx[0] * fy[2];
                cplx cross = c * fx[1] * fy[1];
                out.d2[0][1] += cross;
                out.d2[1][0] += cross;
            }
            if (order >= 3) {
                out.d3[0][0] += c * fx[3] * fy[0];
                out.d3[0][1] += c * fx[1] * fy[2];
                out.d3[1][0] += c * fx[2] * fy[1];
                out.d3[1][1] += c * fx[0] * fy[3];
            }
        }
        return out;
    }

    Vec velocity(const Vec& q, double t, double* density_out = nullptr) const override {
        const std::vector<Mode>& modes = sys_.modes();
        const std::size_t M = modes.size();
        static thread_local std::vector<cplx> phi;
        static thread_local std::vector<double> g, gp, u;
        phi.resize(M);
        g.resize(M);
        gp.resize(M);
        u.resize(M);
        for (std::size_t n = 0; n < M; ++n) {
            phi[n] = system_factor(q[0], n, 0)[0];
            u[n] = strength_ * modes[n].eigenvalue;
            double yc = g0_.center + u[n] * t;
            GaussianPacket gn = g0_;
            gn.center = yc;
            auto fy = gn.factor(q[1], 1);
            g[n] = std::real(fy[0]);
            gp[n] = std::real(fy[1]);
        }
        cplx S(0, 0), T(0, 0);
        for (std::size_t n = 0; n < M; ++n) {
            cplx an = modes[n].coeff * phi[n];
            S += an * g[n];
            T += an * (u[n] * g[n]);
        }
        double rho = std::norm(S);
        if (density_out) *density_out = rho;
        Vec v = Vec::zero(2);
        if (rho <= 0.0) return v;
        double jy = std::real(T * std::conj(S));
        double jx = 0.0;
        for (std::size_t n = 0; n < M; ++n)
            for (std::size_t m = n + 1; m < M; ++m) {
                if (u[n] == u[m]) continue;
                double bracket = gp[n] * g[m] - g[n] * gp[m];
                // The pair density phi_n phi_m^* is already integrated inside
                // the prefix; only the coefficients multiply it.
                cplx overlap = modes[n].coeff * std::conj(modes[m].coeff) *
                               detail::pair_prefix(sys_, modes[n].index[0], modes[m].index[0],
                                                   q[0]);
                jx += (u[n] - u[m]) * bracket * std::real(overlap);
            }
        v[0] = jx / rho;
        v[1] = jy / rho;
        return v;
    }

    WaveField field_at(double t) const override {
        require(t > -1e-12 && t < tau_ * (1.0 + 1e-12), Errc::invalid_argument,
                "coupling window exceeded");
        WaveField out(grid_, mass_, t);
        const std::size_t nx = grid_.axis(0).npoints;
        const std::size_t ny = grid_.axis(1).npoints;
        const std::vector<Mode>& modes = sys_.modes();
        for (std::size_t n = 0; n < modes.size(); ++n) {
            GaussianPacket gn = g0_;
            gn.center = g0_.center + strength_ * modes[n].eigenvalue * t;
            for (std::size_t j = 0; j < nx; ++j) {
                cplx fx = modes[n].coeff * system_factor(grid_.coord(0, j), n, 0)[0];
                if (std::norm(fx) < 1e-300) continue;
                for (std::size_t l = 0; l < ny; ++l)
                    out[j * ny + l] += fx * gn.factor(grid_.coord(1, l), 0)[0];
            }
        }
        return out;
    }

private:
    static double mode_peak(const ModeExpansion& ex, const Mode& m) {
        switch (ex.basis()) {
        case ModeExpansion::BasisKind::box_sine:
            return std::sqrt(2.0 / ex.grid().axis(0).length());
        case ModeExpansion::BasisKind::plane_wave:
            return 1.0 / std::sqrt(ex.grid().axis(0).length());
        case ModeExpansion::BasisKind::packet: {
            const GaussianPacket& p = ex.packet_family()[std::size_t(m.index[0])];
            return p.value_abs(p.center);
        }
        }
        return 1.0;
    }

    std::array<cplx, 4> system_factor(double x, std::size_t n, int order) const {
        const Mode& m = sys_.modes()[n];
        if (sys_.basis() == ModeExpansion::BasisKind::packet)
            return sys_.packet_family()[std::size_t(m.index[0])].factor(x, order);
        const Axis& ax = sys_.grid().axis(0);
        double xi = x - ax.lo;
        std::array<cplx, 4> f{};
        if (sys_.basis() == ModeExpansion::BasisKind::box_sine) {
            double mu = double(m.index[0]) * kPi / ax.length();
            double nrm = std::sqrt(2.0 / ax.length());
            f[0] = nrm * std::sin(mu * xi);
            if (order >= 1) f[1] = nrm * mu * std::cos(mu * xi);
            if (order >= 2) f[2] = -mu * mu * f[0];
            if (order >= 3) f[3] = -mu * mu * f[1];
        } else {
            double k = kTwoPi * double(m.index[0]) / ax.length();
            cplx w = std::exp(cplx(0.0, k * xi)) / std::sqrt(ax.length());
            cplx ik(0.0, k);
            f[0] = w;
            if (order >= 1) f[1] = ik * w;
            if (order >= 2) f[2] = ik * ik * w;
            if (order >= 3) f[3] = ik * ik * ik * w;
        }
        return f;
    }

    ModeExpansion sys_;
    GaussianPacket g0_;
    double strength_;
    double tau_;
    Grid grid_;
    std::array<double, 3> mass_{1, 1, 1};
};

/// Post-coupling free flight of an entangled branch sum:
///   Psi(x, y, t) = sum_n c_n phi_n(x, t) G_n(y, t)
/// with phi_n the resumed system factor (eigenmode phases for box/plane
/// bases, free-spreading packets for packet bases) and G_n the released
/// pointer packet for branch n (free spreading at the pointer mass, frozen
/// when that mass is infinite). The Hamiltonian is back to standard kinetic
/// form, so the base-class current applies.
class BranchSumEvolution final : public Evolution {
public:
    BranchSumEvolution(ModeExpansion system, std::vector<GaussianPacket> pointer_packets,
                       Axis pointer_axis, double pointer_mass, double t_start)
        : sys_(std::move(system)), pointers_(std::move(pointer_packets)),
          pointer_mass_(pointer_mass), t0_(t_start) {
        require(sys_.grid().ndim() == 1, Errc::invalid_argument, "branch sum system must be 1-D");
        require(pointers_.size() == sys_.modes().size(), Errc::invalid_argument,
                "one pointer packet per branch");
        std::vector<Axis> axes{sys_.grid().axis(0), pointer_axis};
        grid_ = Grid(std::move(axes));
        mass_ = {sys_.mass()[0], pointer_mass_, 1.0};
    }

    const Grid& grid() const override { return grid_; }
    const std::array<double, 3>& mass() const override { return mass_; }
    std::pair<double, double> time_window() const override {
        return {t0_, std::numeric_limits<double>::infinity()};
    }

    double density_ceiling(double t) const override {
        double amp = 0.0;
        for (std::size_t n = 0; n < pointers_.size(); ++n) {
            double gpk = std::pow(kTwoPi * pointers_[n].free_sigma(t - t0_, pointer_mass_) *
                                      pointers_[n].free_sigma(t - t0_, pointer_mass_),
                                  -0.25);
            amp += std::abs(sys_.modes()[n].coeff) * system_peak(n) * gpk;
        }
        return amp * amp;
    }

    PointEval eval(const Vec& q, double t, int order) const override {
        PointEval out;
        const double dt = t - t0_;
        const std::vector<Mode>& modes = sys_.modes();
        for (std::size_t n = 0; n < modes.size(); ++n) {
            std::array<cplx, 4> fx = system_factor(q[0], n, dt, order);
            std::array<cplx, 4> fy = pointers_[n].free_factor(q[1], dt, pointer_mass_, order);
            cplx c = modes[n].coeff;
            out.psi += c * fx[0] * fy[0];
            if (order >= 1) {
                out.d1[0] += c * fx[1] * fy[0];
                out.d1[1] += c * fx[0] * fy[1];
            }
            if (order >= 2) {
                out.d2[0][0] += c * fx[2] * fy[0];
                out.d2[1][1] += c * fx[0] * fy[2];
                cplx cross = c * fx[1] * fy[1];
                out.d2[0][1] += cross;
                out.d2[1][0] += cross;
            }
            if (order >= 3) {
                out.d3[0][0] += c * fx[3] * fy[0];
                out.d3[0][1] += c * fx[1] * fy[2];
                out.d3[1][0] += c * fx[2] * fy[1];
                out.d3[1][1] += c * fx[0] * fy[3];
            }
        }
        return out;
    }

    WaveField field_at(double t) const override {
        WaveField out(grid_, mass_, t);
        const std::size_t nx = grid_.axis(0).npoints;
        const std::size_t ny = grid_.axis(1).npoints;
        const double dt = t - t0_;
        for (std::size_t n = 0; n < sys_.modes().size(); ++n) {
            for (std::size_t j = 0; j < nx; ++j) {
                cplx fx = sys_.modes()[n].coeff *
                          system_factor(grid_.coord(0, j), n, dt, 0)[0];
                if (std::norm(fx) < 1e-300) continue;
                for (std::size_t l = 0; l < ny; ++l)
                    out[j * ny + l] +=
                        fx * pointers_[n].free_factor(grid_.coord(1, l), dt, pointer_mass_, 0)[0];
            }
        }
        return out;
    }

private:
    double system_peak(std::size_t n) const {
        const Mode& m = sys_.modes()[n];
        switch (sys_.basis()) {
        case ModeExpansion::BasisKind::box_sine:
            return std::sqrt(2.0 / sys_.grid().axis(0).length());
        case ModeExpansion::BasisKind::plane_wave:
            return 1.0 / std::sqrt(sys_.grid().axis(0).length());
        case ModeExpansion::BasisKind::packet: {
            const GaussianPacket& p = sys_.packet_family()[std::size_t(m.index[0])];
            return std::pow(kTwoPi * p.sigma * p.sigma, -0.25);
        }
        }
        return 1.0;
    }

    std::array<cplx, 4> system_factor(double x, std::size_t n, double dt, int order) const {
        const Mode& m = sys_.modes()[n];
        if (sys_.basis() == ModeExpansion::BasisKind::packet)
            return sys_.packet_family()[std::size_t(m.index[0])].free_factor(x, dt,
                                                                             sys_.mass()[0], order);
        const Axis& ax = sys_.grid().axis(0);
        double xi = x - ax.lo;
        cplx phase = std::exp(cplx(0.0, -m.energy * dt));
        std::array<cplx, 4> f{};
        if (sys_.basis() == ModeExpansion::BasisKind::box_sine) {
            double mu = double(m.index[0]) * kPi / ax.length();
            double nrm = std::sqrt(2.0 / ax.length());
            f[0] = phase * nrm * std::sin(mu * xi);
            if (order >= 1) f[1] = phase * nrm * mu * std::cos(mu * xi);
            if (order >= 2) f[2] = -mu * mu * f[0];
            if (order >= 3) f[3] = -mu * mu * f[1];
        } else {
            double k = kTwoPi * double(m.index[0]) / ax.length();
            cplx w = phase * std::exp(cplx(0.0, k * xi)) / std::sqrt(ax.length());
            cplx ik(0.0, k);
            f[0] = w;
            if (order >= 1) f[1] = ik * w;
            if (order >= 2) f[2] = ik * ik * w;
            if (order >= 3) f[3] = ik * ik * ik * w;
        }
        return f;
    }

    ModeExpansion sys_;
    std::vector<GaussianPacket> pointers_;
    double pointer_mass_;
    double t0_;
    Grid grid_;
    std::array<double, 3> mass_{1, 1, 1};
};

/// Impulsive coupling to a continuous-spectrum multiplication operator w(x):
///   Psi(x, y, t) = psi0(x) g0(y - a w(x) t),
/// the exact solution when the system factor is frozen. The conserved current
/// is j = (0, a w(x) rho): system configurations do not move during the
/// window and the pointer advects at a w(x).
class AdvectionEvolution final : public Evolution {
public:
    AdvectionEvolution(std::shared_ptr<const Evolution> system, double system_time,
                       ScalarObservable observable, GaussianPacket pointer, Axis pointer_axis,
                       double strength, double tau)
        : sys_(std::move(system)), sys_time_(system_time), obs_(std::move(observable)),
          g0_(pointer), strength_(strength), tau_(tau) {
        require(sys_->dim() == 1, Errc::invalid_argument, "coupled system must be 1-D");
        require(g0_.momentum == 0.0, Errc::invalid_argument,
                "pointer packet must start at rest");
        std::vector<Axis> axes{sys_->grid().axis(0), pointer_axis};
        grid_ = Grid(std::move(axes));
        mass_ = {sys_->mass()[0], std::numeric_limits<double>::infinity(), 1.0};
        // Pointer overflow check against the observable range on the grid.
        double wmax = 0.0;
        const Axis& sax = sys_->grid().axis(0);
        for (std::size_t j = 0; j < sax.npoints; ++j)
            wmax = std::max(wmax, std::abs(obs_.value(sax.lo + double(j) * sax.spacing())));
        double reach = std::abs(strength_) * wmax * tau_ + 6.0 * g0_.sigma;
        require(g0_.center - reach > pointer_axis.lo && g0_.center + reach < pointer_axis.hi,
                Errc::pointer_overflow, "pointer excursion would leave the pointer grid");
    }

    const ScalarObservable& observable() const { return obs_; }
    double strength() const { return strength_; }
    double tau() const { return tau_; }

    const Grid& grid() const override { return grid_; }
    const std::array<double, 3>& mass() const override { return mass_; }
    std::pair<double, double> time_window() const override { return {0.0, tau_}; }

    double density_ceiling(double) const override {
        double gpk = g0_.value_abs(g0_.center);
        return sys_->density_ceiling(sys_time_) * gpk * gpk;
    }

    PointEval eval(const Vec& q, double t, int order) const override {
        require(order <= 1, Errc::invalid_argument,
                "advection coupling supports derivatives up to first order");
        PointEval s = sys_->eval(Vec::of(q[0]), sys_time_, order);
        double w = obs_.value(q[0]);
        GaussianPacket gw = g0_;
        gw.center = g0_.center + strength_ * w * t;
        std::array<cplx, 4> fy = gw.factor(q[1], order);
        PointEval out;
        out.psi = s.psi * fy[0];
        if (order >= 1) {
            // d/dx hits both the system factor and the advected argument.
            double wp = obs_.slope(q[0]);
            out.d1[0] = s.d1[0] * fy[0] - s.psi * fy[1] * (strength_ * wp * t);
            out.d1[1] = s.psi * fy[1];
        }
        return out;
    }

    Vec velocity(const Vec& q, double t, double* density_out = nullptr) const override {
        if (density_out) {
            PointEval pe = eval(q, t, 0);
            *density_out = std::norm(pe.psi);
        }
        Vec v = Vec::zero(2);
        v[0] = 0.0;
        v[1] = strength_ * obs_.value(q[0]);
        return v;
    }

    WaveField field_at(double t) const override {
        require(t > -1e-12 && t < tau_ * (1.0 + 1e-12), Errc::invalid_argument,
                "coupling window exceeded");
        WaveField sys_field = sys_->field_at(sys_time_);
        WaveField out(grid_, mass_, t);
        const std::size_t nx = grid_.axis(0).npoints;
        const std::size_t ny = grid_.axis(1).npoints;
        for (std::size_t j = 0; j < nx; ++j) {
            cplx fx = sys_field[j];
            if (std::norm(fx) < 1e-300) continue;
            GaussianPacket gw = g0_;
            gw.center = g0_.center + strength_ * obs_.value(grid_.coord(0, j)) * t;
            for (std::size_t l = 0; l < ny; ++l)
                out[j * ny + l] = fx * gw.factor(grid_.coord(1, l), 0)[0];
        }
        return out;
    }

private:
    std::shared_ptr<const Evolution> sys_;
    double sys_time_;
    ScalarObservable obs_;
    GaussianPacket g0_;
    double strength_;
    double tau_;
    Grid grid_;
    std::array<double, 3> mass_{1, 1, 1};
};

/// Exactly advected joint field of a discrete-spectrum impulsive coupling at
/// time t (grid-level operation).
inline WaveField evolve_coupling(const ModeExpansion& system, const GaussianPacket& pointer,
                                 const Axis& pointer_axis, double strength, double tau,
                                 double t) {
    CouplingEvolution ev(system, pointer, pointer_axis, strength, tau);
    return ev.field_at(t);
}

} // namespace pilotwave
