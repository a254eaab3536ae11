// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/grid.hpp"
#include "pilotwave/modes.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

/// A propagated wave on configuration space: something that can be evaluated
/// (with derivatives) at any point and time inside its validity window, and
/// tabulated onto its grid. All the guidance-level operations run against
/// this interface.
class Evolution {
public:
    virtual ~Evolution() = default;

    virtual const Grid& grid() const = 0;
    virtual const std::array<double, 3>& mass() const = 0;
    int dim() const { return grid().ndim(); }

    /// Amplitude and derivatives at configuration point q, time t.
    /// order 0: psi, 1: +gradient, 2: +Hessian, 3: +d_k d_i d_i thirds.
    virtual PointEval eval(const Vec& q, double t, int order) const = 0;

    /// Guidance velocity dq/dt = j/|psi|^2 and, optionally, the density.
    /// Returns zero velocity at exact nodes; node handling (rejection,
    /// flagging) is the caller's job. The default computes the kinetic
    /// current Im(psi^* grad psi)/(m |psi|^2); handles whose Hamiltonian is
    /// not of kinetic form override this with their own current.
    virtual Vec velocity(const Vec& q, double t, double* density_out = nullptr) const {
        PointEval pe = eval(q, t, 1);
        double rho = std::norm(pe.psi);
        if (density_out) *density_out = rho;
        Vec v = Vec::zero(dim());
        if (rho <= 0.0) return v;
        for (int i = 0; i < dim(); ++i)
            v[i] = std::imag(std::conj(pe.psi) * pe.d1[std::size_t(i)]) /
                   (mass()[std::size_t(i)] * rho);
        return v;
    }

    /// Upper bound for max_q |psi(q,t)|^2, used to scale node thresholds.
    virtual double density_ceiling(double t) const = 0;

    /// Tabulate the field on the grid at time t.
    virtual WaveField field_at(double t) const = 0;

    /// [t_min, t_max] over which this handle is defined.
    virtual std::pair<double, double> time_window() const {
        return {-std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
    }
};

namespace detail {

/// exp(-i alpha m^2 t) for m = m_lo..m_hi via the constant-difference
/// recurrence of quadratic phases (two multiplies per successive m).
inline void quadratic_phases(double alpha, double t, int m_lo, int m_hi, cplx* out) {
    const double a = alpha * t;
    cplx p = std::exp(cplx(0.0, -a * double(m_lo) * double(m_lo)));
    cplx d = std::exp(cplx(0.0, -a * double(2 * m_lo + 1)));
    const cplx s = std::exp(cplx(0.0, -2.0 * a));
    for (int m = m_lo; m <= m_hi; ++m) {
        out[m - m_lo] = p;
        p *= d;
        d *= s;
    }
}

/// sin(m th), cos(m th) for m = 0..m_hi by the Chebyshev recurrence.
inline void harmonics(double th, int m_hi, double* sins, double* coss) {
    double s1 = std::sin(th);
    double c1 = std::cos(th);
    double two_c = 2.0 * c1;
    double sm1 = 0.0, cm1 = 1.0; // m = 0
    sins[0] = 0.0;
    coss[0] = 1.0;
    if (m_hi >= 1) {
        sins[1] = s1;
        coss[1] = c1;
    }
    double sm = s1, cm = c1;
    for (int m = 2; m <= m_hi; ++m) {
        double sn = two_c * sm - sm1;
        double cn = two_c * cm - cm1;
        sm1 = sm;
        cm1 = cm;
        sm = sn;
        cm = cn;
        sins[m] = sn;
        coss[m] = cn;
    }
}

/// exp(i m th) for m = m_lo..m_hi by repeated rotation.
inline void plane_factors(double th, int m_lo, int m_hi, cplx* out) {
    const cplx step = std::exp(cplx(0.0, th));
    cplx p = std::exp(cplx(0.0, th * double(m_lo)));
    for (int m = m_lo; m <= m_hi; ++m) {
        out[m - m_lo] = p;
        p *= step;
    }
}

} // namespace detail

/// Unitary propagation of a discrete superposition of self-Hamiltonian
/// eigenmodes: coefficients rotate as e^{-i E_n t}, evaluation is an analytic
/// mode sum with per-axis factor tables (shared across modes).
class EigenmodeEvolution final : public Evolution {
public:
    explicit EigenmodeEvolution(ModeExpansion expansion) : ex_(std::move(expansion)) {
        require(!ex_.modes().empty(), Errc::invalid_argument, "empty mode expansion");
        const Grid& g = ex_.grid();
        for (int i = 0; i < g.ndim(); ++i) {
            int lo = std::numeric_limits<int>::max();
            int hi = std::numeric_limits<int>::min();
            for (const Mode& m : ex_.modes()) {
                lo = std::min(lo, m.index[std::size_t(i)]);
                hi = std::max(hi, m.index[std::size_t(i)]);
            }
            m_lo_[std::size_t(i)] = lo;
            m_hi_[std::size_t(i)] = hi;
            double base = (ex_.basis() == ModeExpansion::BasisKind::plane_wave ? kTwoPi : kPi) /
                          g.axis(i).length();
            alpha_[std::size_t(i)] = base * base / (2.0 * ex_.mass()[std::size_t(i)]);
            kbase_[std::size_t(i)] = base;
        }
        // Peak-amplitude bound: sum |c_n| max|phi_n| over modes.
        double amp_bound = 0.0;
        for (const Mode& m : ex_.modes()) {
            double peak = 1.0;
            if (ex_.basis() == ModeExpansion::BasisKind::packet) {
                peak = ex_.packet_family()[std::size_t(m.index[0])].value_abs(
                    ex_.packet_family()[std::size_t(m.index[0])].center);
            } else {
                for (int i = 0; i < g.ndim(); ++i) {
                    double L = g.axis(i).length();
                    peak *= ex_.basis() == ModeExpansion::BasisKind::box_sine
                                ? std::sqrt(2.0 / L)
                                : 1.0 / std::sqrt(L);
                }
            }
            amp_bound += std::abs(m.coeff) * peak;
        }
        ceiling_ = amp_bound * amp_bound;
    }

    const ModeExpansion& expansion() const { return ex_; }
    const Grid& grid() const override { return ex_.grid(); }
    const std::array<double, 3>& mass() const override { return ex_.mass(); }
    double density_ceiling(double) const override { return ceiling_; }
    WaveField field_at(double t) const override { return ex_.synthesize(t); }

    PointEval eval(const Vec& q, double t, int order) const override;

private:
    ModeExpansion ex_;
    std::array<int, 3> m_lo_{0, 0, 0};
    std::array<int, 3> m_hi_{0, 0, 0};
    std::array<double, 3> alpha_{0, 0, 0}; ///< E contribution = alpha_i m_i^2
    std::array<double, 3> kbase_{0, 0, 0}; ///< wavenumber = kbase_i * m_i
    double ceiling_ = 0.0;
};

inline PointEval EigenmodeEvolution::eval(const Vec& q, double t, int order) const {
    PointEval out;
    const Grid& g = ex_.grid();
    const int nd = g.ndim();

    if (ex_.basis() == ModeExpansion::BasisKind::packet) {
        for (const Mode& m : ex_.modes()) {
            cplx c = m.coeff * std::exp(cplx(0.0, -m.energy * t));
            auto f = ex_.packet_family()[std::size_t(m.index[0])].factor(q[0], order);
            out.psi += c * f[0];
            if (order >= 1) out.d1[0] += c * f[1];
            if (order >= 2) out.d2[0][0] += c * f[2];
            if (order >= 3) out.d3[0][0] += c * f[3];
        }
        return out;
    }

    const bool is_box = ex_.basis() == ModeExpansion::BasisKind::box_sine;

    // Per-axis tables, reused across calls to avoid per-eval allocation.
    static thread_local std::vector<double> sins[3], coss[3];
    static thread_local std::vector<cplx> waves[3], phases[3];
    for (int i = 0; i < nd; ++i) {
        const int lo = m_lo_[std::size_t(i)];
        const int hi = m_hi_[std::size_t(i)];
        const double xi = q[i] - g.axis(i).lo;
        phases[i].resize(std::size_t(hi - lo) + 1);
        detail::quadratic_phases(alpha_[std::size_t(i)], t, lo, hi, phases[i].data());
        if (is_box) {
            sins[i].resize(std::size_t(hi) + 1);
            coss[i].resize(std::size_t(hi) + 1);
            detail::harmonics(kbase_[std::size_t(i)] * xi, hi, sins[i].data(), coss[i].data());
        } else {
            waves[i].resize(std::size_t(hi - lo) + 1);
            detail::plane_factors(kbase_[std::size_t(i)] * xi, lo, hi, waves[i].data());
        }
    }

    std::array<double, 3> nrm{1, 1, 1};
    for (int i = 0; i < nd; ++i) {
        double L = g.axis(i).length();
        nrm[std::size_t(i)] = is_box ? std::sqrt(2.0 / L) : 1.0 / std::sqrt(L);
    }

    // f[axis][deriv] for the current mode.
    std::array<std::array<cplx, 4>, 3> f{};
    for (const Mode& mode : ex_.modes()) {
        cplx c = mode.coeff;
        for (int i = 0; i < nd; ++i) {
            int mi = mode.index[std::size_t(i)];
            c *= phases[i][std::size_t(mi - m_lo_[std::size_t(i)])];
            double k = kbase_[std::size_t(i)] * double(mi);
            if (is_box) {
                double s = sins[i][std::size_t(mi)];
                double cs = coss[i][std::size_t(mi)];
                f[std::size_t(i)][0] = nrm[std::size_t(i)] * s;
                if (order >= 1) f[std::size_t(i)][1] = nrm[std::size_t(i)] * k * cs;
                if (order >= 2) f[std::size_t(i)][2] = -k * k * f[std::size_t(i)][0];
                if (order >= 3) f[std::size_t(i)][3] = -k * k * f[std::size_t(i)][1];
            } else {
                cplx w = nrm[std::size_t(i)] * waves[i][std::size_t(mi - m_lo_[std::size_t(i)])];
                cplx ik(0.0, k);
                f[std::size_t(i)][0] = w;
                if (order >= 1) f[std::size_t(i)][1] = ik * w;
                if (order >= 2) f[std::size_t(i)][2] = ik * ik * w;
                if (order >= 3) f[std::size_t(i)][3] = ik * ik * ik * w;
            }
        }
        // Assemble tensor products of the per-axis factor derivatives.
        if (nd == 1) {
            out.psi += c * f[0][0];
            if (order >= 1) out.d1[0] += c * f[0][1];
            if (order >= 2) out.d2[0][0] += c * f[0][2];
            if (order >= 3) out.d3[0][0] += c * f[0][3];
            continue;
        }
        if (nd == 2) {
            out.psi += c * f[0][0] * f[1][0];
            if (order >= 1) {
                out.d1[0] += c * f[0][1] * f[1][0];
                out.d1[1] += c * f[0][0] * f[1][1];
            }
            if (order >= 2) {
                out.d2[0][0] += c * f[0][2] * f[1][0];
                out.d2[1][1] += c * f[0][0] * f[1][2];
                cplx cross = c * f[0][1] * f[1][1];
                out.d2[0][1] += cross;
                out.d2[1][0] += cross;
            }
            if (order >= 3) {
                out.d3[0][0] += c * f[0][3] * f[1][0]; // d_x d_x d_x
                out.d3[0][1] += c * f[0][1] * f[1][2]; // d_x d_y d_y
                out.d3[1][0] += c * f[0][2] * f[1][1]; // d_y d_x d_x
                out.d3[1][1] += c * f[0][0] * f[1][3]; // d_y d_y d_y
            }
            continue;
        }
        // nd == 3
        out.psi += c * f[0][0] * f[1][0] * f[2][0];
        if (order >= 1) {
            out.d1[0] += c * f[0][1] * f[1][0] * f[2][0];
            out.d1[1] += c * f[0][0] * f[1][1] * f[2][0];
            out.d1[2] += c * f[0][0] * f[1][0] * f[2][1];
        }
        if (order >= 2) {
            out.d2[0][0] += c * f[0][2] * f[1][0] * f[2][0];
            out.d2[1][1] += c * f[0][0] * f[1][2] * f[2][0];
            out.d2[2][2] += c * f[0][0] * f[1][0] * f[2][2];
            cplx c01 = c * f[0][1] * f[1][1] * f[2][0];
            cplx c02 = c * f[0][1] * f[1][0] * f[2][1];
            cplx c12 = c * f[0][0] * f[1][1] * f[2][1];
            out.d2[0][1] += c01;
            out.d2[1][0] += c01;
            out.d2[0][2] += c02;
            out.d2[2][0] += c02;
            out.d2[1][2] += c12;
            out.d2[2][1] += c12;
        }
        if (order >= 3) {
            out.d3[0][0] += c * f[0][3] * f[1][0] * f[2][0];
            out.d3[0][1] += c * f[0][1] * f[1][2] * f[2][0];
            out.d3[0][2] += c * f[0][1] * f[1][0] * f[2][2];
            out.d3[1][0] += c * f[0][2] * f[1][1] * f[2][0];
            out.d3[1][1] += c * f[0][0] * f[1][3] * f[2][0];
            out.d3[1][2] += c * f[0][0] * f[1][1] * f[2][2];
            out.d3[2][0] += c * f[0][2] * f[1][0] * f[2][1];
            out.d3[2][1] += c * f[0][0] * f[1][2] * f[2][1];
            out.d3[2][2] += c * f[0][0] * f[1][0] * f[2][3];
        }
    }
    return out;
}

/// Tensor product of independent evolutions on disjoint axis blocks; the
/// joint wave is the product of the factor waves for all time (no
/// entanglement between blocks).
class ProductEvolution final : public Evolution {
public:
    explicit ProductEvolution(std::vector<std::shared_ptr<const Evolution>> factors)
        : factors_(std::move(factors)) {
        require(!factors_.empty(), Errc::invalid_argument, "product needs factors");
        std::vector<Axis> axes;
        int off = 0;
        for (const auto& f : factors_) {
            offsets_.push_back(off);
            for (int i = 0; i < f->dim(); ++i) {
                axes.push_back(f->grid().axis(i));
                mass_[std::size_t(off + i)] = f->mass()[std::size_t(i)];
            }
            off += f->dim();
        }
        require(off <= 3, Errc::invalid_argument, "product exceeds three axes");
        grid_ = Grid(std::move(axes));
    }

    const Grid& grid() const override { return grid_; }
    const std::array<double, 3>& mass() const override { return mass_; }

    std::pair<double, double> time_window() const override {
        auto w = factors_[0]->time_window();
        for (const auto& f : factors_) {
            auto v = f->time_window();
            w.first = std::max(w.first, v.first);
            w.second = std::min(w.second, v.second);
        }
        return w;
    }

    double density_ceiling(double t) const override {
        double c = 1.0;
        for (const auto& f : factors_) c *= f->density_ceiling(t);
        return c;
    }

    WaveField field_at(double t) const override {
        std::vector<WaveField> parts;
        parts.reserve(factors_.size());
        for (const auto& f : factors_) parts.push_back(f->field_at(t));
        WaveField out(grid_, mass_, t);
        const std::size_t total = grid_.size();
        for (std::size_t f = 0; f < total; ++f) {
            auto idx = grid_.unflatten(f);
            cplx v(1.0, 0.0);
            for (std::size_t a = 0; a < factors_.size(); ++a) {
                const Grid& fg = parts[a].grid();
                std::array<std::size_t, 3> sub{0, 0, 0};
                for (int i = 0; i < fg.ndim(); ++i)
                    sub[std::size_t(i)] = idx[std::size_t(offsets_[a] + i)];
                v *= parts[a][fg.flatten(sub)];
            }
            out[f] = v;
        }
        return out;
    }

    PointEval eval(const Vec& q, double t, int order) const override {
        const std::size_t nf = factors_.size();
        std::array<PointEval, 3> pe;
        for (std::size_t a = 0; a < nf; ++a)
            pe[a] = factors_[a]->eval(sub_point(q, a), t, order);

        auto factor_of = [&](int axis) {
            for (std::size_t a = nf; a-- > 0;)
                if (axis >= offsets_[a]) return a;
            return std::size_t(0);
        };
        auto rest = [&](std::size_t skip_a, std::size_t skip_b) {
            cplx r(1.0, 0.0);
            for (std::size_t a = 0; a < nf; ++a)
                if (a != skip_a && a != skip_b) r *= pe[a].psi;
            return r;
        };

        PointEval out;
        out.psi = rest(nf, nf);
        if (order >= 1) {
            for (int i = 0; i < dim(); ++i) {
                std::size_t a = factor_of(i);
                out.d1[std::size_t(i)] =
                    pe[a].d1[std::size_t(i - offsets_[a])] * rest(a, nf);
            }
        }
        if (order >= 2) {
            for (int i = 0; i < dim(); ++i)
                for (int j = 0; j < dim(); ++j) {
                    std::size_t a = factor_of(i), b = factor_of(j);
                    if (a == b)
                        out.d2[std::size_t(i)][std::size_t(j)] =
                            pe[a].d2[std::size_t(i - offsets_[a])][std::size_t(j - offsets_[a])] *
                            rest(a, nf);
                    else
                        out.d2[std::size_t(i)][std::size_t(j)] =
                            pe[a].d1[std::size_t(i - offsets_[a])] *
                            pe[b].d1[std::size_t(j - offsets_[b])] * rest(a, b);
                }
        }
        if (order >= 3) {
            for (int k = 0; k < dim(); ++k)
                for (int i = 0; i < dim(); ++i) {
                    std::size_t a = factor_of(k), b = factor_of(i);
                    if (a == b)
                        out.d3[std::size_t(k)][std::size_t(i)] =
                            pe[a].d3[std::size_t(k - offsets_[a])][std::size_t(i - offsets_[a])] *
                            rest(a, nf);
                    else
                        out.d3[std::size_t(k)][std::size_t(i)] =
                            pe[a].d1[std::size_t(k - offsets_[a])] *
                            pe[b].d2[std::size_t(i - offsets_[b])][std::size_t(i - offsets_[b])] *
                            rest(a, b);
                }
        }
        return out;
    }

private:
    Vec sub_point(const Vec& q, std::size_t a) const {
        Vec s = Vec::zero(factors_[a]->dim());
        for (int i = 0; i < s.dim; ++i) s[i] = q[offsets_[a] + i];
        return s;
    }

    std::vector<std::shared_ptr<const Evolution>> factors_;
    std::vector<int> offsets_;
    Grid grid_;
    std::array<double, 3> mass_{1, 1, 1};
};

/// Phase rotation of a discrete expansion over a time step (the eigenmode
/// propagation step as a grid-level operation).
inline ModeExpansion evolve_modes(const ModeExpansion& expansion, double dt) {
    return expansion.evolved(dt);
}

} // namespace pilotwave
