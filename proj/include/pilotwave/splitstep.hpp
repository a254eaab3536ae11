// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <list>
#include <map>
#include <mutex>
#include <vector>

#include "pilotwave/common.hpp"
#include "pilotwave/evolution.hpp"
#include "pilotwave/potential.hpp"
#include "pilotwave/wavefield.hpp"

namespace pilotwave {

/// Kinetic phase advance per step at the grid Nyquist wavenumber; the
/// resolution sanity number behind the CFL warning.
inline double nyquist_kinetic_phase(const Grid& grid, const std::array<double, 3>& mass,
                                    double dt) {
    double e = 0.0;
    for (int i = 0; i < grid.ndim(); ++i) {
        double knyq = kPi / grid.axis(i).spacing();
        e += knyq * knyq / (2.0 * mass[std::size_t(i)]);
    }
    return e * dt;
}

/// Strang split-operator propagation on a periodic grid with a fixed field
/// step. Snapshots at past steps are cached (bounded LRU) so trajectory
/// integrators can ask for the field at arbitrary times: the engine replays
/// whole steps from the nearest cached snapshot and finishes with one partial
/// Strang sub-step for the remainder. Off-grid evaluation is trigonometric
/// (never polynomial), through a pruned spectrum of the snapshot.
class SplitStepEvolution final : public Evolution {
public:
    SplitStepEvolution(WaveField initial, PotentialSpec potential, double dt,
                       std::size_t cache_capacity = 64)
        : base_(std::move(initial)), dt_(dt), cache_capacity_(std::max<std::size_t>(2, cache_capacity)) {
        require(dt_ > 0, Errc::invalid_argument, "field step must be positive");
        const Grid& g = base_.grid();
        for (int i = 0; i < g.ndim(); ++i)
            require(g.axis(i).boundary == Boundary::periodic, Errc::boundary_unsupported,
                    "split-operator stepping needs periodic axes");
        vtab_ = potential.tabulate(g);
        kin_.resize(g.size());
        for (std::size_t f = 0; f < g.size(); ++f) {
            auto idx = g.unflatten(f);
            double e = 0.0;
            for (int i = 0; i < g.ndim(); ++i) {
                double k = kTwoPi * fourier_mode(idx[std::size_t(i)], g.axis(i).npoints) /
                           g.axis(i).length();
                e += k * k / (2.0 * base_.mass()[std::size_t(i)]);
            }
            kin_[f] = e;
        }
        for (int i = 0; i < g.ndim(); ++i) plans_.emplace_back(g.axis(i).npoints);
        nyquist_phase_ = nyquist_kinetic_phase(g, base_.mass(), dt_);
        cache_.emplace(0, base_.amplitudes()); // step 0 is pinned, never evicted
    }

    /// True when the kinetic phase at Nyquist exceeds pi per step: the step
    /// is too coarse for the finest representable oscillation.
    bool cfl_warning() const { return nyquist_phase_ > kPi; }
    double nyquist_phase_per_step() const { return nyquist_phase_; }
    double field_step() const { return dt_; }

    const Grid& grid() const override { return base_.grid(); }
    const std::array<double, 3>& mass() const override { return base_.mass(); }

    std::pair<double, double> time_window() const override {
        return {base_.time(), std::numeric_limits<double>::infinity()};
    }

    double density_ceiling(double t) const override {
        std::lock_guard<std::mutex> lock(mu_);
        // Norm is conserved; use the tabulated max at the nearest whole step
        // with a spread allowance for the partial remainder.
        long k = step_index(t);
        const std::vector<cplx>& amp = step_amplitudes(k);
        double m = 0.0;
        for (const cplx& a : amp) m = std::max(m, std::norm(a));
        return 2.0 * m + 1e-300;
    }

    WaveField field_at(double t) const override {
        std::lock_guard<std::mutex> lock(mu_);
        return field_at_locked(t);
    }

    PointEval eval(const Vec& q, double t, int order) const override {
        std::lock_guard<std::mutex> lock(mu_);
        const Spectrum& spec = spectrum_at(t);
        PointEval out;
        const Grid& g = base_.grid();
        const int nd = g.ndim();
        std::array<double, 3> xi{0, 0, 0};
        for (int i = 0; i < nd; ++i) xi[std::size_t(i)] = q[i] - g.axis(i).lo;
        for (const auto& term : spec.terms) {
            double phase = 0.0;
            for (int i = 0; i < nd; ++i) phase += term.k[std::size_t(i)] * xi[std::size_t(i)];
            cplx v = term.c * std::exp(cplx(0.0, phase));
            out.psi += v;
            if (order >= 1)
                for (int i = 0; i < nd; ++i)
                    out.d1[std::size_t(i)] += cplx(0.0, term.k[std::size_t(i)]) * v;
            if (order >= 2)
                for (int i = 0; i < nd; ++i)
                    for (int j = 0; j < nd; ++j)
                        out.d2[std::size_t(i)][std::size_t(j)] -=
                            term.k[std::size_t(i)] * term.k[std::size_t(j)] * v;
            if (order >= 3)
                for (int k2 = 0; k2 < nd; ++k2)
                    for (int i = 0; i < nd; ++i)
                        out.d3[std::size_t(k2)][std::size_t(i)] -=
                            cplx(0.0, term.k[std::size_t(k2)] * term.k[std::size_t(i)] *
                                          term.k[std::size_t(i)]) *
                            v;
        }
        return out;
    }

private:
    struct SpectrumTerm {
        std::array<double, 3> k{0, 0, 0};
        cplx c{0, 0};
    };
    struct Spectrum {
        std::vector<SpectrumTerm> terms;
    };

    long step_index(double t) const {
        double u = (t - base_.time()) / dt_;
        require(u > -1e-9, Errc::invalid_argument, "time precedes the initial field");
        long k = long(u + 1e-9);
        return k;
    }

    void kick(std::vector<cplx>& amp, double dt) const {
        for (std::size_t f = 0; f < amp.size(); ++f)
            amp[f] *= std::exp(cplx(0.0, -vtab_[f] * dt));
    }

    void drift(std::vector<cplx>& amp, double dt) const {
        const Grid& g = base_.grid();
        for (int ax = 0; ax < g.ndim(); ++ax)
            detail::for_each_line(g, amp, ax,
                                  [&](cplx* line, std::size_t) { plans_[std::size_t(ax)].forward(line); });
        for (std::size_t f = 0; f < amp.size(); ++f)
            amp[f] *= std::exp(cplx(0.0, -kin_[f] * dt));
        for (int ax = 0; ax < g.ndim(); ++ax)
            detail::for_each_line(g, amp, ax,
                                  [&](cplx* line, std::size_t) { plans_[std::size_t(ax)].inverse(line); });
    }

    void strang(std::vector<cplx>& amp, double dt) const {
        kick(amp, 0.5 * dt);
        drift(amp, dt);
        kick(amp, 0.5 * dt);
    }

    /// Amplitudes at whole step k, replaying from the nearest cached step.
    const std::vector<cplx>& step_amplitudes(long k) const {
        auto hit = cache_.find(k);
        if (hit != cache_.end()) {
            touch(k);
            return hit->second;
        }
        // Nearest cached step at or below k (step 0 is always present).
        auto it = cache_.upper_bound(k);
        --it;
        std::vector<cplx> amp = it->second;
        for (long s = it->first; s < k; ++s) strang(amp, dt_);
        auto ins = cache_.emplace(k, std::move(amp)).first;
        lru_.push_back(k);
        evict();
        return ins->second;
    }

    WaveField field_at_locked(double t) const {
        long k = step_index(t);
        double rem = t - base_.time() - double(k) * dt_;
        WaveField out(base_.grid(), base_.mass(), t);
        out.amplitudes() = step_amplitudes(k);
        if (std::abs(rem) > 1e-12 * dt_) strang(out.amplitudes(), rem);
        return out;
    }

    const Spectrum& spectrum_at(double t) const {
        long k = step_index(t);
        double rem = t - base_.time() - double(k) * dt_;
        SpecKey key{k, rem};
        auto hit = spectra_.find(key);
        if (hit != spectra_.end()) return hit->second;

        WaveField f = field_at_locked(t);
        std::vector<cplx> amp = f.amplitudes();
        const Grid& g = base_.grid();
        for (int ax = 0; ax < g.ndim(); ++ax)
            detail::for_each_line(g, amp, ax,
                                  [&](cplx* line, std::size_t) { plans_[std::size_t(ax)].forward(line); });
        double scale = 1.0 / double(g.size());
        double peak = 0.0;
        for (const cplx& a : amp) peak = std::max(peak, std::abs(a));
        Spectrum spec;
        for (std::size_t fi = 0; fi < amp.size(); ++fi) {
            if (std::abs(amp[fi]) <= 1e-14 * peak) continue;
            auto idx = g.unflatten(fi);
            SpectrumTerm term;
            for (int i = 0; i < g.ndim(); ++i)
                term.k[std::size_t(i)] = kTwoPi *
                                         fourier_mode(idx[std::size_t(i)], g.axis(i).npoints) /
                                         g.axis(i).length();
            term.c = amp[fi] * scale;
            spec.terms.push_back(term);
        }
        if (spectra_.size() >= 32) {
            spectra_.erase(spectra_lru_.front());
            spectra_lru_.pop_front();
        }
        spectra_lru_.push_back(key);
        return spectra_.emplace(key, std::move(spec)).first->second;
    }

    void touch(long k) const {
        if (k == 0) return;
        lru_.remove(k);
        lru_.push_back(k);
    }

    void evict() const {
        while (cache_.size() > cache_capacity_ && !lru_.empty()) {
            long victim = lru_.front();
            lru_.pop_front();
            if (victim != 0) cache_.erase(victim);
        }
    }

    struct SpecKey {
        long step;
        double rem;
        bool operator<(const SpecKey& o) const {
            return step != o.step ? step < o.step : rem < o.rem;
        }
    };

    WaveField base_;
    double dt_;
    std::size_t cache_capacity_;
    std::vector<double> vtab_;
    std::vector<double> kin_;
    std::vector<Fft> plans_;
    double nyquist_phase_ = 0.0;

    mutable std::mutex mu_;
    mutable std::map<long, std::vector<cplx>> cache_;
    mutable std::list<long> lru_;
    mutable std::map<SpecKey, Spectrum> spectra_;
    mutable std::list<SpecKey> spectra_lru_;
};

/// One-shot split-operator propagation of a grid field to t_final.
inline WaveField evolve_splitstep(const WaveField& initial, const PotentialSpec& potential,
                                  double t_final, double dt) {
    SplitStepEvolution engine(initial, potential, dt);
    return engine.field_at(t_final);
}

} // namespace pilotwave
