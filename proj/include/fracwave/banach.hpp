#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/spectral.hpp"
#include "fracwave/trajectory.hpp"

namespace fracwave {

struct LebesgueSpace {
    double p = 2.0;
    GridPtr grid;

    void validate() const {
        if (!(p >= 2.0)) throw validation_error("space.p", "must be >= 2");
        if (!grid) throw validation_error("space.grid", "missing grid");
    }
};

/// Grid-quadrature p-norm (trapezoid); for p=2 this matches the coefficient
/// Euclidean norm by discrete Parseval.
inline double lp_norm(const SpectralField& x, const LebesgueSpace& sp) {
    const auto& g = *x.grid;
    const double h = g.h();
    double s = 0.0;
    for (int i = 0; i < g.n_points; ++i) {
        const double w = (i == 0 || i == g.n_points - 1) ? 0.5 : 1.0;
        s += w * std::pow(std::fabs(x.grid_values[i]), sp.p);
    }
    return std::pow(s * h, 1.0 / sp.p);
}

inline double pairing(const SpectralField& x, const SpectralField& y) {
    const auto& g = *x.grid;
    const double h = g.h();
    double s = 0.0;
    for (int i = 0; i < g.n_points; ++i) {
        const double w = (i == 0 || i == g.n_points - 1) ? 0.5 : 1.0;
        s += w * x.grid_values[i] * y.grid_values[i];
    }
    return s * h;
}

/// Holder-conjugate norm, used to check the dual-space side of the identities.
inline double dual_norm(const SpectralField& x, const LebesgueSpace& sp) {
    LebesgueSpace dual{sp.p / (sp.p - 1.0), sp.grid};
    return lp_norm(x, dual);
}

/// Duality mapping J[x](xi) = ||x||^{2-p} |x(xi)|^{p-2} x(xi).
/// For p=2 it is the identity. For p>2 the returned field carries the exact
/// pointwise values on the grid; its coefficients are the band-limited
/// projection (the dual element generally lies outside the mode band).
inline SpectralField duality_map(const SpectralField& x, const LebesgueSpace& sp) {
    sp.validate();
    if (sp.p == 2.0) return x;
    const double nx = lp_norm(x, sp);
    if (nx == 0.0) return SpectralField::zero(x.grid);
    const double scale = std::pow(nx, 2.0 - sp.p);
    std::vector<double> vals(x.grid_values.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double v = x.grid_values[i];
        vals[i] = scale * std::pow(std::fabs(v), sp.p - 2.0) * v;
    }
    SpectralField j = SpectralField::project(x.grid, vals);
    j.grid_values = std::move(vals);  // keep exact pointwise values
    return j;
}

/// History segment on a truncated window [theta_min, 0], weighted phase space
/// with weight g(theta) = exp(a theta), a < 0.
struct HistorySegment {
    std::vector<double> theta_grid;     // increasing, last = 0
    std::vector<SpectralField> values;  // one per node
    double a = -1.0;
    double tail_tol = 1e-10;

    void validate() const {
        if (theta_grid.empty() || values.size() != theta_grid.size())
            throw validation_error("history.theta_grid", "empty or mismatched with values");
        if (std::fabs(theta_grid.back()) > 1e-14)
            throw validation_error("history.theta_grid", "last node must be theta = 0");
        for (std::size_t i = 1; i < theta_grid.size(); ++i)
            if (theta_grid[i] <= theta_grid[i - 1])
                throw validation_error("history.theta_grid", "must be strictly increasing");
        if (a >= 0.0) throw validation_error("history.weight_rate", "must be < 0");
    }

    static HistorySegment constant(const SpectralField& v, double a, double theta_min,
                                   int nodes = 512) {
        HistorySegment h;
        h.a = a;
        h.theta_grid.resize(nodes);
        for (int i = 0; i < nodes; ++i)
            h.theta_grid[i] = theta_min * (1.0 - static_cast<double>(i) / (nodes - 1));
        h.theta_grid.back() = 0.0;
        h.values.assign(nodes, v);
        return h;
    }

    SpectralField at(double theta) const {
        if (theta <= theta_grid.front()) return values.front();
        if (theta >= 0.0) return values.back();
        auto it = std::upper_bound(theta_grid.begin(), theta_grid.end(), theta);
        const auto k = static_cast<std::size_t>(it - theta_grid.begin()) - 1;
        const double w = (theta - theta_grid[k]) / (theta_grid[k + 1] - theta_grid[k]);
        std::vector<double> c(values[k].coeffs.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = (1.0 - w) * values[k].coeffs[i] + w * values[k + 1].coeffs[i];
        return SpectralField::from_coeffs(values[k].grid, std::move(c));
    }
};

/// Integral phase norm: quadrature of ||phi(theta)||_X exp(-a theta) over the
/// truncated window; the discarded tail is below tail_tol by construction.
inline double phase_norm(const HistorySegment& seg, const LebesgueSpace& sp) {
    seg.validate();
    double s = 0.0;
    std::vector<double> f(seg.theta_grid.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = lp_norm(seg.values[i], sp) * std::exp(-seg.a * seg.theta_grid[i]);
    for (std::size_t i = 0; i + 1 < f.size(); ++i)
        s += 0.5 * (f[i] + f[i + 1]) * (seg.theta_grid[i + 1] - seg.theta_grid[i]);
    return s;
}

/// Window start for a given truncation tolerance: the tail mass of the weight
/// beyond theta_min is below tail_tol * |a| / max-norm scale.
inline double theta_min_for(double a, double tail_tol, double history_scale) {
    const double want = std::log(tail_tol * std::fabs(a) / std::max(history_scale, 1e-30)) /
                        std::fabs(a);
    return std::max(want, -50.0);
}

/// Segment x_t(theta) = x(t + theta): splices the trajectory over [0, t] with
/// the initial history below zero. Supports t down to theta_min (pure history
/// shift) for delayed arguments that reach into the past.
inline HistorySegment segment_at(const Trajectory& traj, const HistorySegment& initial,
                                 double t) {
    initial.validate();
    const double T = traj.blocks.empty() ? 0.0 : traj.t_end();
    if (t < initial.theta_grid.front() - 1e-12 || t > T + 1e-12)
        throw domain_error("segment_at: t outside [theta_min, T]");
    HistorySegment out;
    out.a = initial.a;
    out.tail_tol = initial.tail_tol;

    // node set: initial grid shape, plus trajectory sample times mapped into
    // theta < 0, plus block boundaries so jumps are never interpolated across
    std::vector<double> thetas = initial.theta_grid;
    if (t > 0.0) {
        for (const auto& b : traj.blocks) {
            for (double u : {b.t0, b.t1})
                if (u < t && u - t > thetas.front()) thetas.push_back(u - t);
            for (double u : b.times)
                if (u < t && u - t > thetas.front()) thetas.push_back(u - t);
        }
        thetas.push_back(0.0);
        std::sort(thetas.begin(), thetas.end());
        thetas.erase(std::unique(thetas.begin(), thetas.end(),
                                 [](double x, double y) { return std::fabs(x - y) < 1e-13; }),
                     thetas.end());
        if (std::fabs(thetas.back()) < 1e-13) thetas.back() = 0.0;
    }
    out.theta_grid = thetas;
    out.values.reserve(thetas.size());
    for (double th : thetas) {
        const double u = t + th;
        if (u < 0.0)
            out.values.push_back(initial.at(u));
        else if (traj.blocks.empty())
            out.values.push_back(initial.at(0.0));
        else
            out.values.push_back(traj.value_at(std::min(u, T)));
    }
    return out;
}

struct PhaseConstants {
    double K1 = 0.0;
    double K2 = 0.0;
    double P_sup = 0.0;
    double Q_sup = 0.0;
};

/// Concrete constants for the exponential-weight phase space on [0, T]:
/// P(t) = t, Q(t) = exp(a t); the history-shift factor is measured as the
/// sampled supremum of ||psi_s|| / ||psi|| over s <= 0.
inline PhaseConstants phase_constants(const HistorySegment& initial, double T,
                                      const LebesgueSpace& sp) {
    PhaseConstants c;
    c.P_sup = T;
    c.K2 = T;
    c.Q_sup = 1.0;  // sup over t >= 0 of exp(a t), a < 0
    const double base = phase_norm(initial, sp);
    double theta_sup = 1.0;
    if (base > 0.0) {
        Trajectory empty;
        const double lo = initial.theta_grid.front() * 0.5;
        for (int i = 0; i <= 16; ++i) {
            const double s = lo * (1.0 - static_cast<double>(i) / 16.0);
            HistorySegment seg = segment_at(empty, initial, s);
            theta_sup = std::max(theta_sup, phase_norm(seg, sp) / base);
        }
    }
    c.K1 = theta_sup + c.Q_sup;
    return c;
}

/// Phase-norm growth inequality ||x_s||_B <= K1 ||psi||_B + K2 sup ||x(u)||,
/// evaluated numerically; returns whether it holds within tolerance.
inline bool lemma_phase_bound_check(const Trajectory& traj, const HistorySegment& initial,
                                    double s, const PhaseConstants& consts,
                                    const LebesgueSpace& sp) {
    const HistorySegment seg = segment_at(traj, initial, s);
    const double lhs = phase_norm(seg, sp);
    double sup = 0.0;
    if (s > 0.0 && !traj.blocks.empty()) {
        const int samples = 200;
        for (int i = 0; i <= samples; ++i) {
            const double u = s * i / samples;
            sup = std::max(sup, lp_norm(traj.value_at(std::min(u, traj.t_end())), sp));
        }
    }
    const double rhs = consts.K1 * phase_norm(initial, sp) + consts.K2 * sup;
    return lhs <= rhs + 1e-8 * (1.0 + rhs);
}

}  // namespace fracwave
