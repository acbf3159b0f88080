#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "fracwave/banach.hpp"
#include "fracwave/errors.hpp"
#include "fracwave/gramian.hpp"
#include "fracwave/mltable.hpp"
#include "fracwave/quadrature.hpp"
#include "fracwave/spectral.hpp"
#include "fracwave/trajectory.hpp"

namespace fracwave {

// ---------------------------------------------------------------------------
// problem data
// ---------------------------------------------------------------------------

/// One non-instantaneous impulse: kernel rho_j(t, xi, z) and its t-derivative.
struct ImpulseKernel {
    std::function<double(double, double, double)> rho;
    std::function<double(double, double, double)> drho_dt;
};

/// Partition 0 < tau_1 < s_1 < tau_2 < ... < tau_p < s_p < tau_{p+1} = T with
/// one kernel per impulse window (tau_j, s_j].
struct ImpulseSchedule {
    double T = 1.0;
    std::vector<double> taus;    // tau_1..tau_p
    std::vector<double> esses;   // s_1..s_p
    std::vector<ImpulseKernel> kernels;
    std::vector<double> kappa;     // computed sup of ||h_j||
    std::vector<double> vartheta;  // computed sup of ||h_j'||

    int p() const { return static_cast<int>(taus.size()); }

    void validate() const {
        if (!(T > 0.0)) throw validation_error("schedule.T", "must be > 0");
        if (esses.size() != taus.size() || kernels.size() != taus.size())
            throw validation_error("schedule.breakpoints",
                                   "taus, esses, kernels must have equal length");
        double prev = 0.0;
        for (std::size_t j = 0; j < taus.size(); ++j) {
            if (!(taus[j] > prev))
                throw validation_error("schedule.breakpoints", "requires s_{j-1} < tau_j");
            if (!(esses[j] > taus[j]))
                throw validation_error("schedule.breakpoints", "requires tau_j < s_j");
            prev = esses[j];
        }
        if (!taus.empty() && !(esses.back() < T))
            throw validation_error("schedule.breakpoints", "requires s_p < T");
    }

    /// Interval bounds: continuation interval j spans [start_of(j), end_of(j)],
    /// j = 0..p, with start_of(0) = 0 and end_of(p) = T.
    double start_of(int j) const { return j == 0 ? 0.0 : esses[static_cast<std::size_t>(j - 1)]; }
    double end_of(int j) const {
        return j == p() ? T : taus[static_cast<std::size_t>(j)];
    }
};

/// Memory kernel b and delay magnitude beta of the state-dependent delay;
/// L is the computed weighted supremum sup_{theta<=0} |b(-theta)| e^{a theta}.
struct DelayLaw {
    std::function<double(double)> b;     // on [0, infinity)
    std::function<double(double)> beta;  // nonnegative
    double a = -1.0;
    double L = 0.0;

    static DelayLaw make(std::function<double(double)> b_fn,
                         std::function<double(double)> beta_fn, double a) {
        if (a >= 0.0) throw validation_error("delay.weight_rate", "must be < 0");
        DelayLaw law;
        law.b = std::move(b_fn);
        law.beta = std::move(beta_fn);
        law.a = a;
        double sup = 0.0;
        const int samples = 20000;
        const double lo = -60.0;
        for (int i = 0; i <= samples; ++i) {
            const double th = lo * (1.0 - static_cast<double>(i) / samples);
            sup = std::max(sup, std::fabs(law.b(-th)) * std::exp(a * th));
        }
        law.L = sup;
        return law;
    }
};

/// Control sampled on the master time grid; zero outside the continuation
/// intervals by construction.
struct ControlSignal {
    std::vector<double> times;
    std::vector<SpectralField> values;
    double lambda = 0.0;
    double max_residual = 0.0;  // worst resolvent residual across intervals

    SpectralField at(double t) const {
        if (times.empty()) throw domain_error("control: empty");
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        const double dt = times[1] - times[0];
        auto k = static_cast<std::size_t>((t - times.front()) / dt);
        if (k + 1 >= times.size()) k = times.size() - 2;
        const double w = (t - times[k]) / (times[k + 1] - times[k]);
        std::vector<double> c(values[k].coeffs.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = (1.0 - w) * values[k].coeffs[i] + w * values[k + 1].coeffs[i];
        return SpectralField::from_coeffs(values[k].grid, std::move(c));
    }
};

struct EvolutionProblem {
    FractionalParams frac;
    GridPtr grid;
    LebesgueSpace space;
    ControlOperatorSpec B;
    ImpulseSchedule schedule;
    DelayLaw delay;
    HistorySegment psi;   // initial history, psi.values.back() = psi(0)
    SpectralField eta;    // initial velocity-type datum
    int steps_per_unit = 512;
    int impulse_points = 64;
    int gramian_panels = 256;

    void validate() const {
        frac.validate();
        space.validate();
        schedule.validate();
        psi.validate();
        if (!grid) throw validation_error("problem.grid", "missing grid");
        if (steps_per_unit < 16)
            throw validation_error("numerics.steps_per_unit", "must be >= 16");
        if (impulse_points < 4)
            throw validation_error("numerics.impulse_points", "must be >= 4");
    }
};

// ---------------------------------------------------------------------------
// master time grid
// ---------------------------------------------------------------------------

/// Uniform grid on [0, T] with the impulse breakpoints snapped to nodes.
/// Snapping perturbs each breakpoint by at most dt/2; the discrete problem is
/// solved with the snapped partition throughout, so all internal identities
/// remain exact.
struct TimeGrid {
    double dt = 0.0;
    std::vector<double> t;                  // nodes 0..n
    std::vector<std::size_t> tau_idx;       // index of tau_1..tau_p
    std::vector<std::size_t> s_idx;         // index of s_1..s_p
    std::vector<int> cell_interval;         // per cell: j >= 0 continuation, -j impulse

    std::size_t n_cells() const { return t.size() - 1; }
    double snapped_tau(int j) const { return t[tau_idx[static_cast<std::size_t>(j - 1)]]; }
    double snapped_s(int j) const { return t[s_idx[static_cast<std::size_t>(j - 1)]]; }
    std::size_t interval_start_idx(int j) const {
        return j == 0 ? 0 : s_idx[static_cast<std::size_t>(j - 1)];
    }
    std::size_t interval_end_idx(int j, int p) const {
        return j == p ? t.size() - 1 : tau_idx[static_cast<std::size_t>(j)];
    }
};

inline TimeGrid build_time_grid(const ImpulseSchedule& sched, int steps_per_unit) {
    sched.validate();
    TimeGrid tg;
    const auto n = static_cast<std::size_t>(
        std::max(32.0, std::round(steps_per_unit * sched.T)));
    tg.dt = sched.T / static_cast<double>(n);
    tg.t.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) tg.t[i] = sched.T * static_cast<double>(i) / static_cast<double>(n);
    std::size_t prev = 0;
    for (int j = 1; j <= sched.p(); ++j) {
        const auto ti = static_cast<std::size_t>(
            std::llround(sched.taus[static_cast<std::size_t>(j - 1)] / tg.dt));
        const auto si = static_cast<std::size_t>(
            std::llround(sched.esses[static_cast<std::size_t>(j - 1)] / tg.dt));
        if (!(ti > prev) || !(si > ti) || si >= n)
            throw validation_error("schedule.breakpoints",
                                   "breakpoints collide on the time grid; refine steps");
        tg.tau_idx.push_back(ti);
        tg.s_idx.push_back(si);
        prev = si;
    }
    tg.cell_interval.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
        int label = sched.p();
        for (int j = 1; j <= sched.p(); ++j) {
            const std::size_t ti = tg.tau_idx[static_cast<std::size_t>(j - 1)];
            const std::size_t si = tg.s_idx[static_cast<std::size_t>(j - 1)];
            if (c < ti) {
                label = j - 1;
                break;
            }
            if (c < si) {
                label = -j;
                break;
            }
        }
        tg.cell_interval[c] = label;
    }
    return tg;
}

// ---------------------------------------------------------------------------
// product-integration convolution
// ---------------------------------------------------------------------------

/// Exact cell integrals of the mode kernels K_n(u) = u^{2g-1} E_{2g,2g}(-n^2
/// u^{2g}) against piecewise-linear forcing on the uniform grid. Weights
/// depend only on the lag, so they are assembled once per problem.
class ConvolutionEngine {
  public:
    ConvolutionEngine() = default;

    ConvolutionEngine(const FractionalParams& p, int modes, double dt, std::size_t max_lag)
        : N_(modes), dt_(dt) {
        const double tg = 2.0 * p.gamma;
        auto& tab = detail::ml_neg_sq_table(tg, tg);
        WL_.assign(static_cast<std::size_t>(N_), std::vector<double>(max_lag + 1, 0.0));
        WR_ = WL_;
        for (int n = 1; n <= N_; ++n) {
            auto kern = [&](double u) { return std::pow(u, tg - 1.0) * tab(n * std::pow(u, p.gamma)); };
            for (std::size_t l = 1; l <= max_lag; ++l) {
                const double a = (static_cast<double>(l) - 1.0) * dt;
                const double b = static_cast<double>(l) * dt;
                // theta = (b - u)/dt is the position within the source cell
                auto left = [&](double u) { return kern(u) * (u - a) / dt; };
                auto right = [&](double u) { return kern(u) * (b - u) / dt; };
                double wl, wr;
                if (l == 1) {
                    // kernel derivative is singular at u = 0: graded panels
                    wl = wr = 0.0;
                    double hi = b;
                    for (int k = 0; k < 24 && hi > 1e-300; ++k) {
                        const double lo = (k == 23) ? 0.0 : hi * 0.25;
                        wl += quad::gl32_panel(left, lo, hi);
                        wr += quad::gl32_panel(right, lo, hi);
                        hi = lo;
                    }
                } else {
                    wl = quad::gl16_panel(left, a, b);
                    wr = quad::gl16_panel(right, a, b);
                }
                WL_[static_cast<std::size_t>(n - 1)][l] = wl;
                WR_[static_cast<std::size_t>(n - 1)][l] = wr;
            }
        }
    }

    /// Per-mode value of int_0^{t_hi_cell} K_n(t_target - s) F_n(s) ds using
    /// the cell-endpoint samples (Fl at the left endpoint, Fr at the right).
    std::vector<double> convolve(std::size_t target_idx, std::size_t cell_hi,
                                 const std::vector<SpectralField>& Fl,
                                 const std::vector<SpectralField>& Fr) const {
        std::vector<double> out(static_cast<std::size_t>(N_), 0.0);
        for (std::size_t m = 0; m < cell_hi; ++m) {
            const std::size_t l = target_idx - m;
            for (int n = 0; n < N_; ++n)
                out[static_cast<std::size_t>(n)] +=
                    WL_[static_cast<std::size_t>(n)][l] * Fl[m].coeffs[static_cast<std::size_t>(n)] +
                    WR_[static_cast<std::size_t>(n)][l] * Fr[m].coeffs[static_cast<std::size_t>(n)];
        }
        return out;
    }

  private:
    int N_ = 0;
    double dt_ = 0.0;
    // WL_ weights the sample at the cell's left endpoint, WR_ the right one
    std::vector<std::vector<double>> WL_, WR_;
};

// ---------------------------------------------------------------------------
// delay functional and impulse maps
// ---------------------------------------------------------------------------

/// Deviated argument rho(t, psi) = t - beta(||psi(0)||).
inline double delay_rho(double t, const HistorySegment& seg, const DelayLaw& law,
                        const LebesgueSpace& sp) {
    return t - law.beta(lp_norm(seg.values.back(), sp));
}

/// Memory functional f: theta-quadrature of b(-theta) * segment values.
inline SpectralField delay_functional_f(const HistorySegment& seg, const DelayLaw& law) {
    seg.validate();
    const auto& g = seg.values.front().grid;
    std::vector<double> acc(static_cast<std::size_t>(g->mode_count), 0.0);
    const auto m = seg.theta_grid.size();
    for (std::size_t i = 0; i < m; ++i) {
        double w = 0.0;
        if (i > 0) w += 0.5 * (seg.theta_grid[i] - seg.theta_grid[i - 1]);
        if (i + 1 < m) w += 0.5 * (seg.theta_grid[i + 1] - seg.theta_grid[i]);
        const double bw = w * law.b(-seg.theta_grid[i]);
        for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += bw * seg.values[i].coeffs[n];
    }
    return SpectralField::from_coeffs(g, std::move(acc));
}

namespace detail {
inline SpectralField impulse_field(const std::function<double(double, double, double)>& rho,
                                   double t, const SpectralField& x_left) {
    const auto& g = x_left.grid;
    const double h = g->h();
    std::vector<double> vals(static_cast<std::size_t>(g->n_points), 0.0);
    std::vector<double> cz(static_cast<std::size_t>(g->n_points));
    for (int i = 0; i < g->n_points; ++i) {
        const double c = std::cos(x_left.grid_values[static_cast<std::size_t>(i)] * g->nodes[static_cast<std::size_t>(i)]);
        cz[static_cast<std::size_t>(i)] = c * c;
    }
    for (int i = 0; i < g->n_points; ++i) {
        double s = 0.0;
        for (int k = 0; k < g->n_points; ++k) {
            const double w = (k == 0 || k == g->n_points - 1) ? 0.5 : 1.0;
            s += w * rho(t, g->nodes[static_cast<std::size_t>(i)], g->nodes[static_cast<std::size_t>(k)]) * cz[static_cast<std::size_t>(k)];
        }
        vals[static_cast<std::size_t>(i)] = s * h;
    }
    return SpectralField::project(g, vals);
}
}  // namespace detail

/// Impulse map h_j(t, x)(xi) = int_0^pi rho_j(t, xi, z) cos^2(x(z) z) dz,
/// projected onto the mode band.
inline SpectralField impulse_h(int j, double t, const SpectralField& x_left,
                               const ImpulseSchedule& sched) {
    const auto idx = static_cast<std::size_t>(j - 1);
    if (j < 1 || j > sched.p()) throw domain_error("impulse: index out of range");
    if (!(t > sched.taus[idx]) || !(t <= sched.esses[idx] + 1e-12))
        throw domain_error("impulse: t outside (tau_j, s_j]");
    return detail::impulse_field(sched.kernels[idx].rho, t, x_left);
}

/// Companion map built from the t-derivative of the kernel.
inline SpectralField impulse_h_prime(int j, double t, const SpectralField& x_left,
                                     const ImpulseSchedule& sched) {
    const auto idx = static_cast<std::size_t>(j - 1);
    if (j < 1 || j > sched.p()) throw domain_error("impulse: index out of range");
    if (!(t > sched.taus[idx]) || !(t <= sched.esses[idx] + 1e-12))
        throw domain_error("impulse: t outside (tau_j, s_j]");
    return detail::impulse_field(sched.kernels[idx].drho_dt, t, x_left);
}

/// Compute the kappa_j / vartheta_j sup bounds of the impulse maps; since
/// cos^2 <= 1 they are the sampled sup over t of the |rho|-integral field norm.
inline void compute_impulse_bounds(ImpulseSchedule& sched, const GridPtr& grid,
                                   const LebesgueSpace& sp, int t_samples = 16) {
    sched.kappa.assign(static_cast<std::size_t>(sched.p()), 0.0);
    sched.vartheta.assign(static_cast<std::size_t>(sched.p()), 0.0);
    const double h = grid->h();
    for (int j = 1; j <= sched.p(); ++j) {
        const auto idx = static_cast<std::size_t>(j - 1);
        for (int which = 0; which < 2; ++which) {
            const auto& fn = (which == 0) ? sched.kernels[idx].rho : sched.kernels[idx].drho_dt;
            double sup = 0.0;
            for (int it = 1; it <= t_samples; ++it) {
                const double t = sched.taus[idx] +
                                 (sched.esses[idx] - sched.taus[idx]) * it / t_samples;
                std::vector<double> vals(static_cast<std::size_t>(grid->n_points), 0.0);
                for (int i = 0; i < grid->n_points; ++i) {
                    double s = 0.0;
                    for (int k = 0; k < grid->n_points; ++k) {
                        const double w = (k == 0 || k == grid->n_points - 1) ? 0.5 : 1.0;
                        s += w * std::fabs(fn(t, grid->nodes[static_cast<std::size_t>(i)], grid->nodes[static_cast<std::size_t>(k)]));
                    }
                    vals[static_cast<std::size_t>(i)] = s * h;
                }
                SpectralField f = SpectralField::zero(grid);
                f.grid_values = std::move(vals);
                sup = std::max(sup, lp_norm(f, sp));
            }
            if (which == 0)
                sched.kappa[idx] = sup;
            else
                sched.vartheta[idx] = sup;
        }
    }
}

// ---------------------------------------------------------------------------
// mild solution evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline double c_factor(const FractionalParams& p, int n, double t) {
    return ml_neg_sq(2.0 * p.gamma, 1.0, n * std::pow(t, p.gamma));
}
inline double t_factor(const FractionalParams& p, int n, double t) {
    return t * ml_neg_sq(2.0 * p.gamma, 2.0, n * std::pow(t, p.gamma));
}
inline double s_factor(const FractionalParams& p, int n, double t) {
    const double tg = std::pow(t, p.gamma);
    return tg * ml_neg_sq(2.0 * p.gamma, 2.0 * p.gamma, n * tg);
}

/// Cell-endpoint forcing samples F = B u + f with the control active only on
/// continuation cells (so the on/off jumps sit exactly at cell edges).
struct ForcingCells {
    std::vector<SpectralField> left, right;
};

inline ForcingCells build_forcing_cells(const TimeGrid& tg,
                                        const std::vector<SpectralField>& bu_nodes,
                                        const std::vector<SpectralField>& f_nodes) {
    ForcingCells out;
    const std::size_t n = tg.n_cells();
    out.left.reserve(n);
    out.right.reserve(n);
    for (std::size_t c = 0; c < n; ++c) {
        const bool active = tg.cell_interval[c] >= 0;
        SpectralField l = f_nodes[c];
        SpectralField r = f_nodes[c + 1];
        if (active) {
            for (std::size_t k = 0; k < l.coeffs.size(); ++k) {
                l.coeffs[k] += bu_nodes[c].coeffs[k];
                r.coeffs[k] += bu_nodes[c + 1].coeffs[k];
            }
        }
        out.left.push_back(std::move(l));
        out.right.push_back(std::move(r));
    }
    return out;
}

}  // namespace detail

/// Evaluate the piecewise mild solution for given control and delayed-forcing
/// samples (both on the master grid nodes). The convolution uses exact cell
/// integrals of the singular kernel, second-order accurate for smooth forcing.
inline Trajectory evaluate_mild(const EvolutionProblem& prob, const TimeGrid& tg,
                                const ConvolutionEngine& conv,
                                const std::vector<SpectralField>& u_nodes,
                                const std::vector<SpectralField>& f_nodes) {
    if (u_nodes.size() != tg.t.size() || f_nodes.size() != tg.t.size())
        throw validation_error("mild.samples", "must align with the master time grid");
    const auto& g = prob.grid;
    const int N = g->mode_count;
    const int p = prob.schedule.p();

    std::vector<SpectralField> bu_nodes;
    bu_nodes.reserve(u_nodes.size());
    for (const auto& u : u_nodes) bu_nodes.push_back(apply_B(u, prob.B));
    const detail::ForcingCells F = detail::build_forcing_cells(tg, bu_nodes, f_nodes);

    const SpectralField psi0 = prob.psi.values.back();
    Trajectory traj;

    auto state_at = [&](std::size_t i, const std::vector<double>& hom_c,
                        const std::vector<double>& hom_t, double t_origin,
                        const std::vector<double>& base) {
        // hom_c/hom_t hold the mode data propagated from t_origin; base holds
        // constant per-mode offsets (the subtracted s_j convolution)
        const double dtloc = tg.t[i] - t_origin;
        std::vector<double> c(static_cast<std::size_t>(N));
        const std::vector<double> cv = conv.convolve(i, i, F.left, F.right);
        for (int n = 1; n <= N; ++n) {
            const auto k = static_cast<std::size_t>(n - 1);
            c[k] = detail::c_factor(prob.frac, n, dtloc) * hom_c[k] +
                   detail::t_factor(prob.frac, n, dtloc) * hom_t[k] + base[k] + cv[k];
        }
        return SpectralField::from_coeffs(g, std::move(c));
    };

    const std::vector<double> zeros(static_cast<std::size_t>(N), 0.0);

    // continuation interval 0: [0, tau_1]
    {
        Trajectory::Block blk;
        blk.t0 = 0.0;
        blk.t1 = tg.t[tg.interval_end_idx(0, p)];
        for (std::size_t i = 0; i <= tg.interval_end_idx(0, p); ++i) {
            blk.times.push_back(tg.t[i]);
            blk.states.push_back(state_at(i, psi0.coeffs, prob.eta.coeffs, 0.0, zeros));
        }
        traj.blocks.push_back(std::move(blk));
    }

    for (int j = 1; j <= p; ++j) {
        const double tau_j = tg.snapped_tau(j);
        const double s_j = tg.snapped_s(j);
        const SpectralField x_left = traj.blocks.back().states.back();  // x(tau_j^-)

        // impulse window (tau_j, s_j]
        Trajectory::Block ib;
        ib.t0 = tau_j;
        ib.t1 = s_j;
        ib.impulse_block = true;
        const int m = prob.impulse_points;
        // the left endpoint holds the right limit h_j(tau_j^+); the kernel is
        // continuous in t so evaluating at tau_j itself gives that limit
        for (int i = 0; i <= m; ++i) {
            const double t = tau_j + (s_j - tau_j) * i / m;
            ib.times.push_back(t);
            ib.states.push_back(detail::impulse_field(
                prob.schedule.kernels[static_cast<std::size_t>(j - 1)].rho, t, x_left));
        }
        traj.blocks.push_back(std::move(ib));

        // continuation (s_j, tau_{j+1}]
        const SpectralField hj = detail::impulse_field(
            prob.schedule.kernels[static_cast<std::size_t>(j - 1)].rho, s_j, x_left);
        const SpectralField hpj = detail::impulse_field(
            prob.schedule.kernels[static_cast<std::size_t>(j - 1)].drho_dt, s_j, x_left);
        const std::size_t si = tg.s_idx[static_cast<std::size_t>(j - 1)];
        std::vector<double> base = conv.convolve(si, si, F.left, F.right);
        for (auto& v : base) v = -v;

        Trajectory::Block cb;
        cb.t0 = s_j;
        cb.t1 = tg.t[tg.interval_end_idx(j, p)];
        for (std::size_t i = si; i <= tg.interval_end_idx(j, p); ++i) {
            cb.times.push_back(tg.t[i]);
            cb.states.push_back(state_at(i, hj.coeffs, hpj.coeffs, s_j, base));
        }
        traj.blocks.push_back(std::move(cb));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// controls
// ---------------------------------------------------------------------------

namespace detail {

/// u(t) = B* S_gamma(tau_end - t)* y sampled on nodes [i_lo, i_hi].
inline void fill_adjoint_control(std::vector<SpectralField>& u_nodes, const TimeGrid& tg,
                                 std::size_t i_lo, std::size_t i_hi, double tau_end,
                                 const SpectralField& y, const FractionalParams& p,
                                 const ControlOperatorSpec& B) {
    const auto& g = y.grid;
    const int N = g->mode_count;
    for (std::size_t i = i_lo; i <= i_hi; ++i) {
        const double d = tau_end - tg.t[i];
        std::vector<double> c(static_cast<std::size_t>(N));
        for (int n = 1; n <= N; ++n)
            c[static_cast<std::size_t>(n - 1)] =
                (d <= 0.0) ? 0.0 : s_factor(p, n, d) * y.coeffs[static_cast<std::size_t>(n - 1)];
        u_nodes[i] = apply_B_adjoint(SpectralField::from_coeffs(g, std::move(c)), B);
    }
}

inline SpectralField scale_field(const SpectralField& x, double c) {
    std::vector<double> v = x.coeffs;
    for (auto& e : v) e *= c;
    return x.with_coeffs(std::move(v));
}

inline SpectralField sub_fields(const SpectralField& x, const SpectralField& y) {
    std::vector<double> v = x.coeffs;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= y.coeffs[i];
    return x.with_coeffs(std::move(v));
}

}  // namespace detail

/// Regularized feedback control of the linear terminal problem:
/// u(t) = B* S_gamma(T-t)* J[R(lambda, Phi_0^T) l] with
/// l = x_T - C_gamma(T) v - T_gamma(T) w.
inline ControlSignal linear_feedback_control(const SpectralField& v, const SpectralField& w,
                                             const SpectralField& x_T, double lambda,
                                             const GramianOperator& G, const LebesgueSpace& sp,
                                             const FractionalParams& p, const ControlOperatorSpec& B,
                                             const TimeGrid& tg) {
    const auto& g = x_T.grid;
    const int N = g->mode_count;
    const double T = tg.t.back();
    std::vector<double> lc(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
        const auto k = static_cast<std::size_t>(n - 1);
        lc[k] = x_T.coeffs[k] - detail::c_factor(p, n, T) * v.coeffs[k] -
                detail::t_factor(p, n, T) * w.coeffs[k];
    }
    const SpectralField ell = SpectralField::from_coeffs(g, std::move(lc));

    ControlSignal u;
    u.times = tg.t;
    u.lambda = lambda;
    u.values.assign(tg.t.size(), SpectralField::zero(g));
    if (lp_norm(ell, sp) == 0.0) return u;

    const ResolventSolve sol = solve_resolvent_eq(lambda, ell, G, sp);
    const SpectralField y = detail::scale_field(duality_map(sol.z, sp), 1.0 / lambda);
    u.max_residual = sol.residual;
    detail::fill_adjoint_control(u.values, tg, 0, tg.t.size() - 1, T, y, p, B);
    return u;
}

/// Simulate the linear system under the feedback control and compare both
/// sides of the terminal identity x(T) - x_T = -lambda R(lambda, Phi) l.
struct TerminalIdentity {
    SpectralField lhs, rhs;
    double gap = 0.0;
};

inline TerminalIdentity terminal_identity_check(const EvolutionProblem& prob, const TimeGrid& tg,
                                                const ConvolutionEngine& conv,
                                                const SpectralField& v, const SpectralField& w,
                                                const SpectralField& x_T, double lambda,
                                                const GramianOperator& G) {
    const auto& g = prob.grid;
    const int N = g->mode_count;
    const double T = tg.t.back();
    ControlSignal u = linear_feedback_control(v, w, x_T, lambda, G, prob.space, prob.frac,
                                              prob.B, tg);
    std::vector<SpectralField> f0(tg.t.size(), SpectralField::zero(g));
    // simulate from the initial data (v, w) the identity refers to
    EvolutionProblem lin = prob;
    lin.psi = HistorySegment::constant(v, prob.psi.a, prob.psi.theta_grid.front(), 4);
    lin.eta = w;
    Trajectory traj = evaluate_mild(lin, tg, conv, u.values, f0);

    std::vector<double> lc(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
        const auto k = static_cast<std::size_t>(n - 1);
        lc[k] = x_T.coeffs[k] - detail::c_factor(prob.frac, n, T) * v.coeffs[k] -
                detail::t_factor(prob.frac, n, T) * w.coeffs[k];
    }
    const SpectralField ell = SpectralField::from_coeffs(g, std::move(lc));

    TerminalIdentity out;
    out.lhs = detail::sub_fields(traj.blocks.back().states.back(), x_T);
    if (lp_norm(ell, prob.space) == 0.0)
        out.rhs = SpectralField::zero(g);
    else
        out.rhs = detail::scale_field(solve_resolvent_eq(lambda, ell, G, prob.space).z, -1.0);
    out.gap = lp_norm(detail::sub_fields(out.lhs, out.rhs), prob.space);
    return out;
}

/// Delayed forcing samples f(t, x_rho) along a trajectory iterate, one per
/// master grid node.
inline std::vector<SpectralField> delayed_forcing_nodes(const EvolutionProblem& prob,
                                                        const TimeGrid& tg,
                                                        const Trajectory& traj) {
    std::vector<SpectralField> out;
    out.reserve(tg.t.size());
    const double theta_min = prob.psi.theta_grid.front();
    for (double t : tg.t) {
        const SpectralField xt = traj.blocks.empty() ? prob.psi.values.back() : traj.value_at(t);
        double rho = t - prob.delay.beta(lp_norm(xt, prob.space));
        rho = std::max(rho, theta_min);
        const HistorySegment seg = segment_at(traj, prob.psi, rho);
        out.push_back(delay_functional_f(seg, prob.delay));
    }
    return out;
}

/// Multi-interval control: per interval j, u_j(t) = B* S_gamma(tau_{j+1}-t)*
/// J[R(lambda, Phi_{s_j}^{tau_{j+1}}) g_j] with the g_j recursion over earlier
/// intervals' controls.
inline ControlSignal impulsive_control(const EvolutionProblem& prob, const TimeGrid& tg,
                                       const ConvolutionEngine& conv,
                                       const std::vector<SpectralField>& targets,
                                       double lambda, const Trajectory& traj,
                                       const std::vector<GramianOperator>& grams) {
    const int p = prob.schedule.p();
    if (static_cast<int>(targets.size()) != p + 1)
        throw validation_error("targets", "need one target per continuation interval");
    const auto& g = prob.grid;
    const int N = g->mode_count;

    const std::vector<SpectralField> f_nodes = delayed_forcing_nodes(prob, tg, traj);
    const std::vector<SpectralField> zero_nodes(tg.t.size(), SpectralField::zero(g));
    const detail::ForcingCells Ff =
        detail::build_forcing_cells(tg, zero_nodes, f_nodes);  // f alone

    ControlSignal u;
    u.times = tg.t;
    u.lambda = lambda;
    u.values.assign(tg.t.size(), SpectralField::zero(g));
    std::vector<SpectralField> bu_nodes(tg.t.size(), SpectralField::zero(g));

    const SpectralField psi0 = prob.psi.values.back();
    for (int j = 0; j <= p; ++j) {
        const std::size_t i_lo = tg.interval_start_idx(j);
        const std::size_t i_hi = tg.interval_end_idx(j, p);
        const double tau_next = tg.t[i_hi];
        std::vector<double> gc(static_cast<std::size_t>(N));

        if (j == 0) {
            const std::vector<double> cf = conv.convolve(i_hi, i_hi, Ff.left, Ff.right);
            for (int n = 1; n <= N; ++n) {
                const auto k = static_cast<std::size_t>(n - 1);
                gc[k] = targets[0].coeffs[k] -
                        detail::c_factor(prob.frac, n, tau_next) * psi0.coeffs[k] -
                        detail::t_factor(prob.frac, n, tau_next) * prob.eta.coeffs[k] - cf[k];
            }
        } else {
            const double s_j = tg.t[i_lo];
            const SpectralField x_left = traj.value_at(tg.snapped_tau(j));  // left limit
            const SpectralField hj = detail::impulse_field(
                prob.schedule.kernels[static_cast<std::size_t>(j - 1)].rho, s_j, x_left);
            const SpectralField hpj = detail::impulse_field(
                prob.schedule.kernels[static_cast<std::size_t>(j - 1)].drho_dt, s_j, x_left);
            const detail::ForcingCells Ffu = detail::build_forcing_cells(tg, bu_nodes, f_nodes);
            const detail::ForcingCells Fu = detail::build_forcing_cells(tg, bu_nodes, zero_nodes);
            const std::vector<double> c1 = conv.convolve(i_lo, i_lo, Ffu.left, Ffu.right);
            const std::vector<double> c2 = conv.convolve(i_hi, i_hi, Ff.left, Ff.right);
            const std::vector<double> c3 = conv.convolve(i_hi, i_lo, Fu.left, Fu.right);
            const double d = tau_next - s_j;
            for (int n = 1; n <= N; ++n) {
                const auto k = static_cast<std::size_t>(n - 1);
                gc[k] = targets[static_cast<std::size_t>(j)].coeffs[k] -
                        detail::c_factor(prob.frac, n, d) * hj.coeffs[k] -
                        detail::t_factor(prob.frac, n, d) * hpj.coeffs[k] + c1[k] - c2[k] - c3[k];
            }
        }

        const SpectralField gj = SpectralField::from_coeffs(g, std::move(gc));
        if (lp_norm(gj, prob.space) > 0.0) {
            const ResolventSolve sol =
                solve_resolvent_eq(lambda, gj, grams[static_cast<std::size_t>(j)], prob.space);
            u.max_residual = std::max(u.max_residual, sol.residual);
            const SpectralField y =
                detail::scale_field(duality_map(sol.z, prob.space), 1.0 / lambda);
            detail::fill_adjoint_control(u.values, tg, i_lo, i_hi, tau_next, y, prob.frac,
                                         prob.B);
        }
        for (std::size_t i = i_lo; i <= i_hi; ++i) bu_nodes[i] = apply_B(u.values[i], prob.B);
    }
    return u;
}

// ---------------------------------------------------------------------------
// Picard iteration
// ---------------------------------------------------------------------------

struct PicardResult {
    Trajectory x;
    ControlSignal u;
    int iterations = 0;
    double final_delta = 0.0;
    std::vector<double> deltas;
};

/// Successive substitution for the controlled semilinear system: rebuild the
/// control and the delayed forcing from the current iterate, re-evaluate the
/// mild solution, repeat until the sup-norm update is below tolerance.
inline PicardResult picard_solve(const EvolutionProblem& prob, const TimeGrid& tg,
                                 const ConvolutionEngine& conv,
                                 const std::vector<SpectralField>& targets, double lambda,
                                 const std::vector<GramianOperator>& grams,
                                 double tol = 1e-8, int max_iter = 200) {
    const auto& g = prob.grid;
    const std::vector<SpectralField> zero_nodes(tg.t.size(), SpectralField::zero(g));

    PicardResult out;
    // free evolution (u = 0, f = 0) as the starting iterate
    out.x = evaluate_mild(prob, tg, conv, zero_nodes, zero_nodes);
    out.u.times = tg.t;
    out.u.lambda = lambda;
    out.u.values = zero_nodes;

    for (int sweep = 1; sweep <= max_iter; ++sweep) {
        ControlSignal u = impulsive_control(prob, tg, conv, targets, lambda, out.x, grams);
        const std::vector<SpectralField> f_nodes = delayed_forcing_nodes(prob, tg, out.x);
        Trajectory xnew = evaluate_mild(prob, tg, conv, u.values, f_nodes);

        double delta = 0.0;
        for (double t : tg.t)
            delta = std::max(delta, lp_norm(detail::sub_fields(xnew.value_at(t),
                                                               out.x.value_at(t)),
                                            prob.space));
        out.x = std::move(xnew);
        out.u = std::move(u);
        out.final_delta = delta;
        out.deltas.push_back(delta);
        if (delta < tol) return out;
        ++out.iterations;
    }
    throw convergence_error("picard iteration did not converge", out.final_delta,
                            out.iterations);
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

/// Cost ||x(T) - x_T||^2 + lambda int_0^T (T-t)^{g-1} ||u(t)||^2 dt, with the
/// weight singularity removed by the sigma = (T-t)^g substitution.
inline double cost_functional(const Trajectory& x, const ControlSignal& u, double lambda,
                              const SpectralField& x_T, const FractionalParams& p,
                              const LebesgueSpace& sp) {
    const double T = x.t_end();
    const double term = lp_norm(detail::sub_fields(x.value_at(T), x_T), sp);
    auto integrand = [&](double sigma) {
        const double t = T - std::pow(sigma, 1.0 / p.gamma);
        const double nu = lp_norm(u.at(std::min(std::max(t, 0.0), T)), sp);
        return nu * nu / p.gamma;
    };
    const double run = quad::composite_gl(integrand, 0.0, std::pow(T, p.gamma),
                                          std::max(64, static_cast<int>(128 * T)));
    return term * term + lambda * run;
}

struct CndInputs {
    double M = 1.0;
    double Mtilde = 1.0;
    double T = 1.0;
    double gamma = 0.75;
    double delta = 0.0;  // in [0, gamma]
    double K2 = 1.0;
    double zeta = 0.0;   // growth constant of the nonlinearity
    int p = 0;           // impulse count
    double lambda = 1.0;

    void validate() const {
        if (delta < 0.0 || delta > gamma)
            throw validation_error("cnd.delta", "must lie in [0, gamma]");
        if (!(lambda > 0.0)) throw validation_error("cnd.lambda", "must be > 0");
        if (!(T > 0.0) || !(gamma > 0.5) || gamma > 1.0 || M < 1.0 || Mtilde <= 0.0 ||
            K2 < 0.0 || zeta < 0.0 || p < 0)
            throw validation_error("cnd.inputs", "out of range");
    }
};

inline double cnd_R(const CndInputs& in) {
    const double q = in.M * in.Mtilde / gamma_fn(2.0 * in.gamma);
    return 2.0 * std::pow(in.T, 3.0 * in.gamma) / (3.0 * in.gamma * in.lambda) * q * q;
}

/// LHS of the contraction-style solvability condition; the caller compares
/// against 1.
inline double cnd_check(const CndInputs& in) {
    in.validate();
    const double R = cnd_R(in);
    const double c = (2.0 * in.gamma - in.delta) / (1.0 - in.delta);
    const double pref = 2.0 * in.M * std::pow(in.T, 2.0 * in.gamma - in.delta) * in.K2 *
                        in.zeta / (gamma_fn(2.0 * in.gamma) * std::pow(c, 1.0 - in.delta));
    const double pd = static_cast<double>(in.p);
    double tail = 0.0;
    for (int k = 0; k < in.p; ++k)
        tail += std::exp((pd + k) * (pd - k - 1.0) * R / 2.0);
    return pref * (1.0 + (pd + 1.0) * (pd + 2.0) * R / 2.0 + pd * (pd + 1.0) * R * R / 2.0 * tail);
}

struct NjCjBounds {
    std::vector<double> N;  // N_0..N_p
    std::vector<double> C;  // C_0..C_p with C_0 = N_0
};

/// A-priori norms of the g_j terms and their resolved recursion bounds:
/// C_j = N_j + R sum_{k<j} N_k exp((j+k)(j-k-1)R/2).
inline NjCjBounds bounds_Nj_Cj(const CndInputs& in, const std::vector<double>& xi_norms,
                               double psi0_norm, double eta_norm, double phi_r_norm,
                               const std::vector<double>& kappa,
                               const std::vector<double>& vartheta) {
    in.validate();
    const auto pc = static_cast<std::size_t>(in.p);
    if (xi_norms.size() != pc + 1 || kappa.size() != pc || vartheta.size() != pc)
        throw validation_error("bounds.inputs", "length mismatch with impulse count");
    const double c = (2.0 * in.gamma - in.delta) / (1.0 - in.delta);
    const double tail = 2.0 * in.M * std::pow(in.T, 2.0 * in.gamma - in.delta) /
                        (gamma_fn(2.0 * in.gamma) * std::pow(c, 1.0 - in.delta)) * phi_r_norm;
    const double R = cnd_R(in);

    NjCjBounds out;
    out.N.resize(pc + 1);
    out.N[0] = xi_norms[0] + in.M * psi0_norm + in.M * in.T * eta_norm + tail;
    for (std::size_t j = 1; j <= pc; ++j)
        out.N[j] = xi_norms[j] + in.M * kappa[j - 1] + in.M * in.T * vartheta[j - 1] + tail;
    out.C = out.N;
    for (std::size_t j = 1; j <= pc; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < j; ++k)
            acc += out.N[k] * std::exp(static_cast<double>(j + k) *
                                       static_cast<double>(j - k - 1) * R / 2.0);
        out.C[j] = out.N[j] + R * acc;
    }
    return out;
}

/// Standard discrete Gronwall bound: any f with f_n <= g_n + sum_{k<n} w_k f_k
/// satisfies f_n <= B_n = g_n + sum_{k<n} g_k w_k exp(sum_{k<j<n} w_j).
inline std::vector<double> discrete_gronwall_bound(const std::vector<double>& g,
                                                   const std::vector<double>& w) {
    if (g.size() != w.size())
        throw validation_error("gronwall.sequences", "must have equal length");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] < 0.0 || w[i] < 0.0)
            throw validation_error("gronwall.sequences", "must be nonnegative");
    std::vector<double> B(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        double s = g[n];
        for (std::size_t k = 0; k < n; ++k) {
            double e = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) e += w[j];
            s += g[k] * w[k] * std::exp(e);
        }
        B[n] = s;
    }
    return B;
}

}  // namespace fracwave
