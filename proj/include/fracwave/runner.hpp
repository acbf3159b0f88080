#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fracwave/scenario.hpp"

namespace fracwave {

// ---------------------------------------------------------------------------
// run reports and CSV emission
// ---------------------------------------------------------------------------

struct RunRow {
    double lambda = 0.0;
    double terminal_error = 0.0;
    double cost = 0.0;
    int picard_iters = 0;        // -1 marks a non-converged Picard run
    double resolvent_residual = 0.0;
    double cnd_lhs = 0.0;
};

struct RunReport {
    std::vector<RunRow> rows;            // one per lambda, in grid order
    std::vector<std::string> provenance; // emitted as leading comment lines
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Serialize a report: provenance comments, one header row, then data rows.
/// Floating point uses 17 significant digits; byte output is deterministic
/// for a fixed Scenario.
inline std::string render_csv(const RunReport& report) {
    std::string out;
    for (const auto& line : report.provenance) out += "# " + line + "\n";
    out += "lambda,terminal_error,cost,picard_iters,resolvent_residual,cnd_lhs\n";
    for (const auto& r : report.rows) {
        out += detail::fmt17(r.lambda) + "," + detail::fmt17(r.terminal_error) + "," +
               detail::fmt17(r.cost) + "," + std::to_string(r.picard_iters) + "," +
               detail::fmt17(r.resolvent_residual) + "," + detail::fmt17(r.cnd_lhs) + "\n";
    }
    return out;
}

inline void emit_csv(const RunReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("out", "cannot open " + path + " for writing");
    const std::string body = render_csv(report);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw validation_error("out", "write failed for " + path);
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> provenance_lines(const Scenario& s, const char* kind) {
    std::vector<std::string> out;
    out.push_back(std::string("run = ") + kind);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(s.config_hash));
    out.push_back(std::string("config_hash = ") + buf);
    out.push_back("picard_tol = " + fmt17(s.picard_tol));
    std::stringstream ss(s.provenance);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

}  // namespace detail

/// Linear lambda sweep: no impulses, no delay. Terminal error and cost are
/// evaluated through the Gramian/resolvent closed forms
///   x(T) - x_T = -z_lambda,      cost = ||z||^2 + lambda * y^T Phi y,
/// which are exact for the discretized operator (the simulated counterpart is
/// cross-checked by the terminal-identity diagnostics).
inline RunReport run_linear_sweep(const Scenario& s) {
    if (s.prob.schedule.p() != 0)
        throw validation_error("scenario", "linear sweep requires an empty impulse schedule");
    if (s.prob.delay.L != 0.0)
        throw validation_error("scenario", "linear sweep requires a disabled delay");

    const auto& g = s.prob.grid;
    const int N = g->mode_count;
    const double T = s.prob.schedule.T;
    const GramianOperator G = assemble_gramian(0.0, T, s.prob.B, s.prob.frac, g);

    // l = x_T - C(T) psi(0) - T(T) eta
    const SpectralField psi0 = s.prob.psi.values.back();
    std::vector<double> lc(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
        const auto k = static_cast<std::size_t>(n - 1);
        lc[k] = s.target.coeffs[k] - detail::c_factor(s.prob.frac, n, T) * psi0.coeffs[k] -
                detail::t_factor(s.prob.frac, n, T) * s.prob.eta.coeffs[k];
    }
    const SpectralField ell = SpectralField::from_coeffs(g, lc);
    const double ell_norm = lp_norm(ell, s.prob.space);

    RunReport report;
    report.provenance = detail::provenance_lines(s, "linear-sweep");
    for (double lam : s.lambda_grid) {
        RunRow row;
        row.lambda = lam;
        row.cnd_lhs = cnd_check(s.cnd_inputs(lam));
        if (ell_norm == 0.0) {
            report.rows.push_back(row);
            continue;
        }
        const ResolventSolve sol = solve_resolvent_eq(lam, ell, G, s.prob.space);
        row.terminal_error = lp_norm(sol.z, s.prob.space);
        row.resolvent_residual = sol.residual;
        const SpectralField y =
            detail::scale_field(duality_map(sol.z, s.prob.space), 1.0 / lam);
        Eigen::Map<const Eigen::VectorXd> yv(y.coeffs.data(), N);
        row.cost = row.terminal_error * row.terminal_error + lam * yv.dot(G.matrix * yv);
        report.rows.push_back(row);
    }
    return report;
}

/// Full semilinear/impulsive lambda sweep via Picard iteration. A degenerate
/// scenario (no impulses, no delay) delegates to run_linear_sweep so the
/// reduction identity holds exactly.
inline RunReport run_impulsive_sweep(const Scenario& s) {
    if (s.prob.schedule.p() == 0 && s.prob.delay.L == 0.0) {
        RunReport report = run_linear_sweep(s);
        report.provenance = detail::provenance_lines(s, "impulsive-sweep");
        return report;
    }

    Scenario sc = s;  // impulse bounds are filled on the working copy
    compute_impulse_bounds(sc.prob.schedule, sc.prob.grid, sc.prob.space);
    const int p = sc.prob.schedule.p();
    const TimeGrid tg = build_time_grid(sc.prob.schedule, sc.prob.steps_per_unit);
    const ConvolutionEngine conv(sc.prob.frac, sc.prob.grid->mode_count, tg.dt, tg.n_cells());

    std::vector<GramianOperator> grams;
    grams.reserve(static_cast<std::size_t>(p) + 1);
    for (int j = 0; j <= p; ++j)
        grams.push_back(assemble_gramian(tg.t[tg.interval_start_idx(j)],
                                         tg.t[tg.interval_end_idx(j, p)], sc.prob.B,
                                         sc.prob.frac, sc.prob.grid));

    // intermediate targets default to the free-evolution values; only the
    // terminal target is imposed
    const std::vector<SpectralField> zero_nodes(tg.t.size(),
                                                SpectralField::zero(sc.prob.grid));
    const Trajectory free_traj = evaluate_mild(sc.prob, tg, conv, zero_nodes, zero_nodes);
    std::vector<SpectralField> targets;
    targets.reserve(static_cast<std::size_t>(p) + 1);
    for (int j = 0; j < p; ++j) targets.push_back(free_traj.value_at(tg.snapped_tau(j + 1)));
    targets.push_back(sc.target);

    RunReport report;
    report.provenance = detail::provenance_lines(s, "impulsive-sweep");
    for (double lam : s.lambda_grid) {
        RunRow row;
        row.lambda = lam;
        row.cnd_lhs = cnd_check(sc.cnd_inputs(lam));
        try {
            const PicardResult res = picard_solve(sc.prob, tg, conv, targets, lam, grams,
                                                  sc.picard_tol, sc.picard_max_iter);
            const SpectralField xT = res.x.value_at(tg.t.back());
            row.terminal_error =
                lp_norm(detail::sub_fields(xT, sc.target), sc.prob.space);
            row.cost = cost_functional(res.x, res.u, lam, sc.target, sc.prob.frac,
                                       sc.prob.space);
            row.picard_iters = res.iterations;
            row.resolvent_residual = res.u.max_residual;
        } catch (const convergence_error& e) {
            row.picard_iters = -1;
            row.terminal_error = std::nan("");
            row.cost = std::nan("");
            row.resolvent_residual = e.last_residual;
        }
        report.rows.push_back(row);
    }
    return report;
}

/// Terminal-identity diagnostic sweep: simulate the feedback-controlled linear
/// system per lambda and report the gap between the two sides of the identity.
/// Columns: terminal_error = ||x(T) - x_T|| (simulated), resolvent_residual =
/// identity gap.
inline RunReport run_terminal_identity(const Scenario& s) {
    if (s.prob.schedule.p() != 0)
        throw validation_error("scenario",
                               "terminal identity requires an empty impulse schedule");
    const TimeGrid tg = build_time_grid(s.prob.schedule, s.prob.steps_per_unit);
    const ConvolutionEngine conv(s.prob.frac, s.prob.grid->mode_count, tg.dt, tg.n_cells());
    const GramianOperator G =
        assemble_gramian(0.0, s.prob.schedule.T, s.prob.B, s.prob.frac, s.prob.grid);
    const SpectralField psi0 = s.prob.psi.values.back();

    RunReport report;
    report.provenance = detail::provenance_lines(s, "terminal-identity");
    for (double lam : s.lambda_grid) {
        const TerminalIdentity id =
            terminal_identity_check(s.prob, tg, conv, psi0, s.prob.eta, s.target, lam, G);
        RunRow row;
        row.lambda = lam;
        row.terminal_error = lp_norm(id.lhs, s.prob.space);
        row.cost = lp_norm(id.rhs, s.prob.space);
        row.resolvent_residual = id.gap;
        row.cnd_lhs = cnd_check(s.cnd_inputs(lam));
        report.rows.push_back(row);
    }
    return report;
}

/// Gramian diagnostic: one row per mode with the diagonal entry in the
/// terminal_error column (lambda column carries the mode index).
inline RunReport run_gramian_report(const Scenario& s) {
    const GramianOperator G =
        assemble_gramian(0.0, s.prob.schedule.T, s.prob.B, s.prob.frac, s.prob.grid);
    RunReport report;
    report.provenance = detail::provenance_lines(s, "gramian");
    const std::vector<double> d = G.diagonal();
    for (std::size_t n = 0; n < d.size(); ++n) {
        RunRow row;
        row.lambda = static_cast<double>(n + 1);
        row.terminal_error = d[n];
        report.rows.push_back(row);
    }
    return report;
}

/// Solvability-condition report: one row per lambda with the condition value.
inline RunReport run_cnd_report(const Scenario& s) {
    RunReport report;
    report.provenance = detail::provenance_lines(s, "cnd");
    for (double lam : s.lambda_grid) {
        RunRow row;
        row.lambda = lam;
        row.cnd_lhs = cnd_check(s.cnd_inputs(lam));
        row.cost = cnd_R(s.cnd_inputs(lam));
        report.rows.push_back(row);
    }
    return report;
}

/// Special-function spot checks: classical-limit collapses and Wright moments.
/// Columns: terminal_error = |computed - reference| (lambda indexes the row).
inline RunReport run_specfun_report() {
    RunReport report;
    report.provenance.push_back("run = check-specfun");
    int idx = 0;
    auto push = [&](double computed, double reference) {
        RunRow row;
        row.lambda = static_cast<double>(++idx);
        row.terminal_error = std::fabs(computed - reference);
        row.cost = computed;
        row.resolvent_residual = reference;
        report.rows.push_back(row);
    };
    for (double t : {0.5, 1.0, 2.5, 5.0, 10.0}) {
        push(mittag_leffler(2.0, 1.0, -t * t), std::cos(t));
        push(mittag_leffler(2.0, 2.0, -t * t), std::sin(t) / t);
    }
    for (double gamma : {0.6, 0.75, 0.9})
        for (double c : {0.0, 1.0, 2.0})
            push(wright_moment(gamma, c), gamma_fn(1.0 + c) / gamma_fn(1.0 + gamma * c));
    return report;
}

}  // namespace fracwave
