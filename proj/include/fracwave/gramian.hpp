#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "fracwave/banach.hpp"
#include "fracwave/errors.hpp"
#include "fracwave/mltable.hpp"
#include "fracwave/quadrature.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

/// Controllability Gramian over [s, tau] in the sine-mode representation.
struct GramianOperator {
    double s = 0.0;
    double tau = 1.0;
    double gamma = 0.75;
    Eigen::MatrixXd matrix;  // N x N, symmetric positive semidefinite

    SpectralField apply(const SpectralField& x) const {
        Eigen::Map<const Eigen::VectorXd> c(x.coeffs.data(),
                                            static_cast<Eigen::Index>(x.coeffs.size()));
        Eigen::VectorXd y = matrix * c;
        return x.with_coeffs(std::vector<double>(y.data(), y.data() + y.size()));
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<std::size_t>(matrix.rows()));
        for (Eigen::Index i = 0; i < matrix.rows(); ++i) d[static_cast<std::size_t>(i)] = matrix(i, i);
        return d;
    }
};

namespace detail {

/// Mode-space matrix of the control operator (identity -> I).
inline Eigen::MatrixXd control_mode_matrix(const ControlOperatorSpec& B, const GridPtr& g) {
    const int N = g->mode_count;
    if (B.kind == ControlKind::Identity) return Eigen::MatrixXd::Identity(N, N);
    Eigen::MatrixXd M(N, N);
    for (int m = 1; m <= N; ++m) {
        std::vector<double> e(static_cast<std::size_t>(N), 0.0);
        e[static_cast<std::size_t>(m - 1)] = 1.0;
        SpectralField bw = apply_B(SpectralField::from_coeffs(g, std::move(e)), B);
        for (int n = 1; n <= N; ++n) M(n - 1, m - 1) = bw.coeffs[static_cast<std::size_t>(n - 1)];
    }
    // symmetrize away quadrature round-off
    M = 0.5 * (M + M.transpose()).eval();
    return M;
}

/// Diagonal of S_gamma(u)* in modes at u = sigma^{1/gamma}: entries
/// sigma * E_{2g,2g}(-n^2 sigma^2).
inline void s_gamma_diag_at_sigma(double sigma, double two_gamma, int N, Eigen::VectorXd& d) {
    auto& tab = ml_neg_sq_table(two_gamma, two_gamma);
    for (int n = 1; n <= N; ++n) d[n - 1] = sigma * tab(n * sigma);
}

}  // namespace detail

/// Assemble the Gramian int_s^tau (tau-t)^{g-1} S_g(tau-t) B B* S_g(tau-t)* dt.
/// The endpoint singularity (tau-t)^{g-1} is removed exactly by the
/// substitution sigma = (tau-t)^g, leaving a smooth integrand on
/// [0, (tau-s)^g] handled by composite Gauss panels.
inline GramianOperator assemble_gramian(double s, double tau, const ControlOperatorSpec& Bspec,
                                        const FractionalParams& p, const GridPtr& g,
                                        int panels_per_unit = 256) {
    p.validate();
    if (!(s >= 0.0) || s >= tau) throw domain_error("gramian: requires 0 <= s < tau");
    const int N = g->mode_count;
    const double two_gamma = 2.0 * p.gamma;
    const double sig_max = std::pow(tau - s, p.gamma);

    GramianOperator G;
    G.s = s;
    G.tau = tau;
    G.gamma = p.gamma;
    G.matrix = Eigen::MatrixXd::Zero(N, N);

    const bool identity_B = (Bspec.kind == ControlKind::Identity);
    Eigen::MatrixXd Bmat;
    if (!identity_B) Bmat = detail::control_mode_matrix(Bspec, g);

    const int panels = std::max(16, static_cast<int>(std::ceil(panels_per_unit * (tau - s))));
    const double hp = sig_max / panels;
    Eigen::VectorXd d(N);
    for (int k = 0; k < panels; ++k) {
        const double a = k * hp, b = a + hp;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (const auto& node : quad::gl16) {
            const double sigma = mid + half * node.x;
            const double w = half * node.w / p.gamma;
            detail::s_gamma_diag_at_sigma(sigma, two_gamma, N, d);
            if (identity_B) {
                for (int n = 0; n < N; ++n) G.matrix(n, n) += w * d[n] * d[n];
            } else {
                Eigen::MatrixXd M = d.asDiagonal() * Bmat;
                G.matrix.noalias() += w * (M * M.transpose());
            }
        }
    }
    G.matrix = 0.5 * (G.matrix + G.matrix.transpose()).eval();
    return G;
}

/// Quadratic form <x*, Phi x*> evaluated by direct time quadrature of the
/// squared adjoint observation, independent of the assembled matrix.
inline double gramian_quadratic_form(const SpectralField& xstar, const GramianOperator& G,
                                     const ControlOperatorSpec& Bspec,
                                     const FractionalParams& p) {
    const auto& g = xstar.grid;
    const int N = g->mode_count;
    const double two_gamma = 2.0 * p.gamma;
    const double sig_max = std::pow(G.tau - G.s, p.gamma);
    const bool identity_B = (Bspec.kind == ControlKind::Identity);
    Eigen::MatrixXd Bmat;
    if (!identity_B) Bmat = detail::control_mode_matrix(Bspec, g);
    Eigen::Map<const Eigen::VectorXd> c(xstar.coeffs.data(), N);

    Eigen::VectorXd d(N);
    auto integrand = [&](double sigma) {
        detail::s_gamma_diag_at_sigma(sigma, two_gamma, N, d);
        Eigen::VectorXd obs = d.cwiseProduct(c);  // S_gamma* x* in modes
        if (!identity_B) obs = (Bmat.transpose() * obs).eval();
        return obs.squaredNorm() / p.gamma;
    };
    // deliberately a different panel count than assembly: two-route check
    const int panels = std::max(24, static_cast<int>(std::ceil(384 * (G.tau - G.s))));
    return quad::composite_gl(integrand, 0.0, sig_max, panels);
}

struct ResolventSolve {
    SpectralField z;
    double residual = 0.0;
    int iterations = 0;
    double lambda = 0.0;
};

/// Solve the regularized equation lambda z + Phi J[z] = lambda h.
/// p = 2: direct symmetric solve. p != 2: damped fixed-point iteration
/// z <- (lambda I + Phi)^{-1}(lambda h + Phi (z - J[z])), damping halved
/// whenever the residual fails to decrease.
inline ResolventSolve solve_resolvent_eq(double lambda, const SpectralField& h,
                                         const GramianOperator& G, const LebesgueSpace& sp,
                                         int max_iter = 200) {
    sp.validate();
    if (!(lambda > 0.0)) throw domain_error("resolvent: lambda must be > 0");
    const int N = static_cast<int>(h.coeffs.size());
    Eigen::Map<const Eigen::VectorXd> hv(h.coeffs.data(), N);
    Eigen::MatrixXd A = G.matrix;
    A.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);

    ResolventSolve out;
    out.lambda = lambda;
    const double hnorm = lp_norm(h, sp);

    auto to_field = [&](const Eigen::VectorXd& v) {
        return h.with_coeffs(std::vector<double>(v.data(), v.data() + v.size()));
    };
    auto residual_of = [&](const Eigen::VectorXd& zv, const SpectralField& zf) {
        SpectralField jz = duality_map(zf, sp);
        Eigen::Map<const Eigen::VectorXd> jv(jz.coeffs.data(), N);
        Eigen::VectorXd r = lambda * zv + G.matrix * jv - lambda * hv;
        return lp_norm(to_field(r), sp);
    };

    if (sp.p == 2.0) {
        Eigen::VectorXd zv = ldlt.solve(lambda * hv);
        out.z = to_field(zv);
        out.residual = residual_of(zv, out.z);
        out.iterations = 1;
    } else {
        const double tol = 1e-8 * lambda * std::max(hnorm, 1e-300);
        Eigen::VectorXd zv = ldlt.solve(lambda * hv);  // p=2 solution as warm start
        SpectralField zf = to_field(zv);
        double res = residual_of(zv, zf);
        double damping = 0.5;
        int it = 0;
        while (res > tol && it < max_iter / 2) {
            SpectralField jz = duality_map(zf, sp);
            Eigen::Map<const Eigen::VectorXd> jv(jz.coeffs.data(), N);
            Eigen::VectorXd znew = ldlt.solve(lambda * hv + G.matrix * (zv - jv));
            Eigen::VectorXd cand = zv + damping * (znew - zv);
            SpectralField cf = to_field(cand);
            const double cres = residual_of(cand, cf);
            if (cres < res) {
                zv = std::move(cand);
                zf = std::move(cf);
                res = cres;
            } else {
                damping *= 0.5;
                if (damping < 1e-6) break;  // stalled; hand over to Newton
            }
            ++it;
        }
        // Newton fallback: finite-difference Jacobian of F(z) = lambda z
        // + Phi J[z] - lambda h, with backtracking on the residual
        auto F_of = [&](const Eigen::VectorXd& v, const SpectralField& f) {
            SpectralField j = duality_map(f, sp);
            Eigen::Map<const Eigen::VectorXd> jv(j.coeffs.data(), N);
            return Eigen::VectorXd(lambda * v + G.matrix * jv - lambda * hv);
        };
        while (res > tol && it < max_iter) {
            const Eigen::VectorXd F0 = F_of(zv, zf);
            SpectralField j0 = duality_map(zf, sp);
            Eigen::Map<const Eigen::VectorXd> j0v(j0.coeffs.data(), N);
            const double eps = 1e-7 * std::max(1.0, zv.norm());
            Eigen::MatrixXd Jac(N, N);
            for (int i = 0; i < N; ++i) {
                Eigen::VectorXd vp = zv;
                vp[i] += eps;
                SpectralField fp = to_field(vp);
                SpectralField jp = duality_map(fp, sp);
                Eigen::Map<const Eigen::VectorXd> jpv(jp.coeffs.data(), N);
                Jac.col(i) = G.matrix * ((jpv - j0v) / eps);
                Jac(i, i) += lambda;
            }
            const Eigen::VectorXd step = Jac.partialPivLu().solve(-F0);
            double t = 1.0;
            bool accepted = false;
            for (int back = 0; back < 40; ++back, t *= 0.5) {
                Eigen::VectorXd cand = zv + t * step;
                SpectralField cf = to_field(cand);
                const double cres = residual_of(cand, cf);
                if (cres < res) {
                    zv = std::move(cand);
                    zf = std::move(cf);
                    res = cres;
                    accepted = true;
                    break;
                }
            }
            ++it;
            if (!accepted) break;
        }
        if (res > tol) throw convergence_error("resolvent solve stalled", res, it);
        out.z = std::move(zf);
        out.residual = res;
        out.iterations = it;
    }

    if (hnorm > 0.0 && lp_norm(out.z, sp) > hnorm * (1.0 + 1e-9))
        throw convergence_error("resolvent contraction bound violated",
                                lp_norm(out.z, sp) - hnorm, out.iterations);
    return out;
}

/// Norm of the regularized solution per lambda; decays toward 0 when the
/// truncated Gramian is positive definite.
inline std::vector<std::pair<double, double>> h0_lambda_sweep(
    const SpectralField& h, const std::vector<double>& lambdas, const GramianOperator& G,
    const LebesgueSpace& sp) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0))
            throw validation_error("sweep.lambda_grid", "entries must be > 0");
        if (i > 0 && lambdas[i] >= lambdas[i - 1])
            throw validation_error("sweep.lambda_grid", "must be strictly decreasing");
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(lambdas.size());
    for (double lam : lambdas) {
        const auto sol = solve_resolvent_eq(lam, h, G, sp);
        out.emplace_back(lam, lp_norm(sol.z, sp));
    }
    return out;
}

}  // namespace fracwave
