#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/specfun.hpp"

namespace fracwave {

struct FractionalParams {
    double alpha;           // order in (1, 2]; 2 = classical wave limit
    double gamma;           // alpha / 2
    double cosine_bound_M = 1.0;

    static FractionalParams from_alpha(double a) { return FractionalParams{a, a / 2.0, 1.0}; }

    void validate() const {
        if (!(alpha > 1.0) || alpha > 2.0)
            throw validation_error("fractional.alpha", "must lie in (1, 2]");
        if (std::fabs(gamma - alpha / 2.0) > 1e-14)
            throw validation_error("fractional.gamma", "must equal alpha/2");
        if (cosine_bound_M < 1.0)
            throw validation_error("fractional.cosine_bound_M", "must be >= 1");
    }
};

/// Uniform grid on [0, pi] with the sine eigenbasis w_n(x) = sqrt(2/pi) sin(nx).
struct SpatialGrid {
    int n_points;
    int mode_count;
    std::vector<double> nodes;
    std::vector<double> basis;  // [n-1][i] row-major, n = 1..mode_count

    SpatialGrid(int modes, int points) : n_points(points), mode_count(modes) {
        if (mode_count < 1) throw validation_error("grid.mode_count", "must be >= 1");
        if (n_points < 2 * mode_count + 1)
            throw validation_error("grid.n_points", "must be >= 2*mode_count + 1");
        nodes.resize(n_points);
        const double h = detail::pi / (n_points - 1);
        for (int i = 0; i < n_points; ++i) nodes[i] = i * h;
        nodes.back() = detail::pi;
        basis.resize(static_cast<std::size_t>(mode_count) * n_points);
        const double c = std::sqrt(2.0 / detail::pi);
        for (int n = 1; n <= mode_count; ++n)
            for (int i = 0; i < n_points; ++i)
                basis[static_cast<std::size_t>(n - 1) * n_points + i] = c * std::sin(n * nodes[i]);
    }

    double h() const { return detail::pi / (n_points - 1); }
    const double* mode_row(int n) const {
        return basis.data() + static_cast<std::size_t>(n - 1) * n_points;
    }
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

inline GridPtr make_grid(int modes, int points) {
    return std::make_shared<const SpatialGrid>(modes, points);
}

/// State carried simultaneously as sine-mode coefficients and grid samples.
struct SpectralField {
    GridPtr grid;
    std::vector<double> coeffs;       // length mode_count
    std::vector<double> grid_values;  // length n_points

    static SpectralField zero(const GridPtr& g) {
        SpectralField f;
        f.grid = g;
        f.coeffs.assign(g->mode_count, 0.0);
        f.grid_values.assign(g->n_points, 0.0);
        return f;
    }

    static SpectralField from_coeffs(const GridPtr& g, std::vector<double> c) {
        if (static_cast<int>(c.size()) != g->mode_count)
            throw validation_error("field.coeffs", "length must equal grid.mode_count");
        SpectralField f;
        f.grid = g;
        f.coeffs = std::move(c);
        f.grid_values.assign(g->n_points, 0.0);
        for (int n = 1; n <= g->mode_count; ++n) {
            const double cn = f.coeffs[n - 1];
            if (cn == 0.0) continue;
            const double* row = g->mode_row(n);
            for (int i = 0; i < g->n_points; ++i) f.grid_values[i] += cn * row[i];
        }
        return f;
    }

    // projection without the Dirichlet boundary check (raw mode analysis)
    static SpectralField project(const GridPtr& g, const std::vector<double>& values) {
        if (static_cast<int>(values.size()) != g->n_points)
            throw validation_error("field.grid_values", "length must equal grid.n_points");
        std::vector<double> c(g->mode_count);
        const double h = g->h();
        for (int n = 1; n <= g->mode_count; ++n) {
            const double* row = g->mode_row(n);
            double s = 0.0;
            // trapezoid; endpoint terms vanish with the sine basis
            for (int i = 1; i + 1 < g->n_points; ++i) s += values[i] * row[i];
            c[n - 1] = s * h;
        }
        return from_coeffs(g, std::move(c));
    }

    SpectralField with_coeffs(std::vector<double> c) const {
        return from_coeffs(grid, std::move(c));
    }
};

/// Analysis transform; exact round trip for fields band-limited to mode_count.
inline SpectralField sine_transform(const std::vector<double>& values, const GridPtr& g) {
    if (static_cast<int>(values.size()) != g->n_points)
        throw validation_error("field.grid_values", "length must equal grid.n_points");
    if (std::fabs(values.front()) > 1e-9 || std::fabs(values.back()) > 1e-9)
        throw validation_error("field.grid_values", "boundary values must vanish (Dirichlet)");
    return SpectralField::project(g, values);
}

inline SpectralField map_modes(const SpectralField& x, const std::function<double(int)>& factor) {
    std::vector<double> c(x.coeffs.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = factor(static_cast<int>(i) + 1) * x.coeffs[i];
    return SpectralField::from_coeffs(x.grid, std::move(c));
}

// classical wave families on the sine eigenbasis
inline SpectralField cosine_family(double t, const SpectralField& x) {
    return map_modes(x, [t](int n) { return std::cos(n * t); });
}

inline SpectralField sine_family(double t, const SpectralField& x) {
    return map_modes(x, [t](int n) { return std::sin(n * t) / n; });
}

// scalar mode factors of the three fractional families
inline double c_gamma_factor(const FractionalParams& p, int n, double t) {
    if (t < 0.0) throw domain_error("c_gamma: t must be >= 0");
    const double tg = std::pow(t, p.gamma);
    return mittag_leffler(2.0 * p.gamma, 1.0, -static_cast<double>(n) * n * tg * tg);
}

inline double t_gamma_factor(const FractionalParams& p, int n, double t) {
    if (t < 0.0) throw domain_error("t_gamma: t must be >= 0");
    const double tg = std::pow(t, p.gamma);
    return t * mittag_leffler(2.0 * p.gamma, 2.0, -static_cast<double>(n) * n * tg * tg);
}

inline double s_gamma_factor(const FractionalParams& p, int n, double t) {
    if (t < 0.0) throw domain_error("s_gamma: t must be >= 0");
    const double tg = std::pow(t, p.gamma);
    return tg * mittag_leffler(2.0 * p.gamma, 2.0 * p.gamma,
                               -static_cast<double>(n) * n * tg * tg);
}

inline SpectralField c_gamma(double t, const SpectralField& x, const FractionalParams& p) {
    return map_modes(x, [&](int n) { return c_gamma_factor(p, n, t); });
}

inline SpectralField t_gamma(double t, const SpectralField& x, const FractionalParams& p) {
    return map_modes(x, [&](int n) { return t_gamma_factor(p, n, t); });
}

inline SpectralField s_gamma(double t, const SpectralField& x, const FractionalParams& p) {
    return map_modes(x, [&](int n) { return s_gamma_factor(p, n, t); });
}

enum class ControlKind { Identity, IntegralKernel };

/// Control operator: identity, or a symmetric integral kernel on [0, pi].
struct ControlOperatorSpec {
    ControlKind kind = ControlKind::Identity;
    std::function<double(double, double)> kernel;  // K(zeta, xi)
    double operator_norm_Mtilde = 1.0;

    static ControlOperatorSpec identity() { return ControlOperatorSpec{}; }

    static ControlOperatorSpec integral_kernel(std::function<double(double, double)> k,
                                               const GridPtr& g) {
        ControlOperatorSpec spec;
        spec.kind = ControlKind::IntegralKernel;
        spec.kernel = std::move(k);
        for (int i = 0; i < g->n_points; i += std::max(1, g->n_points / 16)) {
            for (int j = 0; j < g->n_points; j += std::max(1, g->n_points / 16)) {
                const double a = spec.kernel(g->nodes[i], g->nodes[j]);
                const double b = spec.kernel(g->nodes[j], g->nodes[i]);
                if (std::fabs(a - b) > 1e-12 * (1.0 + std::fabs(a)))
                    throw validation_error("control.kernel", "must be symmetric");
            }
        }
        spec.operator_norm_Mtilde = estimate_norm(spec, g);
        return spec;
    }

    // largest singular value of the discretized kernel via power iteration
    static double estimate_norm(const ControlOperatorSpec& spec, const GridPtr& g) {
        const int m = g->n_points;
        const double h = g->h();
        std::vector<double> v(m, 1.0), w(m);
        v.front() = v.back() = 0.0;
        double norm = 0.0;
        for (int it = 0; it < 60; ++it) {
            for (int i = 0; i < m; ++i) {
                double s = 0.0;
                for (int j = 1; j + 1 < m; ++j) s += spec.kernel(g->nodes[j], g->nodes[i]) * v[j];
                w[i] = s * h;
            }
            double nw = 0.0;
            for (int i = 1; i + 1 < m; ++i) nw += w[i] * w[i] * h;
            nw = std::sqrt(nw);
            if (nw == 0.0) return 0.0;
            double nv = 0.0;
            for (int i = 1; i + 1 < m; ++i) nv += v[i] * v[i] * h;
            norm = nw / std::sqrt(nv);
            for (int i = 0; i < m; ++i) v[i] = w[i] / nw;
        }
        return norm;
    }
};

inline SpectralField apply_B(const SpectralField& u, const ControlOperatorSpec& spec) {
    if (spec.kind == ControlKind::Identity) return u;
    const auto& g = u.grid;
    const double h = g->h();
    std::vector<double> out(g->n_points, 0.0);
    for (int i = 0; i < g->n_points; ++i) {
        double s = 0.0;
        for (int j = 1; j + 1 < g->n_points; ++j)
            s += spec.kernel(g->nodes[j], g->nodes[i]) * u.grid_values[j];
        out[i] = s * h;
    }
    return SpectralField::project(g, out);
}

/// Adjoint of the control operator; equals apply_B for a symmetric kernel.
inline SpectralField apply_B_adjoint(const SpectralField& u, const ControlOperatorSpec& spec) {
    return apply_B(u, spec);
}

/// Limiting value of the per-mode ratio s_gamma_factor(t) / t^gamma as t -> 0+,
/// equivalently of S_gamma(T-t)/(T-t)^gamma as t -> T-.
inline double s_gamma_ratio_limit(const FractionalParams& p) {
    return 2.0 * p.gamma / gamma_fn(1.0 + 2.0 * p.gamma);
}

/// Field with coefficients [s_gamma_factor(n, T-t)/(T-t)^gamma] <x*, w_n>.
inline SpectralField s_gamma_terminal_ratio(double t, double T, const SpectralField& xstar,
                                            const FractionalParams& p) {
    if (t >= T) throw domain_error("s_gamma_terminal_ratio: requires t < T");
    const double d = T - t;
    const double dg = std::pow(d, p.gamma);
    return map_modes(xstar, [&](int n) { return s_gamma_factor(p, n, d) / dg; });
}

}  // namespace fracwave
