#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/quadrature.hpp"

namespace fracwave {

namespace detail {

inline constexpr double pi = 3.14159265358979323846;

// Lanczos approximation, g = 7, 9 terms.
inline constexpr double lanczos_g = 7.0;
inline constexpr double lanczos_coef[9] = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7,
};

inline bool is_nonpositive_integer(double x) {
    return x <= 0.0 && std::fabs(x - std::round(x)) < 1e-12;
}

// 1/Gamma in extended precision, overflow-safe for large |x| (the Lanczos
// product overflows double already near x = 143). Exact-period reduction
// keeps sin(pi x) accurate for large negative x.
inline long double rgamma_l(long double x) {
    if (is_nonpositive_integer(static_cast<double>(x))) return 0.0L;
    if (x >= 0.5L) return expl(-lgammal(x));
    const long double n = roundl(x);
    const long double r = x - n;
    long double s = sinl(static_cast<long double>(pi) * r);
    if (static_cast<long long>(n) % 2 != 0) s = -s;
    // 1/Gamma(x) = Gamma(1-x) sin(pi x) / pi
    return expl(lgammal(1.0L - x)) * s / static_cast<long double>(pi);
}

}  // namespace detail

/// Euler gamma function via the Lanczos series with reflection for x < 1/2.
inline double gamma_fn(double x) {
    if (detail::is_nonpositive_integer(x))
        throw domain_error("gamma_fn: pole at non-positive integer argument");
    if (x < 0.5) return detail::pi / (std::sin(detail::pi * x) * gamma_fn(1.0 - x));
    x -= 1.0;
    double a = detail::lanczos_coef[0];
    const double t = x + detail::lanczos_g + 0.5;
    for (int i = 1; i < 9; ++i) a += detail::lanczos_coef[i] / (x + i);
    return std::sqrt(2.0 * detail::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

/// Reciprocal gamma, finite everywhere (0 at the poles).
inline double rgamma(double x) {
    if (detail::is_nonpositive_integer(x)) return 0.0;
    if (x > 0.5 && x <= 140.0) return 1.0 / gamma_fn(x);
    return static_cast<double>(detail::rgamma_l(static_cast<long double>(x)));
}

struct MLParams {
    double alpha;
    double beta;

    void validate() const {
        if (!(alpha > 0.0) || alpha > 2.0) throw validation_error("ml.alpha", "must lie in (0, 2]");
        if (!(beta > 0.0)) throw validation_error("ml.beta", "must be > 0");
    }
};

namespace detail {

// Taylor series of E_{alpha,beta}(z) in extended precision with running
// cancellation estimate. Returns false if the estimate misses `rel_tol`.
inline bool ml_series(double alpha, double beta, double z, double rel_tol, double& out,
                      double& err_est) {
    if (z == 0.0) {
        out = rgamma(beta);
        err_est = 0.0;
        return true;
    }
    const long double la = alpha, lb = beta;
    const long double logz = logl(fabsl(static_cast<long double>(z)));
    const bool neg = z < 0.0;
    long double sum = 0.0L, comp = 0.0L, max_term = 0.0L, mag = 0.0L;
    int k = 0;
    const int max_terms = 800;
    bool terminated = false;
    for (; k < max_terms; ++k) {
        // log-scale term evaluation: immune to double-range overflow of Gamma
        mag = expl(k * logz - lgammal(la * k + lb));
        const long double term = (neg && (k & 1)) ? -mag : mag;
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        max_term = std::max(max_term, mag);
        if (k > 4 && mag < 1e-20L * std::max(fabsl(sum), 1e-300L) &&
            static_cast<double>(k) > std::fabs(z) / std::max(alpha, 0.5)) {
            terminated = true;
            break;
        }
    }
    const long double err =
        max_term * 1.1e-19L * sqrtl(static_cast<long double>(k + 1)) + mag;
    err_est = static_cast<double>(err);
    out = static_cast<double>(sum);
    if (!terminated) return false;
    return err <= static_cast<long double>(rel_tol) * std::max(fabsl(sum), 1e-300L);
}

// Spectral representation of E_{alpha,beta}(-x) for x > 0, alpha in (0,2].
// Residue pair (present for alpha > 1) plus the branch-cut integral.
inline double ml_negative_integral(double alpha, double beta, double x) {
    if (alpha - beta <= -0.999)
        throw accuracy_error("mittag_leffler: unsupported (alpha,beta) for integral branch", 1.0);
    double res = 0.0;
    if (alpha > 1.0) {
        const double xr = std::pow(x, 1.0 / alpha);
        res = (2.0 / alpha) * std::pow(x, (1.0 - beta) / alpha) *
              std::exp(xr * std::cos(pi / alpha)) *
              std::cos(xr * std::sin(pi / alpha) + pi * (1.0 - beta) / alpha);
    }
    const double s1 = std::sin(pi * (1.0 - beta));
    const double s2 = std::sin(pi * (1.0 - beta + alpha));
    const double ca = std::cos(pi * alpha);
    auto integrand = [&](double u) {
        const double ua = std::pow(u, alpha);
        const double den = ua * ua + 2.0 * ua * x * ca + x * x;
        return std::pow(u, alpha - beta) * std::exp(-u) * (s1 * ua + x * s2) / den;
    };
    // [0,1]: substitute u = w^m so the u^{alpha-beta} endpoint singularity
    // (and the u^alpha kink) become high-order zeros the bisection can chase.
    const double c0 = 1.0 + alpha - beta;
    const double m = std::max(4.0, std::ceil(6.0 / c0));
    auto g = [&](double w) {
        const double u = std::pow(w, m);
        const double ua = std::pow(u, alpha);
        const double den = ua * ua + 2.0 * ua * x * ca + x * x;
        return m * std::pow(w, m * c0 - 1.0) * std::exp(-u) * (s1 * ua + x * s2) / den;
    };
    const double tol = 1e-13 * (1.0 + 1.0 / x);
    const double part0 = quad::adaptive(g, 0.0, 1.0, tol);
    std::vector<double> brk;
    if (ca < 0.0) {
        const double ustar = std::pow(-x * ca, 1.0 / alpha);
        if (ustar > 1.0 && ustar < 60.0) {
            brk = {0.7 * ustar, ustar, 1.4 * ustar};
        }
    }
    const double part1 = quad::adaptive(integrand, 1.0, 60.0, tol, brk);
    return res + (part0 + part1) / pi;
}

}  // namespace detail

/// Two-parameter Mittag-Leffler function E_{alpha,beta}(z), real argument.
/// Target accuracy 1e-9 relative on the decay branch z in [-1e4, 10].
inline double mittag_leffler(const MLParams& p, double z) {
    p.validate();
    const double a = p.alpha, b = p.beta;
    if (a == 1.0 && b == 1.0) return std::exp(z);
    if (a == 2.0 && b == 1.0)
        return z <= 0.0 ? std::cos(std::sqrt(-z)) : std::cosh(std::sqrt(z));
    if (a == 2.0 && b == 2.0) {
        if (z == 0.0) return 1.0;
        const double r = std::sqrt(std::fabs(z));
        return z < 0.0 ? std::sin(r) / r : std::sinh(r) / r;
    }
    double val, err;
    if (detail::ml_series(a, b, z, 1e-10, val, err)) return val;
    if (z < 0.0) return detail::ml_negative_integral(a, b, -z);
    throw accuracy_error("mittag_leffler: no convergent representation for given (alpha,beta,z)",
                         err);
}

inline double mittag_leffler(double alpha, double beta, double z) {
    return mittag_leffler(MLParams{alpha, beta}, z);
}

namespace detail {

// Per-gamma cache of 1/Gamma(1 - g(k+1)).
inline const std::vector<long double>& wright_rgamma_table(double g) {
    thread_local std::map<double, std::vector<long double>> cache;
    auto& tab = cache[g];
    if (tab.empty()) {
        tab.reserve(801);
        for (int k = 0; k <= 800; ++k)
            tab.push_back(detail::rgamma_l(1.0L - static_cast<long double>(g) * (k + 1)));
    }
    return tab;
}

}  // namespace detail

/// Mainardi Wright-type function M_gamma(theta) = sum_k (-theta)^k / (k! Gamma(1-gamma(k+1))).
/// Series with compensated accumulation; super-exponential tail handled by the
/// saddle-point asymptotic once the series loses the required digits.
inline double mainardi_wright(double g, double theta) {
    if (!(g > 0.0 && g < 1.0)) throw domain_error("mainardi_wright: gamma must lie in (0,1)");
    if (theta < 0.0) throw domain_error("mainardi_wright: theta must be >= 0");
    const auto& rg = detail::wright_rgamma_table(g);

    long double sum = 0.0L, comp = 0.0L, max_term = 0.0L;
    long double ak = 1.0L;  // (-theta)^k / k!
    int k = 0, small_run = 0;
    bool terminated = false;
    for (; k < 800; ++k) {
        const long double term = ak * rg[static_cast<std::size_t>(k)];
        const long double y = term - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        max_term = std::max(max_term, fabsl(term));
        ak *= -static_cast<long double>(theta) / (k + 1);
        // pole zeros of 1/Gamma give spurious tiny terms; demand a run of them
        if (fabsl(term) < 1e-22L * std::max(max_term, 1e-300L))
            ++small_run;
        else
            small_run = 0;
        if (k > 4 && small_run >= 3 && static_cast<double>(k) > theta) {
            terminated = true;
            break;
        }
    }
    const long double err = max_term * 1.1e-19L * sqrtl(static_cast<long double>(k + 1));
    const double val = static_cast<double>(sum);
    // |sum| beyond any attainable density value flags pure cancellation noise
    if (terminated && fabsl(sum) < 50.0L && err <= std::max(1e-13L, 1e-9L * fabsl(sum)))
        return val;

    // Leading-order large-theta asymptotic: M_g(t) ~ A t^p exp(-b t^c).
    const double c = 1.0 / (1.0 - g);
    const double b = (1.0 - g) * std::pow(g, g * c);
    const double Y = b * std::pow(theta, c);
    if (Y >= 5.0) {
        const double p = (g - 0.5) * c;
        const double A = std::pow(g, p) / std::sqrt(2.0 * detail::pi * (1.0 - g));
        return A * std::pow(theta, p) * std::exp(-Y);
    }
    throw accuracy_error("mainardi_wright: series not convergent at requested tolerance", err);
}

/// Moment of the Wright-type kernel: integral of theta^c M_gamma(theta) = Gamma(1+c)/Gamma(1+gamma c).
inline double wright_moment(double g, double c) {
    if (!(g > 0.0 && g < 1.0)) throw domain_error("wright_moment: gamma must lie in (0,1)");
    if (!(c > -1.0)) throw domain_error("wright_moment: exponent must be > -1");
    return gamma_fn(1.0 + c) / gamma_fn(1.0 + g * c);
}

enum class SubordinationKind { Cosine, SineWeighted };

/// Quadrature oracle for the theta-integrals subordinating the classical
/// cosine/sine families: cosine kind is the integral of M_g(theta) cos(z theta),
/// sine-weighted kind the integral of g theta M_g(theta) sin(z theta).
inline double subordination_oracle(double g, SubordinationKind kind, double z,
                                   const QuadratureSpec& q = {}) {
    q.validate();
    if (z < 0.0) throw domain_error("subordination_oracle: z must be >= 0");
    auto f = [&](double th) {
        const double m = mainardi_wright(g, th);
        return kind == SubordinationKind::Cosine ? m * std::cos(z * th)
                                                 : g * th * m * std::sin(z * th);
    };
    if (q.scheme == QuadScheme::FixedGauss) {
        const int panels =
            std::max(8, static_cast<int>(q.upper_cutoff * (1.0 + std::fabs(z) / 4.0)));
        return quad::composite_gl(f, 0.0, q.upper_cutoff, panels, q.node_count);
    }
    // Seed the adaptive pass with breakpoints resolving the oscillation.
    std::vector<double> brk;
    const double period = 2.0 * detail::pi / std::max(z, 0.5);
    for (double t = period; t < q.upper_cutoff; t += period) brk.push_back(t);
    return quad::adaptive(f, 0.0, q.upper_cutoff, 1e-10, brk);
}

}  // namespace fracwave
