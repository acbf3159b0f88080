#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "fracwave/specfun.hpp"

namespace fracwave::detail {

/// Cached uniform-grid table of y -> E_{alpha,beta}(-y^2) on [0, ymax] with
/// 4-point Lagrange interpolation (O(h^4)); the negative-axis evaluations are
/// expensive, and Gramian assembly / convolution kernels hit the same profile
/// tens of thousands of times.
class MLNegSqTable {
  public:
    MLNegSqTable(double alpha, double beta) : alpha_(alpha), beta_(beta) {}

    double operator()(double y) {
        y = std::fabs(y);
        // fixed spacing and grow-only extension keep every returned value
        // independent of the call history (byte-determinism of outputs)
        const double u = y * kInvH;
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(u) - 1;
        if (i < 0) i = 0;
        if (i + 3 >= static_cast<std::ptrdiff_t>(vals_.size()))
            extend(static_cast<std::size_t>(i) + 4);
        const double t = u - static_cast<double>(i);  // in [1,2] interior
        const double t0 = t, t1 = t - 1.0, t2 = t - 2.0, t3 = t - 3.0;
        return vals_[i] * (-t1 * t2 * t3 / 6.0) + vals_[i + 1] * (t0 * t2 * t3 / 2.0) +
               vals_[i + 2] * (-t0 * t1 * t3 / 2.0) + vals_[i + 3] * (t0 * t1 * t2 / 6.0);
    }

  private:
    static constexpr double kH = 1.0 / 512.0;
    static constexpr double kInvH = 512.0;

    void extend(std::size_t need) {
        const std::size_t n = std::max({need + need / 2, vals_.size(), std::size_t{1029}});
        const std::size_t old = vals_.size();
        vals_.resize(n);
        for (std::size_t k = old; k < n; ++k) {
            const double y = static_cast<double>(k) * kH;
            vals_[k] = mittag_leffler(alpha_, beta_, -y * y);
        }
    }

    double alpha_, beta_;
    std::vector<double> vals_;
};

inline MLNegSqTable& ml_neg_sq_table(double alpha, double beta) {
    thread_local std::map<std::pair<double, double>, MLNegSqTable> cache;
    auto it = cache.find({alpha, beta});
    if (it == cache.end())
        it = cache.emplace(std::make_pair(alpha, beta), MLNegSqTable(alpha, beta)).first;
    return it->second;
}

/// Cached evaluation of E_{alpha,beta}(-y^2).
inline double ml_neg_sq(double alpha, double beta, double y) {
    return ml_neg_sq_table(alpha, beta)(y);
}

}  // namespace fracwave::detail
