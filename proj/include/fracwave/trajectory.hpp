#pragma once

#include <vector>

#include "fracwave/errors.hpp"
#include "fracwave/spectral.hpp"

namespace fracwave {

/// Piecewise-continuous trajectory: one sample block per subinterval of the
/// impulse partition, each uniform in time. Blocks never interpolate across
/// their boundaries, preserving the jump structure; the value at a block's
/// left endpoint belongs to the preceding block (left continuity).
struct Trajectory {
    struct Block {
        double t0, t1;
        bool impulse_block = false;
        std::vector<double> times;         // increasing, times.front() >= t0
        std::vector<SpectralField> states;  // one per time sample
    };
    std::vector<Block> blocks;

    double t_end() const { return blocks.empty() ? 0.0 : blocks.back().t1; }

    /// Value with the left-continuity convention: block boundaries resolve to
    /// the earlier block, so value_at(tau_j) is the left limit at tau_j.
    SpectralField value_at(double t) const {
        if (blocks.empty()) throw domain_error("trajectory: empty");
        if (t < blocks.front().t0 - 1e-12 || t > t_end() + 1e-12)
            throw domain_error("trajectory: time outside sampled range");
        const Block* blk = &blocks.front();
        for (const auto& b : blocks) {
            if (t > b.t0 + 1e-14) blk = &b;
        }
        const auto& ts = blk->times;
        if (t <= ts.front()) return blk->states.front();
        if (t >= ts.back()) return blk->states.back();
        const double dt = ts[1] - ts[0];
        auto k = static_cast<std::size_t>((t - ts.front()) / dt);
        if (k + 1 >= ts.size()) k = ts.size() - 2;
        const double w = (t - ts[k]) / (ts[k + 1] - ts[k]);
        std::vector<double> c(blk->states[k].coeffs.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            c[i] = (1.0 - w) * blk->states[k].coeffs[i] + w * blk->states[k + 1].coeffs[i];
        return SpectralField::from_coeffs(blk->states[k].grid, std::move(c));
    }
};

}  // namespace fracwave
