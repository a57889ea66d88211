#include "stoptree/lattice.hpp"

#include <limits>
#include <stdexcept>

namespace stoptree {

DiscreteStoppingRule::DiscreteStoppingRule(const SolveResult& result)
    : scheme_(result.scheme),
      steps_(result.steps),
      lo_offset_(result.lo_offset),
      hi_offset_(result.hi_offset),
      width_(result.width()),
      memory_count_(result.memory_count),
      stop_(result.stop_flags) {
    if (!result.has_stop_region || !stop_)
        throw std::invalid_argument("stopping rule needs a solve with want_stop_region");
}

namespace detail {

std::vector<double> suffix_payoff_max(const Payoff& payoff, double level, int steps, double dt) {
    std::vector<double> out(steps + 1);
    out[steps] = payoff(steps * dt, level);
    for (int k = steps - 1; k >= 0; --k)
        out[k] = std::max(payoff(k * dt, level), out[k + 1]);
    return out;
}

double stop_block_boundary(const std::vector<uint8_t>& stop_row, const std::vector<double>& pay_row,
                           int idx_lo, int idx_hi, bool put_style, double root, double grid_step,
                           int lo_offset) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (put_style) {
        int best = -1;
        for (int i = idx_lo; i <= idx_hi; ++i) {
            if (!stop_row[i]) break;
            if (pay_row[i] > 0.0) best = i;
        }
        return best < 0 ? nan : root + (best + lo_offset) * grid_step;
    }
    int best = -1;
    for (int i = idx_hi; i >= idx_lo; --i) {
        if (!stop_row[i]) break;
        if (pay_row[i] > 0.0) best = i;
    }
    return best < 0 ? nan : root + (best + lo_offset) * grid_step;
}

}  // namespace detail

}  // namespace stoptree
