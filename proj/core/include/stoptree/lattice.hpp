#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "stoptree/model.hpp"

namespace stoptree {

enum class SchemeKind { binomial, trinomial };

struct SolveOptions {
    /// Keep the full (time x node [x memory]) stop region so a stopping rule
    /// can be extracted. Memory cost is (n+1) * width * memories bytes.
    bool want_stop_region = false;
    /// Keep value-surface slices for CSV emission / inspection.
    bool want_surface = false;
    /// Keep every stride-th time layer when want_surface is set.
    int surface_stride = 1;
};

struct SurfaceSlice {
    int k = 0;
    double t = 0.0;
    std::vector<double> value_up;  // memory +1 (binomial) or the only surface (trinomial)
    std::vector<double> value_dn;  // binomial memory -1; empty for trinomial
    std::vector<uint8_t> stop_up;  // 1 where the payoff attains the max
    std::vector<uint8_t> stop_dn;
};

struct SolveResult {
    SchemeKind scheme = SchemeKind::binomial;
    double root_value = 0.0;
    int steps = 0;
    double dt = 0.0;
    double grid_step = 0.0;  // sqrt(h), or sigma_bar * sqrt(h)
    double root = 0.0;
    int lo_offset = 0;
    int hi_offset = 0;
    int memory_count = 1;
    double wall_seconds = 0.0;

    /// Exercise boundary per time index (puts: top of the lower stop block;
    /// calls: bottom of the upper block; NaN when empty).
    std::vector<double> boundary_up;
    std::vector<double> boundary_dn;  // binomial memory -1

    bool has_stop_region = false;
    std::shared_ptr<const std::vector<uint8_t>> stop_flags;

    std::vector<SurfaceSlice> surface;

    int width() const { return hi_offset - lo_offset + 1; }
    double level(int offset) const { return root + offset * grid_step; }
    double time_of(int k) const { return k * dt; }

    bool stop_at(int k, int offset, int memory = 1) const {
        const int mem_slot = (memory_count == 2 && memory < 0) ? 1 : 0;
        const size_t idx =
            (static_cast<size_t>(k) * width() + (offset - lo_offset)) * memory_count + mem_slot;
        return (*stop_flags)[idx] != 0;
    }
};

/// Earliest rational stopping rule of a solved lattice: eta* is the first k
/// at which the dynamic-programming value equals the payoff.
class DiscreteStoppingRule {
public:
    explicit DiscreteStoppingRule(const SolveResult& result);

    SchemeKind scheme() const { return scheme_; }
    int steps() const { return steps_; }

    /// memory is +1/-1 for the binomial scheme and ignored otherwise. States
    /// at or past maturity always stop.
    bool should_stop(int k, int offset, int memory = 1) const {
        if (k >= steps_) return true;
        if (offset < lo_offset_ || offset > hi_offset_) return true;
        const int mem_slot = (memory_count_ == 2 && memory < 0) ? 1 : 0;
        const size_t idx =
            (static_cast<size_t>(k) * width_ + (offset - lo_offset_)) * memory_count_ + mem_slot;
        return (*stop_)[idx] != 0;
    }

private:
    SchemeKind scheme_;
    int steps_;
    int lo_offset_, hi_offset_, width_, memory_count_;
    std::shared_ptr<const std::vector<uint8_t>> stop_;
};

namespace detail {

/// Backward running maximum of the payoff at a frozen (absorbed) state:
/// out[k] = max_{k<=m<=n} f(m h, z).
std::vector<double> suffix_payoff_max(const Payoff& payoff, double level, int steps, double dt);

/// Boundary of the contiguous in-the-money stop block for one layer.
/// `put_style` scans from the bottom of the grid upward.
double stop_block_boundary(const std::vector<uint8_t>& stop_row, const std::vector<double>& pay_row,
                           int idx_lo, int idx_hi, bool put_style, double root, double grid_step,
                           int lo_offset);

}  // namespace detail

}  // namespace stoptree
