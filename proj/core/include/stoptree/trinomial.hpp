#pragma once

#include <iosfwd>

#include "stoptree/lattice.hpp"
#include "stoptree/model.hpp"
#include "stoptree/scale.hpp"

namespace stoptree {

enum class CalibrationMode { bisection, lipschitz_shortcut };

// ---------------------------------------------------------------------------
// Scheme 2: trinomial lattice on the sigma_bar*sqrt(h) grid. Each interior
// node carries the Skorokhod-embedding calibration (A-hat, q_up, q_mid, q_dn)
// making the node's expected embedded step length equal to h while the chain
// moves by exactly one grid step or stays put.
// ---------------------------------------------------------------------------
struct TrinomialLattice {
    int steps = 0;
    double dt = 0.0;
    double sigma_bar = 0.0;
    double grid_step = 0.0;  // sigma_bar * sqrt(dt)
    double root = 0.0;

    int down_count = 0;  // b_n
    int up_count = 0;    // c_n
    bool lower_absorbing = false;
    bool upper_absorbing = false;

    CalibrationMode mode = CalibrationMode::bisection;
    int cells_per_side = 256;
    int distinct_calibrations = 0;  // after window-sample caching

    std::vector<NodeCalibration> calib_;  // per offset in [-down_count, up_count]

    double level(int offset) const { return root + offset * grid_step; }
    double barrier_lo_effective() const { return level(-down_count); }
    double barrier_hi_effective() const { return level(up_count); }
    const NodeCalibration& calibration(int offset) const {
        return calib_[offset + down_count];
    }
    int interior_lo() const { return -down_count + (lower_absorbing ? 1 : 0); }
    int interior_hi() const { return up_count - (upper_absorbing ? 1 : 0); }
};

/// Builds the lattice. sigma_bar starts from 1.0001*(sup|sigma| +
/// sqrt(h) sup|mu|) and is raised until finite barrier distances are integer
/// multiples of the grid step; when no common refinement exists within a 25%
/// inflation budget the lower barrier is matched exactly and the upper one is
/// pulled inward to the nearest grid level. Node calibrations are shared
/// between windows with identical coefficient samples.
TrinomialLattice build_trinomial(const DiffusionModel& model, const Payoff& payoff, int steps,
                                 CalibrationMode mode = CalibrationMode::bisection);

/// Backward dynamic programming for the optimal stopping value V~_n of the
/// absorbed problem. With european=true intermediate exercise is dropped and
/// absorbed states pay f(T, barrier) at maturity.
SolveResult solve_trinomial(const TrinomialLattice& lattice, const Payoff& payoff,
                            const SolveOptions& options = {}, bool european = false);

/// Knockout variant: the reward is f paid only up to (and including) the
/// first barrier hit; afterwards the option is dead. The payoff must carry a
/// knockout pair coinciding with the lattice barriers.
SolveResult solve_trinomial_barrier(const TrinomialLattice& lattice, const Payoff& payoff,
                                    const SolveOptions& options = {}, bool european = false);

DiscreteStoppingRule stopping_rule_trinomial(const SolveResult& result);

/// Surface/boundary CSV: columns k,t,z,value,stop,q_up,q_mid,q_dn,A_hat.
void write_trinomial_surface_csv(const TrinomialLattice& lattice, const SolveResult& result,
                                 std::ostream& out);
void write_trinomial_boundary_csv(const TrinomialLattice& lattice, const SolveResult& result,
                                  const Payoff& payoff, std::ostream& out);

/// Calibration dump: columns node,X0,A_hat,q_up,q_mid,q_dn,residual.
void write_calibration_csv(const TrinomialLattice& lattice, std::ostream& out);

}  // namespace stoptree
