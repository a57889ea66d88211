#pragma once

#include <iosfwd>

#include "stoptree/lattice.hpp"
#include "stoptree/model.hpp"

namespace stoptree {

// ---------------------------------------------------------------------------
// Scheme 1: binomial lattice driven by a correlated random walk with one-step
// memory. The state is (grid point z, last move xi in {-1,+1}); the
// transition law mimics the diffusion's first two moments through the
// perturbation amplitude alpha(z) = (sigma^2(z) - 1) / 2.
// ---------------------------------------------------------------------------
struct BinomialLattice {
    int steps = 0;
    double dt = 0.0;
    double sqrt_dt = 0.0;
    double root = 0.0;

    // Grid offsets run over [lo_offset, hi_offset]; the extreme offsets are
    // interior barrier nodes B_n / C_n when the model's barriers are finite,
    // and unreachable padding (offset +-(n+1)) otherwise.
    int lo_offset = 0;
    int hi_offset = 0;
    bool lower_absorbing = false;
    bool upper_absorbing = false;

    std::vector<double> alpha_;  // (sigma^2(z_j) - 1)/2 per offset
    std::vector<double> drift_;  // mu(z_j) per offset

    double level(int offset) const { return root + offset * sqrt_dt; }
    double alpha(int offset) const { return alpha_[offset - lo_offset]; }
    double drift(int offset) const { return drift_[offset - lo_offset]; }

    /// P(next move = +1 | state (z_j, memory)); memory is the sign of the
    /// move that led into z_j.
    double up_probability(int offset, int memory) const {
        const double a_prev = alpha(offset - memory);
        const double a_next = alpha(offset);
        return 0.5 * (1.0 + (a_prev * memory + sqrt_dt * drift(offset)) / (1.0 + a_next));
    }
};

/// Builds the lattice, checking Assumption-1 style requirements and that
/// every reachable state's transition probabilities lie in [0,1]. Throws
/// ProbabilityOutOfRange (naming the state) when n is too small for the
/// model; never clamps.
BinomialLattice build_binomial(const DiffusionModel& model, const Payoff& payoff, int steps);

/// Backward dynamic programming for the optimal stopping value V_n. The root
/// state is (x, +1).
SolveResult solve_binomial(const BinomialLattice& lattice, const Payoff& payoff,
                           const SolveOptions& options = {});

/// Rational stopping rule eta*_n read off the solved surface (requires
/// SolveOptions::want_stop_region).
DiscreteStoppingRule stopping_rule(const SolveResult& result);

/// Surface-slice / exercise-boundary CSV: columns k,t,z,memory,value,stop.
void write_binomial_surface_csv(const SolveResult& result, std::ostream& out);
void write_binomial_boundary_csv(const SolveResult& result, const Payoff& payoff,
                                 std::ostream& out);

}  // namespace stoptree
