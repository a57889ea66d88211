#pragma once

#include <cstdint>
#include <vector>

#include "stoptree/binomial.hpp"
#include "stoptree/model.hpp"
#include "stoptree/trinomial.hpp"

namespace stoptree {

// ---------------------------------------------------------------------------
// Continuous-time verification lab: Euler-Maruyama paths of the diffusion,
// realizations of both schemes' Skorokhod embeddings on those paths, and
// evaluation of the lifted stopping rules tau* = T ^ theta_{eta*}.
//
// Hit detection is "first fine step at or beyond the level"; there is no
// bridge correction, so embedded times carry a positive bias that shrinks
// with dt_fine. The acceptance suite sizes dt_fine accordingly.
// ---------------------------------------------------------------------------

/// Lazy bundle of Euler-Maruyama paths: path i is reproducible from
/// (seed, i) alone, so enlarging the bundle never reshuffles earlier paths.
class PathBundle {
public:
    PathBundle(DiffusionModel model, double horizon, double dt, int count, uint64_t seed);

    const DiffusionModel& model() const { return model_; }
    double horizon() const { return horizon_; }
    double dt() const { return dt_; }
    int count() const { return count_; }
    uint64_t seed() const { return seed_; }

    /// Materialized trajectory (absorbed process x alongside the raw y and
    /// its martingale part m); intended for tests and small bundles.
    struct Trajectory {
        std::vector<double> t, y, x, m;
        bool absorbed = false;
        double absorption_time = 0.0;
    };
    Trajectory trajectory(int path_index) const;

private:
    DiffusionModel model_;
    double horizon_;
    double dt_;
    int count_;
    uint64_t seed_;
};

PathBundle simulate_paths(const DiffusionModel& model, double horizon, double dt, int count,
                          uint64_t seed);

/// One path's embedded chain.
struct EmbeddingTrace {
    SchemeKind scheme = SchemeKind::binomial;
    bool complete = true;
    std::vector<double> times;    // theta_0 .. theta_K
    std::vector<int> offsets;     // chain grid offsets
    std::vector<int8_t> memories; // binomial xi values (xi_0 = +1)
    double value_at_T = 0.0;      // absorbed path value at t = T (maturity of interest)
    double maturity = 0.0;
    double root = 0.0;            // grid geometry for recovering levels
    double grid_step = 0.0;
};

/// Realize the scheme-1 embedding (hitting times of the shifted martingale)
/// on every path of the bundle. Paths that fail to produce all n embedded
/// times within give_up_factor * horizon are marked incomplete.
std::vector<EmbeddingTrace> embed_binomial(const PathBundle& bundle, const BinomialLattice& lattice,
                                           double maturity, double give_up_factor = 10.0);

/// Realize the scheme-2 embedding (A-hat first stage, then settle on the
/// grid) on every path of the bundle.
std::vector<EmbeddingTrace> embed_trinomial(const PathBundle& bundle,
                                            const TrinomialLattice& lattice, double maturity,
                                            double give_up_factor = 10.0);

/// Value of the lifted policy tau* = T ^ theta_{eta*} on one embedded path.
double lifted_payoff(const EmbeddingTrace& trace, const DiscreteStoppingRule& rule,
                     const Payoff& payoff);

struct PolicyEstimate {
    double mean = 0.0;
    double stderr_mean = 0.0;
    int paths_used = 0;
    int paths_excluded = 0;
    double dt = 0.0;
    uint64_t seed = 0;
    int steps = 0;
};

/// Aggregates lifted_payoff over pre-computed traces.
PolicyEstimate evaluate_lifted_policy(const std::vector<EmbeddingTrace>& traces,
                                      const DiscreteStoppingRule& rule, const Payoff& payoff);

/// Fused simulate -> embed -> evaluate pipeline that never stores paths or
/// traces; this is what the CLI and the acceptance suite use at scale.
struct McParams {
    int paths = 100000;
    double dt = 1e-4;
    uint64_t seed = 1;
    double give_up_factor = 10.0;
};
PolicyEstimate lift_binomial(const DiffusionModel& model, const BinomialLattice& lattice,
                             const DiscreteStoppingRule& rule, const Payoff& payoff,
                             const McParams& mc);
PolicyEstimate lift_trinomial(const DiffusionModel& model, const TrinomialLattice& lattice,
                              const DiscreteStoppingRule& rule, const Payoff& payoff,
                              const McParams& mc);

/// Aggregate statistics of embedded times for the rate checks:
/// mean/stderr of the increments theta_{k+1}-theta_k and of
/// max_k |theta_k - k h|.
struct EmbeddingStats {
    double mean_increment = 0.0;
    double stderr_increment = 0.0;
    double mean_max_drift = 0.0;
    double stderr_max_drift = 0.0;
    long increments = 0;
    int paths_used = 0;
    int paths_excluded = 0;
};
EmbeddingStats embedding_stats_binomial(const DiffusionModel& model, const BinomialLattice& lattice,
                                        const Payoff& payoff, const McParams& mc);
EmbeddingStats embedding_stats_trinomial(const DiffusionModel& model,
                                         const TrinomialLattice& lattice, const Payoff& payoff,
                                         const McParams& mc);

/// Monte Carlo frequencies of the three embedded increments out of one node,
/// plus the mean embedded time: the brute-force oracle for NodeCalibration.
struct IncrementSample {
    double freq_up = 0.0, freq_mid = 0.0, freq_dn = 0.0;
    double mean_time = 0.0, stderr_time = 0.0;
    int samples = 0;
};
IncrementSample sample_trinomial_increment(const DiffusionModel& model, double anchor,
                                           double amplitude, double grid_step, double dt,
                                           int paths, uint64_t seed);

/// Monte Carlo law of the next binomial move out of state (z, memory): the
/// oracle for the scheme-1 transition probabilities.
struct BinarySample {
    double freq_up = 0.0;
    double mean_time = 0.0, stderr_time = 0.0;
    int samples = 0;
};
BinarySample sample_binomial_increment(const DiffusionModel& model, const BinomialLattice& lattice,
                                       int offset, int memory, double dt, int paths,
                                       uint64_t seed);

}  // namespace stoptree
