#pragma once

#include <stdexcept>
#include <string>

namespace stoptree {

/// Base class for failures of the numerical machinery (as opposed to bad
/// user input, which is ConfigError). CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A lattice transition probability left [0,1]. The offending state is kept
/// so callers can report exactly where the discretization is too coarse.
class ProbabilityOutOfRange : public NumericalError {
public:
    ProbabilityOutOfRange(double state, int memory, double value)
        : NumericalError("transition probability " + std::to_string(value) +
                         " out of [0,1] at state z=" + std::to_string(state) +
                         ", memory=" + std::to_string(memory) +
                         "; increase the step count n"),
          state_(state), memory_(memory), value_(value) {}

    double state() const { return state_; }
    int memory() const { return memory_; }
    double value() const { return value_; }

private:
    double state_;
    int memory_;
    double value_;
};

/// Bisection for the exit-time amplitude could not bracket the target mean
/// time. Indicates the grid volatility bound was chosen too small.
class BracketFailure : public NumericalError {
public:
    BracketFailure(double node, double exit_time_at_max, double target)
        : NumericalError("exit-time bisection cannot bracket: E[kappa] at the "
                         "full amplitude is " + std::to_string(exit_time_at_max) +
                         " < target " + std::to_string(target) +
                         " at node " + std::to_string(node)),
          node_(node), exit_time_at_max_(exit_time_at_max), target_(target) {}

    double node() const { return node_; }
    double exit_time_at_max() const { return exit_time_at_max_; }
    double target() const { return target_; }

private:
    double node_, exit_time_at_max_, target_;
};

/// A simulated path ran out of horizon before all embedded times were found.
class EmbeddingIncomplete : public NumericalError {
public:
    EmbeddingIncomplete(int path_index, int embedded, int requested)
        : NumericalError("path " + std::to_string(path_index) + " exhausted its"
                         " horizon after " + std::to_string(embedded) + " of " +
                         std::to_string(requested) + " embedded times"),
          path_index_(path_index), embedded_(embedded), requested_(requested) {}

    int path_index() const { return path_index_; }
    int embedded() const { return embedded_; }
    int requested() const { return requested_; }

private:
    int path_index_, embedded_, requested_;
};

/// Invalid run configuration or argument; CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error("config field '" + field + "': " + what), field_(field) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Worker count for path-parallel loops: STOPTREE_THREADS caps it, default is
/// the hardware concurrency.
int resolve_threads();

}  // namespace stoptree
