#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "stoptree/common.hpp"

namespace stoptree {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Coefficient families. Each one provides inline mu(s)/sigma(s) so the Monte
// Carlo hot loops can dispatch once per path instead of once per step.
// ---------------------------------------------------------------------------

/// dS = clamp(S, drift_floor, drift_cap) dt + clamp(S, vol_floor, vol_cap) dW
struct CappedGbm {
    double drift_cap = 10.0, drift_floor = 2.0;
    double vol_cap = 10.0, vol_floor = 2.0;

    double mu(double s) const { return std::clamp(s, drift_floor, drift_cap); }
    double sigma(double s) const { return std::clamp(s, vol_floor, vol_cap); }
};

/// dY = Y dt + Y dW, to be used with finite absorbing barriers.
struct AbsorbedGbm {
    double mu(double s) const { return s; }
    double sigma(double s) const { return s; }
};

/// dS = r S dt + delta S^{beta+1} dW with beta <= 0 (constant elasticity).
struct Cev {
    double r = 0.05;
    double delta = 0.2;
    double beta = 0.0;

    double mu(double s) const { return r * s; }
    double sigma(double s) const { return delta * std::pow(s, beta + 1.0); }
};

/// dY = (drift_const - reversion * Y) dt + vol * sqrt(Y) dW
struct Cir {
    double drift_const = 2.0;
    double reversion = 0.5;
    double vol = 2.0;

    double mu(double s) const { return drift_const - reversion * s; }
    double sigma(double s) const { return vol * std::sqrt(s); }
};

/// dS = r S dt + sig(S) S dW where sig jumps from sigma1 to sigma2 at the
/// threshold (sigma1 applies on [0, threshold]).
struct RegimeSwitchVol {
    double r = 0.1;
    double sigma1 = 0.7;
    double sigma2 = 0.3;
    double threshold = 8.0;

    double mu(double s) const { return r * s; }
    double sigma(double s) const { return (s <= threshold ? sigma1 : sigma2) * s; }
};

using BuiltinModel = std::variant<CappedGbm, AbsorbedGbm, Cev, Cir, RegimeSwitchVol>;

/// Arbitrary user coefficients (library-level API; not reachable from the CLI).
struct CustomCoeffs {
    std::function<double(double)> mu_fn;
    std::function<double(double)> sigma_fn;

    double mu(double s) const { return mu_fn(s); }
    double sigma(double s) const { return sigma_fn(s); }
};

using Coeffs = std::variant<CappedGbm, AbsorbedGbm, Cev, Cir, RegimeSwitchVol, CustomCoeffs>;

/// Bounds of mu, sigma over the domain, from dense sampling at construction.
struct CoefficientBounds {
    double sup_abs_mu = 0.0;
    double sup_abs_sigma = 0.0;
    double inf_sigma = kInf;
    double sample_lo = 0.0;  // range actually sampled (finite clip of (B,C))
    double sample_hi = 0.0;
};

// ---------------------------------------------------------------------------
// DiffusionModel: dY = sigma(Y) dW + mu(Y) dt absorbed at B < C, started at
// x in (B,C).
// ---------------------------------------------------------------------------
class DiffusionModel {
public:
    DiffusionModel(Coeffs coeffs, double barrier_lo, double barrier_hi, double start,
                   int bound_samples = 100000);

    double mu(double s) const;
    double sigma(double s) const;

    double barrier_lo() const { return barrier_lo_; }
    double barrier_hi() const { return barrier_hi_; }
    double start() const { return start_; }
    bool lower_barrier_finite() const { return std::isfinite(barrier_lo_); }
    bool upper_barrier_finite() const { return std::isfinite(barrier_hi_); }

    const CoefficientBounds& bounds() const { return bounds_; }
    const Coeffs& coeffs() const { return coeffs_; }

    /// Lipschitz constants on (B,C), populated for builtins where they exist.
    std::optional<double> lipschitz_mu() const { return lip_mu_; }
    std::optional<double> lipschitz_sigma() const { return lip_sigma_; }
    void declare_lipschitz(double lip_mu, double lip_sigma);

    /// Binomial scheme needs bounded Lipschitz coefficients with sigma
    /// bounded away from zero.
    bool supports_binomial(std::string* why = nullptr) const;
    /// Trinomial scheme needs bounded measurable mu, sigma, 1/sigma.
    bool supports_trinomial(std::string* why = nullptr) const;

private:
    Coeffs coeffs_;
    double barrier_lo_, barrier_hi_, start_;
    CoefficientBounds bounds_;
    std::optional<double> lip_mu_, lip_sigma_;
};

/// Builds a DiffusionModel from a builtin family, validating parameter ranges
/// and populating coefficient bounds and Lipschitz metadata.
DiffusionModel make_builtin(const BuiltinModel& spec, double barrier_lo, double barrier_hi,
                            double start);

/// Perpetual Black-Scholes put boundary 2 r K / (2 r + delta^2); a lower
/// absorbing barrier at or below it leaves the put value unchanged.
double perpetual_bs_boundary(double r, double strike, double delta);

// ---------------------------------------------------------------------------
// Payoff: reward f(t,x) >= 0, Lipschitz in the sense
//   |f(t1,x1)-f(t2,x2)| <= L((1+|x1|)|t2-t1| + |x2-x1|).
// Discounting lives inside f; there is no separate rate concept in the
// solvers.
// ---------------------------------------------------------------------------
class Payoff {
public:
    enum class Kind { Put, Call, Custom };

    static Payoff put(double strike, double rate, double maturity);
    static Payoff call(double strike, double rate, double maturity);
    static Payoff custom(std::function<double(double, double)> f, double maturity,
                         double lipschitz);

    /// Same payoff, knocked out once the state leaves (lo, hi).
    Payoff with_knockout(double lo, double hi) const;

    double operator()(double t, double x) const;

    Kind kind() const { return kind_; }
    double maturity() const { return maturity_; }
    double lipschitz() const { return lipschitz_; }
    double strike() const { return strike_; }
    double rate() const { return rate_; }
    const std::optional<std::pair<double, double>>& knockout() const { return knockout_; }

    /// Builtins factor as discount(t) * intrinsic(x); the solvers use this to
    /// hoist the time factor out of each backward layer.
    bool separable() const { return kind_ != Kind::Custom; }
    double discount(double t) const { return std::exp(-rate_ * t); }
    double intrinsic(double x) const {
        return kind_ == Kind::Put ? std::max(strike_ - x, 0.0) : std::max(x - strike_, 0.0);
    }

private:
    Payoff() = default;

    Kind kind_ = Kind::Custom;
    double strike_ = 0.0;
    double rate_ = 0.0;
    double maturity_ = 0.0;
    double lipschitz_ = 1.0;
    std::optional<std::pair<double, double>> knockout_;
    std::function<double(double, double)> fn_;
};

}  // namespace stoptree
